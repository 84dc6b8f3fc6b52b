import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from topp3 import Limits, Policy, Termination, controls, integrate, interpolate
from topp3 import scenarios as S
from topp3.errors import PreconditionError, ProfileRangeError
from topp3.integrator import Tag, concatenate, time_at, truncate


@pytest.fixture(scope="module")
def line_cs():
    return S.line().constraints


@given(st.floats(0.3, 3.0), st.floats(-3.0, 3.0), st.floats(0.05, 0.9))
def test_constant_jerk_is_exact(line_cs, sd0, sdd0, stop):
    """On q = s the maximum jerk is the bound itself; RK4 reproduces the cubic."""
    p = integrate(line_cs, (0.0, sd0, sdd0), 1, Policy.MaxJerk, stop_s=stop,
                  limits=Limits(dt=1e-2))
    if p.termination is not Termination.ReachedTarget:
        return
    t = p.t
    np.testing.assert_allclose(p.s, sd0 * t + sdd0 * t ** 2 / 2 + 100 * t ** 3 / 6, atol=1e-12)
    np.testing.assert_allclose(p.sd, sd0 + sdd0 * t + 50 * t ** 2, atol=1e-11)
    np.testing.assert_allclose(p.sdd, sdd0 + 100 * t, atol=1e-10)
    assert p.s[-1] == stop


def test_fourth_order_on_state_dependent_jerk(line_cs):
    f = lambda s, v, a: 30 * math.cos(3 * s) - 5 * v * a  # noqa: E731

    def rhs(s, y):
        _, v, a = y
        return [1 / v, a / v, f(s, v, a) / v]

    ref = solve_ivp(rhs, (0, 0.8), [0, 1, 0], rtol=1e-13, atol=1e-14, method="DOP853").y[:, -1]
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        p = integrate(line_cs, (0, 1.0, 0), 1, f, stop_s=0.8, limits=Limits(dt=dt))
        errs.append(np.max(np.abs([p.t[-1] - ref[0], p.sd[-1] - ref[1], p.sdd[-1] - ref[2]])))
    assert errs[0] / errs[1] >= 2 ** 3.5
    assert errs[1] / errs[2] >= 2 ** 3.5


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_half_step_reintegration(seed):
    pb = S.random_regular(seed)
    cs = pb.constraints
    start, _ = pb.boundary_states()
    coarse = integrate(cs, start, 1, Policy.MaxJerk, limits=Limits(dt=1e-3))
    fine = integrate(cs, start, 1, Policy.MaxJerk, limits=Limits(dt=5e-4))
    hi = min(coarse.s[-1], fine.s[-1])
    for s in np.linspace(0, hi, 50):
        a, b = interpolate(coarse, s), interpolate(fine, s)
        assert abs(a[0] - b[0]) <= 1e-5 * (1 + abs(b[0]))


def test_policy_jerk_recorded(sing_problem):
    cs = sing_problem.constraints
    start, end = sing_problem.boundary_states()
    for state, direction in ((start, 1), (end, -1)):
        p = integrate(cs, state, direction, Policy.MaxJerk)
        for i in range(0, len(p), max(1, len(p) // 20)):
            g, e = controls(cs, (p.s[i], p.sd[i], p.sdd[i]))
            assert p.jerk[i] == pytest.approx(e, rel=1e-9, abs=1e-9)
            assert p.tag[i] == Tag.MaxJerk


def test_backward_profile_layout(line_cs):
    p = integrate(line_cs, (1.0, 1.0, 0.0), -1, Policy.MaxJerk)
    assert np.all(np.diff(p.s) > 0)
    assert p.t[-1] == 0.0 and np.all(np.diff(p.t) > 0)
    assert p.start_state.s == 1.0 and p.end_state.s == p.s[0]
    assert p.termination is Termination.OutOfRange
    # maximum jerk backwards in time means acceleration decreases towards the start
    assert p.sdd[0] < 0


def test_terminations(line_cs, sing_problem):
    assert integrate(line_cs, (0, 1, 0), 1, Policy.MaxJerk).termination is Termination.OutOfRange
    assert integrate(line_cs, (0, 1, 0), 1, Policy.MaxJerk, stop_s=0.5).termination \
        is Termination.ReachedTarget
    assert integrate(line_cs, (0, 0.2, 0), 1, Policy.MinJerk).termination \
        is Termination.VelocityNonpositive
    assert integrate(line_cs, (0, 1, 0), 1, Policy.MaxJerk,
                     limits=Limits(jerk_cap=50.0)).termination is Termination.JerkCapHit
    assert integrate(line_cs, (0, 1, 0), 1, Policy.MaxJerk,
                     limits=Limits(step_limit=5)).termination is Termination.StepLimit
    # forward maximum jerk above the maximum singular curve, just before s* = 0.3
    cs = sing_problem.constraints
    p = integrate(cs, (0.29, 1.0, 18.0), 1, Policy.MaxJerk)
    assert p.termination is Termination.EmptyJerkInterval and p.s[-1] < 0.3


def test_preconditions(line_cs):
    with pytest.raises(PreconditionError):
        integrate(line_cs, (0, 0.0, 0), 1)
    with pytest.raises(PreconditionError):
        integrate(line_cs, (1.5, 1.0, 0), 1)
    with pytest.raises(PreconditionError):
        integrate(line_cs, (0, 1.0, 0), 1, limits=Limits(dt=0.0))
    with pytest.raises(ValueError):
        integrate(line_cs, (0, 1.0, 0), 0)


def test_interpolation_and_time(line_cs):
    p = integrate(line_cs, (0, 1.0, 0), 1, Policy.MaxJerk, stop_s=0.6, limits=Limits(dt=1e-2))
    for i in (0, 5, len(p) - 1):
        assert interpolate(p, p.s[i]) == (p.sd[i], p.sdd[i])
    # exact cubic in time: check a midpoint
    t = 0.5 * (p.t[3] + p.t[4])
    s = t + 100 * t ** 3 / 6
    sd, sdd = interpolate(p, s)
    assert sd == pytest.approx(1 + 50 * t ** 2, rel=1e-6)
    assert sdd == pytest.approx(100 * t, rel=1e-4)
    assert time_at(p, s) == pytest.approx(t, abs=1e-6)  # Hermite in s, O(h^4)
    with pytest.raises(ProfileRangeError):
        interpolate(p, 0.7)


def test_truncate_and_concatenate(line_cs):
    p = integrate(line_cs, (0, 1.0, 0), 1, Policy.MaxJerk, stop_s=0.6, limits=Limits(dt=1e-2))
    left = truncate(p, None, 0.3, line_cs)
    right = truncate(p, 0.3, None, line_cs)
    assert left.s[-1] == right.s[0] == 0.3
    assert left.jerk[-1] == pytest.approx(100.0)
    joined = concatenate([left, right])
    assert joined.s[0] == 0.0 and joined.s[-1] == 0.6
    assert np.all(np.diff(joined.s) > 0)
    assert joined.duration == pytest.approx(p.duration, rel=1e-9)
    with pytest.raises(ValueError, match="overlap"):
        concatenate([p, truncate(p, 0.2, None)])


def test_csv_has_termination(line_cs):
    p = integrate(line_cs, (0, 1.0, 0), 1, Policy.MaxJerk, stop_s=0.1)
    text = p.to_csv()
    assert text.splitlines()[0] == "t,s,sd,sdd,sddd,policy"
    assert text.rstrip().endswith("# termination=ReachedTarget")

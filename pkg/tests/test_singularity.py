import math

import numpy as np
import pytest

from topp3 import (ConstraintSet, PathSpec, Policy, Side, Singularity, accel_surfaces,
                   controls, extend_profile, find_singularities, integrate, singular_curve,
                   singular_jerk)
from topp3 import scenarios as S
from topp3.errors import EmptySingularCurve, SingularJerkUndefined, UnsupportedDoubleZero
from topp3.oracle import dense_curve_scan
from topp3.singularity import feasible_point_extension, sample_feasible

PROP_SEEDS = [0, 2, 3, 4, 5]  # seeded sets that contain singularities


def test_parabola_singularities(parabola_cs):
    sings = find_singularities(parabola_cs)
    assert [(g.s_star, g.k, g.side) for g in sings] == [
        (pytest.approx(0.5, abs=1e-12), 0, Side.MaxCurve),
        (pytest.approx(0.5, abs=1e-12), 1, Side.MinCurve)]
    lo, hi = sings[0].bracket
    assert lo <= 0.5 <= hi


def test_parabola_max_curve_is_analytic(parabola_cs):
    g = find_singularities(parabola_cs)[0]
    curve = singular_curve(parabola_cs, g)
    assert curve.capped and curve.lower_open
    sd, sdd = curve.samples[:, 0], curve.samples[:, 1]
    np.testing.assert_allclose(sdd, 100 / (6 * sd), rtol=1e-9)
    assert curve.sdd_at(parabola_cs, 1.0) == pytest.approx(100 / 6)


def test_singular_jerk_forms(parabola_cs):
    g = find_singularities(parabola_cs)[0]
    # hand-derived: -(6 (100/6 + (100/6)^2)) / (2 + 6) and its b' variant
    assert singular_jerk(parabola_cs, g, 1.0, 100 / 6) == pytest.approx(-220.8333333333, rel=1e-9)
    assert singular_jerk(parabola_cs, g, 1.0, 100 / 6, form="active") == \
        pytest.approx(-(6 * (100 / 6) ** 2) / 8, rel=1e-9)
    with pytest.raises(ValueError):
        singular_jerk(parabola_cs, g, 0.0, 1.0)
    with pytest.raises(ValueError):
        singular_jerk(parabola_cs, g, 1.0, 1.0, form="other")


@pytest.mark.parametrize("form,order", [("frozen", 1), ("active", 2)])
def test_singular_row_residual_order(parabola_cs, form, order):
    """Residual of the singular row after a Taylor step of length h from the curve.

    Only the ``b'`` variant keeps the row active to second order in h.
    """
    g = find_singularities(parabola_cs)[0]
    sd, sdd = 1.0, 100 / 6
    u = singular_jerk(parabola_cs, g, sd, sdd, form=form)
    res = []
    for h in (1e-3, 5e-4, 2.5e-4):
        s = 0.5 + sd * h + sdd * h * h / 2 + u * h ** 3 / 6
        v = sd + sdd * h + u * h * h / 2
        a = sdd + u * h
        res.append(abs(2 * (s - 0.5) * u + 6 * v * a - 100))  # q = (s-0.5)^2, upper row
    for r0, r1 in zip(res, res[1:]):
        assert r0 / r1 == pytest.approx(2 ** order, rel=0.2)


def test_singular_jerk_undefined():
    # for a joint row a' = q_ss and b = 3 q_ss, so a' + b vanishes only on a straight path
    path = PathSpec.from_polynomials([[0.25, -1.0, 1.0]])
    cs = ConstraintSet(path, [-100.0], [100.0])
    g = Singularity(0.5, 0, Side.MaxCurve, (0.49, 0.51))
    assert math.isfinite(singular_jerk(cs, g, 1.0, 1.0))
    flat = ConstraintSet(PathSpec.from_polynomials([[0.0, 1.0]]), [-100.0], [100.0])
    with pytest.raises(SingularJerkUndefined):
        singular_jerk(flat, Singularity(0.5, 0, Side.MaxCurve, (0.49, 0.51)), 1.0, 1.0)


def test_double_zero_rejected():
    cs = ConstraintSet(PathSpec.from_polynomials([[0.0, 0.75, -1.5, 1.0]]), [-100.0], [100.0])
    with pytest.raises(UnsupportedDoubleZero):
        find_singularities(cs)


def test_empty_curve_dropped_and_reported():
    # joint 2 turns at the same s* with a tight bound that excludes joint 1's singular curves
    path = PathSpec.from_polynomials([[0.09, -0.6, 1.0], [0.9, -6.0, 10.0]])
    cs = ConstraintSet(path, [-100.0, -1.0], [100.0, 1.0])
    sings = find_singularities(cs)
    assert sorted(g.k for g in sings) == [1, 3]
    with pytest.raises(EmptySingularCurve):
        singular_curve(cs, Singularity(0.3, 0, Side.MaxCurve, (0.29, 0.31)))


def test_truncated_curve_matches_dense_scan():
    cs = S.truncated_curve()
    sings = [g for g in find_singularities(cs) if abs(g.s_star - 0.5) < 1e-9]
    assert {g.k for g in sings} == {0, 1, 2}
    for g in sings:
        curve = singular_curve(cs, g)
        assert not curve.capped
        window = (0.0, 1.5 * curve.sd_max)
        cell = (window[1] - window[0]) / 4000
        lo, hi = dense_curve_scan(cs, g, window, 4001)
        assert abs(hi - curve.sd_max) <= cell
        assert abs(lo - curve.sd_min) <= cell + 1e-12
    # the second joint bounds the first joint's maximum curve
    c0 = singular_curve(cs, next(g for g in sings if g.k == 0))
    assert c0.sd_max == pytest.approx(2.0274006651911334, rel=1e-6)


# property suites on seeded constraint sets


@pytest.mark.parametrize("seed", PROP_SEEDS)
def test_extremal_accelerations_pin_the_jerk(seed):
    cs = S.random_constraint_set(seed)
    sings = find_singularities(cs)
    assert sings
    rng = np.random.default_rng(seed)
    n = 0
    while n < 100:
        s, sd = rng.uniform(0, 1), rng.uniform(0.05, 3.0)
        if any(abs(s - g.s_star) < 1e-3 for g in sings):
            continue
        surf = accel_surfaces(cs, s, sd, 1e4)
        if surf is None:
            continue
        for x in surf:
            if math.isfinite(x):
                gamma, eta = controls(cs, (s, sd, x))
                assert abs(gamma - eta) <= 1e-6 * max(1.0, abs(gamma))
                n += 1


@pytest.mark.parametrize("seed", PROP_SEEDS)
def test_singular_curves_lie_on_their_surface(seed):
    cs = S.random_constraint_set(seed)
    for g in find_singularities(cs):
        curve = singular_curve(cs, g)
        for sd, sdd in curve.samples:  # includes the pinched end of a bounded curve
            lo, hi = accel_surfaces(cs, g.s_star, sd, 1e4)
            ref = hi if g.side is Side.MaxCurve else lo
            assert abs(ref - sdd) <= 1e-6 * (1 + abs(sdd))


@pytest.mark.parametrize("seed", PROP_SEEDS)
def test_singular_curves_are_connected_intervals(seed):
    cs = S.random_constraint_set(seed)
    for g in find_singularities(cs):
        curve = singular_curve(cs, g)
        window = (0.0, 1.2 * curve.sd_max)
        res = 4001
        cell = (window[1] - window[0]) / (res - 1)
        grid = np.linspace(*window, res)[1:]
        ok = np.array([sample_feasible(cs, g, v, g.sdd_on_curve(cs, v)) for v in grid])
        idx = np.flatnonzero(ok)
        assert np.all(np.diff(idx) == 1), "feasible samples must form one run"
        lo, hi = dense_curve_scan(cs, g, window, res)
        assert abs(lo - curve.sd_min) <= cell * (1 + 1e-9)
        assert abs(hi - curve.sd_max) <= cell * (1 + 1e-9)


# extension


def test_extension_reaches_the_curve(sing_problem):
    cs = sing_problem.constraints
    start, _ = sing_problem.boundary_states()
    prof = integrate(cs, start, 1, Policy.MaxJerk)
    g = next(x for x in find_singularities(cs) if x.side is Side.MaxCurve)
    assert prof.s[-1] < g.s_star
    ext = extend_profile(cs, prof, g, form="active")
    assert prof.s[0] <= ext.s_anchor <= prof.s[-1]
    assert ext.bridge.s[-1] == pytest.approx(g.s_star, abs=1e-12)
    assert ext.bridge.sd[-1] == pytest.approx(ext.sd_curve, rel=1e-3)
    assert ext.resumed.s[0] == pytest.approx(g.s_star)
    assert ext.resumed.s[-1] > g.s_star + 0.05
    # nothing to do when the profile already covers s*
    assert extend_profile(cs, ext.resumed, g) is None
    min_side = next(x for x in find_singularities(cs) if x.side is Side.MinCurve)
    with pytest.raises(ValueError):
        extend_profile(cs, prof, min_side)


def test_backward_extension_uses_min_curve():
    from topp3 import solve

    sol = solve(S.one_singularity(0.7, 0.3))
    assert [(e["direction"], e["row"]) for e in sol.extensions] == [("backward", 2)]
    assert sol.structure == ["max", "min", "max", "min", "max"]
    assert sol.node_tags == ["max", "min", "max", "singular", "min", "max"]


def test_feasible_point_extension_is_slower(sing_problem):
    cs = sing_problem.constraints
    start, _ = sing_problem.boundary_states()
    prof = integrate(cs, start, 1, Policy.MaxJerk)
    g = next(x for x in find_singularities(cs) if x.side is Side.MaxCurve)
    ext = extend_profile(cs, prof, g, form="active")
    alt = feasible_point_extension(cs, prof, g, fraction=0.5)
    assert alt.sd_curve <= ext.sd_curve + 1e-9
    with pytest.raises(ValueError):
        feasible_point_extension(cs, prof, g, fraction=1.0)

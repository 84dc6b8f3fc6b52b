import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topp3 import BoundaryCondition, PathSpec, boundary_state, eval_derivatives
from topp3.errors import DegeneratePathError, DomainError, InconsistentBoundaryError

coef = st.floats(-5.0, 5.0, allow_nan=False)
poly = st.lists(coef, min_size=1, max_size=8)


@given(st.lists(poly, min_size=1, max_size=3), st.floats(0.0, 1.0))
def test_derivatives_match_numpy(coeffs, s):
    path = PathSpec.from_polynomials(coeffs)
    got = eval_derivatives(path, s, 4)
    for j, c in enumerate(coeffs):
        p = np.polynomial.Polynomial(c)
        for r in range(5):
            ref = p.deriv(r)(s) if r else p(s)
            assert got[r][j] == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_piecewise_uses_local_variable():
    # q = s^2 on [0, 0.5], continued as 0.25 + (s-0.5) + (s-0.5)^2 on [0.5, 1]
    path = PathSpec(1.0, [([0.0, 0.5, 1.0], [[0.0, 0.0, 1.0], [0.25, 1.0, 1.0]])], smoothness=2)
    q, qs, qss = eval_derivatives(path, 0.75, 2)
    assert q[0] == pytest.approx(0.25 + 0.25 + 0.0625)
    assert qs[0] == pytest.approx(1.5)
    assert qss[0] == pytest.approx(2.0)


def test_declared_smoothness_is_checked():
    pieces = [[0.0, 0.0, 1.0], [0.25, 1.0, 0.0]]  # C1 but curvature jumps
    PathSpec(1.0, [([0.0, 0.5, 1.0], pieces)], smoothness=1)
    with pytest.raises(ValueError, match="derivative 2 jumps"):
        PathSpec(1.0, [([0.0, 0.5, 1.0], pieces)], smoothness=2)


@pytest.mark.parametrize("joints,msg", [
    ([([0.0, 0.6, 0.5, 1.0], [[0.0]] * 3)], "strictly increasing"),
    ([([0.0, 0.9], [[0.0]])], "span"),
    ([([0.0, 1.0], [[0.0], [1.0]])], "pieces expected"),
    ([([0.0, 1.0], [[0.0] * 9])], "degree"),
    ([([0.0, 1.0], [[np.nan]])], "non-finite"),
])
def test_invalid_paths_rejected(joints, msg):
    with pytest.raises(ValueError, match=msg):
        PathSpec(1.0, joints)


def test_domain_error_outside_range():
    path = PathSpec.from_polynomials([[0.0, 1.0]])
    with pytest.raises(DomainError):
        eval_derivatives(path, 1.0 + 1e-9)
    with pytest.raises(ValueError):
        eval_derivatives(path, 0.5, 5)


def test_dict_roundtrip():
    path = PathSpec(2.0, [([0.0, 1.0, 2.0], [[0.0, 1.0], [1.0, 1.0]]),
                          ([0.0, 2.0], [[0.5, -1.0, 0.25]])])
    back = PathSpec.from_json(json.dumps(json.loads(path.to_json())))
    for s in np.linspace(0, 2, 11):
        for a, b in zip(eval_derivatives(path, s, 3), eval_derivatives(back, s, 3)):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_waypoint_spline_interpolates_and_warns():
    s = np.linspace(0, 1, 6)
    q = np.column_stack([np.sin(s), s ** 2])
    with pytest.warns(UserWarning, match="cubic spline"):
        path = PathSpec.from_waypoints(s, q)
    for si, qi in zip(s, q):
        np.testing.assert_allclose(eval_derivatives(path, si, 0)[0], qi, atol=1e-12)
    # clamped ends
    np.testing.assert_allclose(eval_derivatives(path, 0.0, 1)[1], 0.0, atol=1e-12)


@given(st.floats(0.1, 3.0), st.floats(-5.0, 5.0), st.floats(0.1, 3.0), st.floats(-5.0, 5.0))
def test_boundary_state_roundtrip(sd0, sdd0, sd1, sdd1):
    path = PathSpec.from_polynomials([[0.0, 1.0, 0.3], [1.0, -0.5, 0.0, 0.2]])
    bc = BoundaryCondition.from_path_state(path, (sd0, sdd0), (sd1, sdd1))
    s, sd, sdd = boundary_state(path, bc, "start")
    assert (s, sd, sdd) == pytest.approx((0.0, sd0, sdd0), rel=1e-12, abs=1e-12)
    s, sd, sdd = boundary_state(path, bc, "end")
    assert (s, sd, sdd) == pytest.approx((1.0, sd1, sdd1), rel=1e-12, abs=1e-12)


def test_braking_boundary_keeps_sign():
    path = PathSpec.from_polynomials([[0.0, 1.0], [0.0, 2.0]])
    bc = BoundaryCondition.from_path_state(path, (1.0, -3.0), (1.0, 0.0))
    assert boundary_state(path, bc)[2] == pytest.approx(-3.0)


def test_boundary_errors():
    path = PathSpec.from_polynomials([[0.0, 1.0], [0.0, 1.0]])
    off = BoundaryCondition([1.0, 0.0], [0.0, 0.0], [1.0, 1.0], [0.0, 0.0])
    with pytest.raises(InconsistentBoundaryError, match="tangent"):
        boundary_state(path, off, "start")
    with pytest.raises(InconsistentBoundaryError, match="entries"):
        boundary_state(path, BoundaryCondition([1.0], [0.0], [1.0], [0.0]))
    flat = PathSpec.from_polynomials([[0.0, 0.0, 1.0]])  # q_s = 0 at s = 0
    with pytest.raises(DegeneratePathError):
        boundary_state(flat, BoundaryCondition([0.0], [0.0], [1.0], [0.0]))
    with pytest.raises(ValueError):
        boundary_state(path, off, "middle")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(ValueError, match="non-finite"):
            BoundaryCondition([np.inf], [0.0], [1.0], [0.0])

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog as highs

from topp3.lp import linprog


def _random_lp(seed, n, m, with_eq):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=n)  # feasible by construction
    A = rng.normal(size=(m, n))
    b = A @ x0 + rng.uniform(0.0, 1.0, size=m)
    c = rng.normal(size=n)
    Aeq = beq = None
    if with_eq:
        Aeq = rng.normal(size=(1, n))
        beq = Aeq @ x0
    bounds = [(x - 3.0, x + 3.0) for x in x0]
    return c, A, b, Aeq, beq, bounds


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 8), st.booleans())
def test_matches_highs(seed, n, m, with_eq):
    c, A, b, Aeq, beq, bounds = _random_lp(seed, n, m, with_eq)
    got = linprog(c, A, b, Aeq, beq, bounds)
    ref = highs(c, A_ub=A, b_ub=b, A_eq=Aeq, b_eq=beq, bounds=bounds, method="highs")
    assert ref.status == 0
    assert got.status == "optimal"
    assert got.fun == pytest.approx(ref.fun, rel=1e-8, abs=1e-8)
    assert np.all(A @ got.x <= b + 1e-8)
    if with_eq:
        np.testing.assert_allclose(Aeq @ got.x, beq, atol=1e-8)


def test_infeasible_and_unbounded():
    res = linprog([1.0], A_ub=[[1.0], [-1.0]], b_ub=[-1.0, -1.0])  # x <= -1 and x >= 1
    assert res.status == "infeasible" and res.x is None
    res = linprog([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])
    assert res.status == "unbounded"


def test_free_and_half_bounded_variables():
    # min x + y, x >= -2 (bound), y free with y >= x - 1 and y >= -x
    res = linprog([1.0, 1.0], A_ub=[[1.0, -1.0], [-1.0, -1.0]], b_ub=[1.0, 0.0],
                  bounds=[(-2.0, None), (None, None)])
    ref = highs([1.0, 1.0], A_ub=[[1.0, -1.0], [-1.0, -1.0]], b_ub=[1.0, 0.0],
                bounds=[(-2.0, None), (None, None)], method="highs")
    assert res.status == "optimal"
    assert res.fun == pytest.approx(ref.fun, abs=1e-10)


def test_degenerate_vertex_terminates():
    # many constraints through the optimum: Bland's rule must not cycle
    A = [[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [1.0, 0.0], [0.0, 1.0]]
    b = [2.0, 3.0, 3.0, 1.0, 1.0]
    res = linprog([-1.0, -1.0], A_ub=A, b_ub=b, bounds=[(0, None), (0, None)])
    assert res.status == "optimal"
    assert res.fun == pytest.approx(-2.0)

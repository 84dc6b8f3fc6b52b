import json
import math

import numpy as np
import pytest

from topp3 import accel_surfaces
from topp3 import scenarios as S
from topp3.oracle import (compare_solution, dense_curve_scan, dense_surface_scan,
                          single_shooting_bridge)


def test_single_shooting_agrees_with_bridge(line_problem, line_solution):
    sol = line_solution
    conn = single_shooting_bridge(line_problem.constraints, sol.forward, sol.backward)
    assert conn is not None and conn.distance <= 1e-3
    assert conn.s_a == pytest.approx(sol.bridge.anchor1, abs=1e-3)
    assert conn.duration == pytest.approx(sol.duration, rel=1e-4)


def test_compare_solution_report(sing_problem, sing_solution):
    rep = compare_solution(sing_problem, sing_solution)
    assert rep.best is not None
    assert abs(rep.deltas["duration_rel"]) <= 5e-3
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["method"] == "single-shooting"
    assert set(d["durations"]) == {"solver", "oracle"}


def test_single_shooting_step_checked(line_problem, line_solution):
    with pytest.raises(ValueError):
        single_shooting_bridge(line_problem.constraints, line_solution.forward,
                               line_solution.backward, step=0.0)


@pytest.mark.parametrize("seed", [0, 3])
def test_dense_surface_scan_brackets_surfaces(seed):
    cs = S.random_constraint_set(seed)
    rng = np.random.default_rng(seed)
    window = (-50.0, 50.0)
    cell = (window[1] - window[0]) / 4000
    checked = 0
    for _ in range(30):
        s, sd = rng.uniform(0, 1), rng.uniform(0.1, 2.0)
        exact = accel_surfaces(cs, s, sd, 50.0)
        scan = dense_surface_scan(cs, s, sd, window)
        if exact is None:
            assert scan is None
            continue
        for e, g in zip(exact, scan):
            if math.isinf(e):
                assert math.isinf(g)
            else:
                assert abs(e - g) <= cell
        checked += 1
    assert checked > 10


def test_dense_scans_input_checks(parabola_cs):
    from topp3 import find_singularities

    g = find_singularities(parabola_cs)[0]
    with pytest.raises(ValueError):
        dense_surface_scan(parabola_cs, 0.2, 1.0, (-1, 1), resolution=1)
    with pytest.raises(ValueError):
        dense_curve_scan(parabola_cs, g, (0, 1), resolution=1)
    # the maximum curve of the parabola is feasible at every positive velocity
    lo, hi = dense_curve_scan(parabola_cs, g, (0.0, 10.0), 101)
    assert lo == pytest.approx(0.1) and hi == pytest.approx(10.0)

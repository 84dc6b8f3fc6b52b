"""Reproducible test problems: analytic paths, seeded random paths and singular setups."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .constraints import ConstraintSet
from .path import BoundaryCondition, PathSpec
from .solver import SolverOptions, Topp3Problem


def problem(coeffs, jerk, start=(1.0, 0.0), end=(1.0, 0.0), jerk_min=None,
            options: Optional[SolverOptions] = None) -> Topp3Problem:
    """Problem on a single-piece polynomial path over ``s in [0, 1]``.

    ``start``/``end`` are path states ``(sd, sdd)``; ``jerk`` is the per-joint
    upper bound and ``jerk_min`` defaults to its negative.
    """
    path = PathSpec.from_polynomials(coeffs)
    jmax = np.broadcast_to(np.asarray(jerk, dtype=float), (path.n_dof,))
    jmin = -jmax if jerk_min is None else np.broadcast_to(np.asarray(jerk_min, float),
                                                          (path.n_dof,))
    cs = ConstraintSet(path, jmin, jmax)
    bc = BoundaryCondition.from_path_state(path, start, end)
    return Topp3Problem(path, cs, bc, options or SolverOptions())


def line(jerk: float = 100.0, start=(1.0, 0.0), end=(1.0, 0.0)) -> Topp3Problem:
    """1-dof straight path ``q = s``."""
    return problem([[0.0, 1.0]], [jerk], start, end)


def parabola(jerk: float = 100.0, s_star: float = 0.5) -> PathSpec:
    """1-dof path ``(s - s_star)^2``; both jerk rows vanish at ``s_star``."""
    return PathSpec.from_polynomials([[s_star ** 2, -2 * s_star, 1.0]])


def one_singularity(s_star: float = 0.3, slope: float = 0.3, jerk: float = 100.0,
                    start=(1.0, 0.0), end=(1.0, 0.0)) -> Topp3Problem:
    """2-dof path whose first joint turns around at ``s_star``.

    The second joint is a slow ramp that keeps the path regular and bounds
    the admissible path jerk near ``s_star``.
    """
    q1 = [s_star ** 2, -2 * s_star, 1.0]
    return problem([q1, [0.0, slope]], [jerk, jerk], start, end)


def truncated_curve(s_star: float = 0.5, jerk: float = 100.0) -> ConstraintSet:
    """2-dof set where both joints turn around at ``s_star``.

    The second joint ``0.5 (s - s*)^2 + (s - s*)^3`` limits the first one's
    singular curve to a bounded velocity interval.
    """
    a = s_star
    q1 = [a * a, -2 * a, 1.0]
    # 0.5 (s-a)^2 + (s-a)^3 expanded
    q2 = [0.5 * a * a - a ** 3, -a + 3 * a * a, 0.5 - 3 * a, 1.0]
    path = PathSpec.from_polynomials([q1, q2])
    return ConstraintSet(path, [-jerk, -jerk], [jerk, jerk])


def random_regular_coeffs(rng: np.random.Generator, n_dof: int, degree: int) -> list:
    """Polynomials whose slope stays between half and one and a half times a ramp."""
    out = []
    for _ in range(n_dof):
        alpha = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
        beta = rng.normal(size=degree - 1)
        # derivative of the perturbation is sum k beta_k s^(k-1); bound it by |alpha|/2
        bound = sum((k + 2) * abs(b) for k, b in enumerate(beta))
        beta *= 0.5 * abs(alpha) / max(bound, 1e-12) * rng.uniform(0.2, 1.0)
        out.append([rng.uniform(-1, 1), alpha] + list(beta))
    return out


def random_regular(seed: int, jerk_range=(50.0, 2000.0), dt: float = 1e-3) -> Topp3Problem:
    """Seeded singularity-free problem: 1-3 joints, degree 4-6, jerk box in ``jerk_range``."""
    rng = np.random.default_rng(seed)
    n_dof = int(rng.integers(1, 4))
    degree = int(rng.integers(4, 7))
    coeffs = random_regular_coeffs(rng, n_dof, degree)
    jerk = rng.uniform(*jerk_range, size=n_dof)
    scale = float(np.min(jerk)) ** (1.0 / 3.0) / 5.0
    start = (scale * rng.uniform(0.5, 1.5), 0.0)
    end = (scale * rng.uniform(0.5, 1.5), 0.0)
    return problem(coeffs, jerk, start, end, options=SolverOptions(dt=dt, seed=seed))


def random_constraint_set(seed: int, n_dof: int = 3, degree: int = 5,
                          jerk_range=(50.0, 2000.0)) -> ConstraintSet:
    """Seeded generic polynomial path with independent jerk boxes."""
    rng = np.random.default_rng(seed)
    coeffs = [list(rng.normal(size=degree + 1)) for _ in range(n_dof)]
    path = PathSpec.from_polynomials(coeffs)
    jmax = rng.uniform(*jerk_range, size=n_dof)
    jmin = -rng.uniform(*jerk_range, size=n_dof)
    return ConstraintSet(path, jmin, jmax)

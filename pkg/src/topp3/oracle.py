"""Brute-force references used to cross-check the solver.

These routines deliberately avoid the multiple-shooting, linear-programming
and surface-reduction code: the connection search steps along the first
profile and shoots single minimum-jerk runs, and the surface and curve scans
grid the candidate values and test the raw constraint rows.  Only the
integrator and path evaluation are shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constraints import ConstraintSet
from .integrator import Limits, Policy, Profile, integrate
from .path import eval_derivatives

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OracleReport:
    method: str  # "single-shooting" | "dense-surface" | "dense-curve"
    best: Optional[dict]
    durations: dict = field(default_factory=dict)
    deltas: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def fmt(v):
            if isinstance(v, float):
                return float(f"{v:.12g}")
            if isinstance(v, dict):
                return {k: fmt(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [fmt(x) for x in v]
            return v

        return {"method": self.method, "best": fmt(self.best),
                "durations": fmt(self.durations), "deltas": fmt(self.deltas)}


@dataclass
class Connection:
    s_a: float
    s_b: float
    distance: float
    duration: float
    profile: Profile


def _hermite_many(prof: Profile, s: np.ndarray):
    """Vectorised cubic Hermite of ``(sd, sdd, t)`` in s."""
    i = np.clip(np.searchsorted(prof.s, s, side="right") - 1, 0, len(prof.s) - 2)
    x0, x1 = prof.s[i], prof.s[i + 1]
    h = x1 - x0
    w = np.where(h > 0, (s - x0) / np.where(h > 0, h, 1.0), 0.0)
    h00 = 2 * w ** 3 - 3 * w ** 2 + 1
    h10 = w ** 3 - 2 * w ** 2 + w
    h01 = -2 * w ** 3 + 3 * w ** 2
    h11 = w ** 3 - w ** 2
    out = []
    for y, m in ((prof.sd, prof.sdd / prof.sd), (prof.sdd, prof.jerk / prof.sd),
                 (prof.t, 1.0 / prof.sd)):
        out.append(h00 * y[i] + h10 * h * m[i] + h01 * y[i + 1] + h11 * h * m[i + 1])
    return out


def _closest(P: Profile, B: Profile, scale):
    """Closest approach of ``P`` to ``B`` in scaled (sd, sdd) at equal s."""
    lo = max(P.s[0], B.s[0])
    hi = min(P.s[-1], B.s[-1])
    if hi < lo:
        return math.inf, None
    inside = P.s[(P.s >= lo) & (P.s <= hi)]
    grid = np.unique(np.concatenate([[lo, hi], inside]))

    def dist(s):
        s = np.atleast_1d(s)
        pv, pa, _ = _hermite_many(P, s)
        bv, ba, _ = _hermite_many(B, s)
        return np.maximum(np.abs(pv - bv) / scale[0], np.abs(pa - ba) / scale[1])

    d = dist(grid)
    k = int(np.argmin(d))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    # golden-section on the bracketing node pair
    for _ in range(60):
        if b - a <= 1e-11 * (1.0 + abs(a)):
            break
        c = b - GOLDEN * (b - a)
        e = a + GOLDEN * (b - a)
        if dist(c)[0] < dist(e)[0]:
            b = e
        else:
            a = c
    s_best = 0.5 * (a + b)
    d_best = float(dist(s_best)[0])
    if d[k] < d_best:
        s_best, d_best = float(grid[k]), float(d[k])
    return d_best, float(s_best)


def _shoot_from(cs, A, B, s_a, limits, scale):
    sd, sdd, _ = (float(v[0]) for v in _hermite_many(A, np.array([s_a])))
    if not sd > 0:
        return math.inf, None, None
    P = integrate(cs, (s_a, sd, sdd), 1, Policy.MinJerk, stop_s=B.s[-1], limits=limits)
    d, s_b = _closest(P, B, scale)
    return d, s_b, P


def single_shooting_bridge(cs: ConstraintSet, A: Profile, B: Profile,
                           step: Optional[float] = None, rounds: int = 40,
                           tol: float = 1e-3, limits: Optional[Limits] = None,
                           ) -> Optional[Connection]:
    """Step along ``A``, shoot minimum jerk from each point and look for ``B``.

    Grid cells whose closest approach is a local minimum are refined by
    ternary search over ``rounds`` rounds; a connection counts when its
    scaled (sd, sdd) distance to ``B`` is at most ``tol``.  Among those the
    fastest (``A`` time + bridge time + ``B`` time) is returned, or None.
    """
    limits = limits or Limits(dt=A.dt)
    a_lo, a_hi = float(A.s[0]), float(A.s[-1])
    step = (a_hi - a_lo) / 200.0 if step is None else float(step)
    if not step > 0:
        raise ValueError("step must be positive")
    scale = (1.0 + max(np.max(np.abs(A.sd)), np.max(np.abs(B.sd))),
             1.0 + max(np.max(np.abs(A.sdd)), np.max(np.abs(B.sdd))))
    n = max(2, int(math.ceil((a_hi - a_lo) / step)) + 1)
    grid = np.linspace(a_lo, a_hi, n)
    d = np.array([_shoot_from(cs, A, B, s, limits, scale)[0] for s in grid])

    finite = np.isfinite(d)
    cands = [i for i in range(n) if finite[i]
             and (i == 0 or d[i] <= d[i - 1]) and (i == n - 1 or d[i] <= d[i + 1])]
    cands = sorted(cands, key=lambda i: d[i])[:3]
    best = None
    for i in cands:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
        # keep the best shot seen: the distance can jump where B has a junction
        seen = [(d[i], grid[i])]
        for _ in range(rounds):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            d1 = _shoot_from(cs, A, B, m1, limits, scale)[0]
            d2 = _shoot_from(cs, A, B, m2, limits, scale)[0]
            seen += [(d1, m1), (d2, m2)]
            if d1 <= d2:
                hi = m2
            else:
                lo = m1
        s_a = min(seen)[1]
        dist, s_b, P = _shoot_from(cs, A, B, s_a, limits, scale)
        if not dist <= tol:
            continue
        t_a = float(_hermite_many(A, np.array([s_a]))[2][0] - A.t[0])
        t_p = float(_hermite_many(P, np.array([s_b]))[2][0] - P.t[0])
        t_b = float(B.t[-1] - _hermite_many(B, np.array([s_b]))[2][0])
        total = t_a + t_p + t_b
        if best is None or total < best.duration:
            best = Connection(s_a, s_b, dist, total, P)
    return best


def _raw_rows(cs: ConstraintSet, s: float):
    """Jerk rows straight from the path derivatives."""
    _, q1, q2, q3 = eval_derivatives(cs.path, s, 3)
    a = np.concatenate([q1, -q1])
    b = np.concatenate([3 * q2, -3 * q2])
    c = np.concatenate([q3, -q3])
    d = np.concatenate([-cs.jerk_max, cs.jerk_min])
    return a, b, c, d


def _jerk_feasible(a, b, c, d, sd, sdd, thr, tol, skip=-1):
    rest = -(b * sd * sdd + c * sd ** 3 + d)  # a * sddd <= rest
    lo, hi = -math.inf, math.inf
    for i in range(len(a)):
        if i == skip:
            continue
        if abs(a[i]) <= thr:
            if rest[i] < -tol * (1.0 + abs(d[i])):
                return False
        elif a[i] > 0:
            hi = min(hi, rest[i] / a[i])
        else:
            lo = max(lo, rest[i] / a[i])
    return lo <= hi + tol * (1.0 + abs(lo) + abs(hi))


def dense_surface_scan(cs: ConstraintSet, s: float, sd: float, window, resolution: int = 4001):
    """Grid estimate of ``(MiAS, MaAS)`` at ``(s, sd)`` over ``sdd`` in ``window``.

    Returns None when no grid value is feasible; bounds hit at the window
    edge come back as infinities.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    a, b, c, d = _raw_rows(cs, s)
    thr = cs.eps_a * (1.0 + np.max(np.abs(a)))
    grid = np.linspace(window[0], window[1], resolution)
    ok = np.array([_jerk_feasible(a, b, c, d, sd, x, thr, 1e-12) for x in grid])
    if not ok.any():
        return None
    idx = np.flatnonzero(ok)
    lo = -math.inf if idx[0] == 0 else float(grid[idx[0]])
    hi = math.inf if idx[-1] == resolution - 1 else float(grid[idx[-1]])
    return lo, hi


def dense_curve_scan(cs: ConstraintSet, sing, window, resolution: int = 4001):
    """Grid estimate of the feasible velocity interval of a singular curve.

    ``sdd`` comes from the singular row held at equality; the other rows
    must admit a jerk.  Returns ``(sd_lo, sd_hi)`` of feasible grid points or
    None.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    k = sing.k
    a, b, c, d = _raw_rows(cs, sing.s_star)
    thr = cs.eps_a * (1.0 + np.max(np.abs(a)))
    grid = np.linspace(window[0], window[1], resolution)
    grid = grid[grid > 0]
    ok = []
    for v in grid:
        sdd = -(c[k] * v ** 3 + d[k]) / (b[k] * v)
        ok.append(_jerk_feasible(a, b, c, d, v, sdd, thr, 1e-9, skip=k))
    ok = np.array(ok)
    if not ok.any():
        return None
    idx = np.flatnonzero(ok)
    return float(grid[idx[0]]), float(grid[idx[-1]])


def compare_solution(problem, solution, step: Optional[float] = None,
                     rounds: int = 40) -> OracleReport:
    """Single-shooting connection between the solver's two composites."""
    cs = problem.constraints
    conn = single_shooting_bridge(cs, solution.forward, solution.backward, step=step,
                                  rounds=rounds, limits=problem.options.limits)
    durations = {"solver": solution.duration}
    deltas = {}
    best = None
    if conn is not None:
        durations["oracle"] = conn.duration
        deltas["duration_rel"] = (solution.duration - conn.duration) / conn.duration
        deltas["s_A"] = solution.bridge.anchor1 - conn.s_a
        deltas["s_B"] = solution.bridge.anchor2 - conn.s_b
        best = {"s_A": conn.s_a, "s_B": conn.s_b, "distance": conn.distance}
    return OracleReport("single-shooting", best, durations, deltas)

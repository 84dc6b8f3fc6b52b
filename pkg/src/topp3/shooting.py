"""Multiple shooting: minimum-jerk connections between profiles and onto singular curves.

A candidate connection is the vector
``x = [sd_0, sdd_0, ..., sd_N, sdd_N, anchor_1, anchor_2]`` on a uniform grid
of ``N`` segments.  For a bridge the anchors are the positions on the two
profiles; for an extension they are the position on the profile and the
velocity on the singular curve.  Newton iterations with a forward-difference
Jacobian drive the stacked continuity defects to zero while keeping the
anchors inside their boxes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from .constraints import ConstraintSet, controls
from .errors import DefectStalled, NonConvergence, NoOverlapWindow, ProfileRangeError
from .integrator import (Limits, Policy, Profile, Termination, integrate, interpolate)

logger = logging.getLogger(__name__)

SD_FLOOR = 1e-6
# bridge length relative to the crossing-point estimate, tuned on seeded problems
SPAN_FACTOR = 0.6


@dataclass
class NewtonOptions:
    max_iters: int = 50
    tol: float = 1e-4
    fd_rel: float = 1e-6
    lm_lambda0: float = 1e-6
    lm_factor: float = 10.0
    max_backtracks: int = 12
    restarts: int = 5
    jitter: float = 0.1
    seed: int = 0
    stiffness: float = 1e3
    guess: str = "auto"  # "auto" or "fraction"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class ShootingResult:
    profile: Profile
    anchor1: float
    anchor2: float
    x: np.ndarray
    iterations: int
    restarts: int
    defect: float
    trace: List[dict] = field(default_factory=list)


def shoot_segment(cs: ConstraintSet, s_i: float, sd_i: float, sdd_i: float, s_j: float,
                  limits: Optional[Limits] = None, singular=None):
    """Follow minimum jerk from ``(s_i, sd_i, sdd_i)`` to ``s_j``.

    Returns ``(sd_j, sdd_j, early, s_reached)``; ``early`` is True when the
    integration terminated before reaching ``s_j``, in which case the state
    returned is the last one reached.
    """
    if s_j == s_i:
        return float(sd_i), float(sdd_i), False, float(s_i)
    direction = 1 if s_j > s_i else -1
    prof = integrate(cs, (s_i, sd_i, sdd_i), direction, Policy.MinJerk, stop_s=s_j,
                     limits=limits, singular=singular)
    end = prof.end_state
    early = prof.termination is not Termination.ReachedTarget
    return end.sd, end.sdd, early, end.s


class _Problem:
    """Defect assembly shared by the bridge and extension formulations."""

    def __init__(self, cs, N, limits, stiffness, sd_scale, sdd_scale, singular=None):
        self.cs = cs
        self.N = N
        self.limits = limits
        self.stiffness = stiffness
        self.row_scale = np.tile([1.0 + sd_scale, 1.0 + sdd_scale], N + 2)
        self.singular = singular
        self.cache = {}

    # to be provided: grid(x), reverse (bool), anchor_rows(x), lower, upper

    def segment(self, s_from, sd, sdd, s_to):
        key = (s_from, sd, sdd, s_to)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if sd <= 0.0:
            # infeasible start: push back towards positive velocity
            out = np.array([sd, sdd]) - self.stiffness * abs(s_to - s_from)
        else:
            v, a, early, s_reached = shoot_segment(self.cs, s_from, sd, sdd, s_to,
                                                   self.limits, self.singular)
            out = np.array([v, a])
            if early:
                out = out - self.stiffness * abs(s_to - s_reached)
        self.cache[key] = out
        return out

    def defect(self, x):
        N = self.N
        s = self.grid(x)
        nodes = x[:2 * N + 2].reshape(N + 1, 2)
        F = np.empty(2 * N + 4)
        for i in range(N):
            if self.reverse:
                X = self.segment(s[i + 1], nodes[i + 1, 0], nodes[i + 1, 1], s[i])
                F[2 * i:2 * i + 2] = X - nodes[i]
            else:
                X = self.segment(s[i], nodes[i, 0], nodes[i, 1], s[i + 1])
                F[2 * i:2 * i + 2] = X - nodes[i + 1]
        F[2 * N:] = self.anchor_rows(x, nodes)
        return F

    def scaled(self, x):
        return self.defect(x) / self.row_scale

    def project(self, x):
        x = x.copy()
        x[-2] = min(max(x[-2], self.lower[0]), self.upper[0])
        x[-1] = min(max(x[-1], self.lower[1]), self.upper[1])
        x[:2 * self.N + 2:2] = np.maximum(x[:2 * self.N + 2:2], SD_FLOOR)
        return x

    def jacobian(self, x, f0, h_rel):
        n = len(x)
        J = np.empty((len(f0), n))
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
        lo[-2:], hi[-2:] = self.lower, self.upper
        for i in range(n):
            h = h_rel * (1.0 + abs(x[i]))
            if x[i] + h > hi[i]:
                h = -h
            xp = x.copy()
            xp[i] += h
            J[:, i] = (self.scaled(xp) - f0) / h
        return J


class _Bridge(_Problem):
    reverse = False

    def __init__(self, cs, A, B, N, limits, stiffness):
        sd_scale = max(np.max(np.abs(A.sd)), np.max(np.abs(B.sd)))
        sdd_scale = max(np.max(np.abs(A.sdd)), np.max(np.abs(B.sdd)))
        super().__init__(cs, N, limits, stiffness, sd_scale, sdd_scale)
        self.A, self.B = A, B
        self.lower = np.array([A.s_range[0], B.s_range[0]])
        self.upper = np.array([A.s_range[1], B.s_range[1]])

    def grid(self, x):
        s_a, s_b = x[-2], x[-1]
        return s_a + np.arange(self.N + 1) / self.N * (s_b - s_a)

    def anchor_rows(self, x, nodes):
        ra = np.array(interpolate(self.A, x[-2]))
        rb = np.array(interpolate(self.B, x[-1]))
        return np.concatenate([ra - nodes[0], rb - nodes[-1]])


class _Extension(_Problem):
    def __init__(self, cs, A, curve, N, limits, stiffness, direction, singular):
        sg = curve.singularity
        sd_scale = max(np.max(np.abs(A.sd)), curve.sd_max if math.isfinite(curve.sd_max) else 0.0)
        sdd_scale = max(np.max(np.abs(A.sdd)), np.max(np.abs(curve.samples[:, 1])))
        super().__init__(cs, N, limits, stiffness, sd_scale, sdd_scale, singular)
        self.A = A
        self.curve = curve
        self.s_star = sg.s_star
        self.direction = direction
        # forward: nodes run from the profile (s_0) up to s* (s_N), shot backwards
        # backward: nodes run from s* (s_0) up to the profile (s_N), shot forwards
        self.reverse = direction > 0
        # the curve may be open at zero velocity, where its acceleration blows up
        sd_lo = max(curve.sd_min, 1e-3 * curve.sd_max) if curve.lower_open else curve.sd_min
        self.lower = np.array([A.s_range[0], sd_lo])
        self.upper = np.array([A.s_range[1], curve.sd_max])

    def grid(self, x):
        k = np.arange(self.N + 1) / self.N
        if self.direction > 0:
            return x[-2] + k * (self.s_star - x[-2])
        return self.s_star + k * (x[-2] - self.s_star)

    def curve_state(self, sd_c):
        return np.array([sd_c, self.curve.sdd_at(self.cs, sd_c)])

    def anchor_rows(self, x, nodes):
        ra = np.array(interpolate(self.A, x[-2]))
        rc = self.curve_state(x[-1])
        if self.direction > 0:
            return np.concatenate([ra - nodes[0], rc - nodes[-1]])
        return np.concatenate([ra - nodes[-1], rc - nodes[0]])


def _newton(prob: _Problem, x0, opts: NewtonOptions, trace: list):
    """Damped Newton with box projection; returns ``(x, iterations, defect)``."""
    x = prob.project(np.asarray(x0, dtype=float))
    f = prob.scaled(x)
    lam = 0.0
    for it in range(opts.max_iters + 1):
        norm = float(np.max(np.abs(f)))
        trace.append({"iter": it, "defect": norm, "anchor1": float(x[-2]),
                      "anchor2": float(x[-1])})
        if norm <= opts.tol:
            return x, it, norm
        if it == opts.max_iters:
            break
        J = prob.jacobian(x, f, opts.fd_rel)
        prob.cache.clear()
        step = None
        q, r, piv = scipy.linalg.qr(J, pivoting=True)
        diag = np.abs(np.diag(r))
        if diag.size and diag[-1] > 1e-12 * diag[0]:
            z = scipy.linalg.solve_triangular(r, -q.T @ f)
            step = np.empty_like(z)
            step[piv] = z
            lam = 0.0
        f_norm2 = float(f @ f)
        accepted = False
        for attempt in range(6):
            if step is None:
                lam = opts.lm_lambda0 if lam == 0.0 else lam * opts.lm_factor
                JtJ = J.T @ J
                step = np.linalg.solve(JtJ + lam * np.diag(np.maximum(np.diag(JtJ), 1e-12)),
                                       -J.T @ f)
            alpha = 1.0
            for _ in range(opts.max_backtracks):
                xn = prob.project(x + alpha * step)
                fn = prob.scaled(xn)
                if float(fn @ fn) < (1.0 - 1e-4 * alpha) * f_norm2:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            step = None
        if not accepted:
            raise DefectStalled(f"line search failed at defect {norm:.3g}")
        x, f = xn, fn
    raise NonConvergence(f"no convergence in {opts.max_iters} iterations "
                         f"(defect {float(np.max(np.abs(f))):.3g})")


def _nodes_from_profile(prof: Profile, grid, fallback):
    out = []
    for i, s in enumerate(grid):
        try:
            out.append(interpolate(prof, s))
        except ProfileRangeError:
            out.append(fallback(i))
    return np.array(out)


def _crossing(A: Profile, B: Profile):
    lo = max(A.s_range[0], B.s_range[0])
    hi = min(A.s_range[1], B.s_range[1])
    if hi <= lo:
        return None
    grid = np.linspace(lo, hi, 401)
    g = np.array([interpolate(A, s)[0] - interpolate(B, s)[0] for s in grid])
    idx = np.flatnonzero((g[:-1] <= 0) & (g[1:] > 0))
    if len(idx) == 0:
        idx = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
    if len(idx) == 0:
        return None
    i = idx[0]
    # linear refinement inside the cell
    w = g[i] / (g[i] - g[i + 1]) if g[i] != g[i + 1] else 0.5
    return grid[i] + w * (grid[i + 1] - grid[i])


def _touching_point(A: Profile, B: Profile, scale, tol):
    """Position where ``A`` already meets ``B`` in (sd, sdd), or None."""
    cands = [A.s_range[1], _crossing(A, B)]
    lo, hi = B.s_range
    for s in cands:
        if s is None or not lo <= s <= hi or not A.s_range[0] <= s <= A.s_range[1]:
            continue
        gap = np.subtract(interpolate(A, s), interpolate(B, s)) / scale
        if np.max(np.abs(gap)) <= tol:
            return float(s)
    return None


def _bridge_guess(cs, A, B, N, opts, limits):
    a_lo, a_hi = A.s_range
    b_lo, b_hi = B.s_range
    s_x = _crossing(A, B) if opts.guess == "auto" else None
    if s_x is None:
        s_a = a_lo + 0.7 * (a_hi - a_lo)
        s_b = b_lo + 0.3 * (b_hi - b_lo)
    else:
        sd_x, sdda = interpolate(A, s_x)
        sddb = interpolate(B, s_x)[1]
        gamma, _ = controls(cs, (s_x, sd_x, sdda))
        jerk = abs(gamma) if math.isfinite(gamma) and gamma != 0 else cs.jerk_cap
        span = SPAN_FACTOR * sd_x * abs(sdda - sddb) / jerk
        s_a = min(max(s_x - 0.5 * span, a_lo), a_hi)
        s_b = min(max(s_x + 0.5 * span, b_lo), b_hi)
    return s_a, s_b


def _bridge_x0(prob: _Bridge, s_a, s_b, limits):
    x = np.zeros(2 * prob.N + 4)
    x[-2:] = s_a, s_b
    grid = prob.grid(x)
    ra = np.array(interpolate(prob.A, s_a))
    rb = np.array(interpolate(prob.B, s_b))

    def lin(i):
        w = i / prob.N
        return (1 - w) * ra + w * rb

    if s_b > s_a and ra[0] > 0:
        shot = integrate(prob.cs, (s_a, ra[0], ra[1]), 1, Policy.MinJerk, stop_s=s_b,
                         limits=limits)
        nodes = _nodes_from_profile(shot, grid, lin)
    else:
        nodes = np.array([lin(i) for i in range(prob.N + 1)])
    x[:2 * prob.N + 2] = nodes.ravel()
    return x


def defect_bridge(cs: ConstraintSet, A: Profile, B: Profile, x, limits: Optional[Limits] = None,
                  stiffness: float = 1e3) -> np.ndarray:
    """Unscaled continuity defects of a bridge candidate ``x`` (length 2N+4)."""
    x = np.asarray(x, dtype=float)
    N = (len(x) - 4) // 2
    if N < 1 or len(x) != 2 * N + 4:
        raise ValueError("shooting vector must have length 2N+4 with N >= 1")
    for val, prof in ((x[-2], A), (x[-1], B)):
        lo, hi = prof.s_range
        if not lo <= val <= hi:
            raise ProfileRangeError(f"anchor {val} outside [{lo}, {hi}]")
    prob = _Bridge(cs, A, B, N, limits or Limits(dt=A.dt), stiffness)
    return prob.defect(x)


def defect_extension(cs: ConstraintSet, A: Profile, curve, x, direction: int = 1,
                     limits: Optional[Limits] = None, stiffness: float = 1e3,
                     singular=None) -> np.ndarray:
    """Unscaled defects of an extension candidate ``x`` (length 2N+4)."""
    x = np.asarray(x, dtype=float)
    N = (len(x) - 4) // 2
    if N < 1 or len(x) != 2 * N + 4:
        raise ValueError("shooting vector must have length 2N+4 with N >= 1")
    prob = _Extension(cs, A, curve, N, limits or Limits(dt=A.dt), stiffness, direction,
                      singular)
    return prob.defect(x)


def _with_restarts(prob, x0_fn, anchors0, opts, what):
    rng = np.random.default_rng(opts.seed)
    trace = []
    last_exc = None
    width = prob.upper - prob.lower
    for attempt in range(opts.restarts + 1):
        if attempt == 0:
            anchors = np.array(anchors0, dtype=float)
        else:
            anchors = np.array(anchors0) + rng.uniform(-opts.jitter, opts.jitter, 2) * width
            anchors = np.clip(anchors, prob.lower, prob.upper)
        prob.cache.clear()
        x0 = x0_fn(*anchors)
        try:
            x, iters, norm = _newton(prob, x0, opts, trace)
            return x, iters, norm, attempt, trace
        except (NonConvergence, DefectStalled) as exc:
            logger.debug("%s attempt %d failed: %s", what, attempt, exc)
            last_exc = exc
    raise last_exc


def solve_bridge(cs: ConstraintSet, A: Profile, B: Profile, N: int = 3,
                 opts: Optional[NewtonOptions] = None,
                 limits: Optional[Limits] = None) -> ShootingResult:
    """Minimum-jerk profile from a point of ``A`` to a point of ``B``."""
    opts = opts or NewtonOptions()
    limits = limits or Limits(dt=A.dt)
    if N < 1:
        raise ValueError("N must be >= 1")
    if A.s_range[0] > B.s_range[1]:
        raise NoOverlapWindow(f"profile A starts at {A.s_range[0]:.6g}, after B ends "
                              f"at {B.s_range[1]:.6g}")
    prob = _Bridge(cs, A, B, N, limits, opts.stiffness)

    # profiles that already touch need no bridge
    touch = _touching_point(A, B, prob.row_scale[:2], opts.tol)
    if touch is not None:
        ra = np.array(interpolate(A, touch))
        node = Profile(np.zeros(1), np.array([touch]), ra[:1].copy(), ra[1:].copy(),
                       np.zeros(1), np.ones(1, dtype=np.int64), 1,
                       Termination.ReachedTarget, limits.dt)
        x = np.concatenate([np.tile(ra, N + 1), [touch, touch]])
        return ShootingResult(node, touch, touch, x, 0, 0, 0.0, [])

    s_a, s_b = _bridge_guess(cs, A, B, N, opts, limits)
    x, iters, norm, restarts, trace = _with_restarts(
        prob, lambda a, b: _bridge_x0(prob, a, b, limits), (s_a, s_b), opts, "bridge")
    s_a, s_b = float(x[-2]), float(x[-1])
    ra = interpolate(A, s_a)
    if s_b > s_a:
        prof = integrate(cs, (s_a, ra[0], ra[1]), 1, Policy.MinJerk, stop_s=s_b, limits=limits)
    else:
        prof = integrate(cs, (s_a, ra[0], ra[1]), -1, Policy.MinJerk, stop_s=s_b, limits=limits)
    end = prof.end_state
    miss = (np.array([end.sd, end.sdd]) - np.array(interpolate(B, s_b))) / prob.row_scale[:2]
    if prof.termination is not Termination.ReachedTarget or np.max(np.abs(miss)) > 10 * opts.tol:
        raise NonConvergence(
            f"re-integrated bridge misses B by {np.max(np.abs(miss)):.3g} "
            f"({prof.termination.name})")
    return ShootingResult(prof, s_a, s_b, x, iters, restarts, norm, trace)


def _extension_guess(cs, A, curve, direction, limits, singular):
    """Anchor guess: shoot minimum jerk from the curve towards the profile."""
    s_star = curve.singularity.s_star
    end = A.end_state
    sd_lo = max(curve.sd_min, 1e-3 * curve.sd_max) if curve.lower_open else curve.sd_min
    sd_c = min(max(end.sd, sd_lo), curve.sd_max)
    start = (s_star, sd_c, curve.sdd_at(cs, sd_c))
    shot = integrate(cs, start, -direction, Policy.MinJerk, limits=limits, singular=singular)
    lo = max(shot.s_range[0], A.s_range[0])
    hi = min(shot.s_range[1], A.s_range[1])
    if hi > lo:
        grid = np.linspace(lo, hi, 200)
        sc = np.array([1.0 + np.max(np.abs(A.sd)), 1.0 + np.max(np.abs(A.sdd))])
        dist = [np.max(np.abs(np.subtract(interpolate(shot, s), interpolate(A, s))) / sc)
                for s in grid]
        s_a = float(grid[int(np.argmin(dist))])
    else:
        a_lo, a_hi = A.s_range
        s_a = a_lo + 0.7 * (a_hi - a_lo)
    return s_a, sd_c, shot


def solve_extension(cs: ConstraintSet, A: Profile, curve, N: int = 3,
                    opts: Optional[NewtonOptions] = None, direction: int = 1,
                    limits: Optional[Limits] = None, singular=None) -> ShootingResult:
    """Minimum-jerk connection between profile ``A`` and a singular curve.

    ``direction=+1``: ``A`` is a forward profile ending before ``s*``; the
    connection runs from ``A`` to the curve.  ``direction=-1``: ``A`` is a
    backward profile starting after ``s*``; the connection runs from the
    curve to ``A``.  ``anchor1`` is the position on ``A``, ``anchor2`` the
    velocity on the curve.
    """
    opts = opts or NewtonOptions()
    limits = limits or Limits(dt=A.dt)
    if N < 1:
        raise ValueError("N must be >= 1")
    prob = _Extension(cs, A, curve, N, limits, opts.stiffness, direction, singular)
    s_star = curve.singularity.s_star
    if opts.guess == "fraction":
        a_lo, a_hi = A.s_range
        s_a0 = a_lo + 0.7 * (a_hi - a_lo)
        sd_c0 = 0.5 * (curve.sd_min + curve.sd_max)
        shot = None
    else:
        s_a0, sd_c0, shot = _extension_guess(cs, A, curve, direction, limits, singular)

    def x0_fn(s_a, sd_c):
        x = np.zeros(2 * N + 4)
        x[-2:] = s_a, sd_c
        grid = prob.grid(x)
        ra = np.array(interpolate(A, s_a))
        rc = prob.curve_state(sd_c)
        p0, pN = (ra, rc) if direction > 0 else (rc, ra)

        def lin(i):
            w = i / N
            return (1 - w) * p0 + w * pN

        if shot is not None and abs(sd_c - sd_c0) < 1e-15:
            nodes = _nodes_from_profile(shot, grid, lin)
        else:
            nodes = np.array([lin(i) for i in range(N + 1)])
        x[:2 * N + 2] = nodes.ravel()
        return x

    x, iters, norm, restarts, trace = _with_restarts(prob, x0_fn, (s_a0, sd_c0), opts,
                                                     "extension")
    s_a, sd_c = float(x[-2]), float(x[-1])
    start = (s_star, sd_c, curve.sdd_at(cs, sd_c))
    prof = integrate(cs, start, -direction, Policy.MinJerk, stop_s=s_a, limits=limits,
                     singular=singular)
    end = prof.end_state
    miss = (np.array([end.sd, end.sdd]) - np.array(interpolate(A, s_a))) / prob.row_scale[:2]
    if prof.termination is not Termination.ReachedTarget or np.max(np.abs(miss)) > 10 * opts.tol:
        raise NonConvergence(
            f"re-integrated extension misses the profile by {np.max(np.abs(miss)):.3g} "
            f"({prof.termination.name})")
    return ShootingResult(prof, s_a, sd_c, x, iters, restarts, norm, trace)


def jacobian_consistency(cs: ConstraintSet, A: Profile, B: Profile, x,
                         h1: float = 1e-6, h2: float = 1e-5,
                         limits: Optional[Limits] = None, stiffness: float = 1e3) -> float:
    """Largest relative column difference between forward-difference Jacobians.

    The scaled bridge Jacobian at ``x`` is built with two perturbation
    sizes; agreement indicates the defect is resolved well above the
    integration noise at the step the Newton solver uses.
    """
    x = np.asarray(x, dtype=float)
    N = (len(x) - 4) // 2
    prob = _Bridge(cs, A, B, N, limits or Limits(dt=A.dt), stiffness)
    f0 = prob.scaled(x)
    J1 = prob.jacobian(x, f0, h1)
    J2 = prob.jacobian(x, f0, h2)
    norms = np.maximum(np.linalg.norm(J1, axis=0), 1e-12)
    return float(np.max(np.linalg.norm(J1 - J2, axis=0) / norms))

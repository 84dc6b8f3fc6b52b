"""Canonical third-order constraint rows, extremal jerks and acceleration surfaces.

A constraint set stacks ``m`` rows of the form::

    a_i(s) sddd + b_i(s) sd sdd + c_i(s) sd^3 + d_i(s) <= 0

For joint jerk bounds ``j_min <= dddq <= j_max`` the rows are all upper
bounds first, then all lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import DomainError
from .path import PathSpec, eval_derivatives

EPS_A = 1e-8
PINCH_TOL = 1e-9  # relative slack before an inverted interval counts as empty
ALPHA_TOL = 1e-12


class State(NamedTuple):
    s: float
    sd: float
    sdd: float


@dataclass(frozen=True)
class ConstraintRowBlock:
    s: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    row_kind: tuple

    @property
    def m(self) -> int:
        return len(self.a)

    def values(self, sd: float, sdd: float, sddd: float) -> np.ndarray:
        """Row left-hand sides; feasible rows are <= 0."""
        return self.a * sddd + self.b * sd * sdd + self.c * sd ** 3 + self.d


class ConstraintSet:
    """Joint jerk bounds along a path.

    Parameters
    ----------
    path : PathSpec
    jerk_min, jerk_max : array_like
        Per-joint bounds (rad/s^3); ``jerk_min < 0 < jerk_max`` is required.
    eps_a : float
        Relative threshold below which a row's ``a_i`` counts as zero.
    jerk_cap : float, optional
        Largest path jerk the integrator accepts.  Defaults to ten times the
        largest bound divided by the smallest tangent norm along the path
        (clipped to [1e-3, 1]).
    """

    def __init__(self, path: PathSpec, jerk_min: Sequence[float], jerk_max: Sequence[float],
                 eps_a: float = EPS_A, jerk_cap: Optional[float] = None):
        jmin = np.atleast_1d(np.asarray(jerk_min, dtype=float))
        jmax = np.atleast_1d(np.asarray(jerk_max, dtype=float))
        if jmin.shape != (path.n_dof,) or jmax.shape != (path.n_dof,):
            raise ValueError(f"jerk bounds need {path.n_dof} entries")
        if not (np.all(jmin < 0) and np.all(jmax > 0)):
            raise ValueError("jerk bounds must satisfy jerk_min < 0 < jerk_max")
        if not eps_a > 0:
            raise ValueError("eps_a must be positive")
        self.path = path
        self.jerk_min = jmin
        self.jerk_max = jmax
        self.eps_a = float(eps_a)
        self.m = 2 * path.n_dof
        n = path.n_dof
        self.row_kind = tuple([("upper", j) for j in range(n)] + [("lower", j) for j in range(n)])
        if jerk_cap is None:
            grid = np.linspace(0.0, path.s_end, 201)
            tmin = min(np.max(np.abs(eval_derivatives(path, s, 1)[1])) for s in grid)
            tmin = min(1.0, max(1e-3, tmin))
            jerk_cap = 10.0 * max(np.max(np.abs(jmin)), np.max(jmax)) / tmin
        self.jerk_cap = float(jerk_cap)

    @property
    def kernel_args(self):
        bp, npieces, co, fall = self.path.packed
        return bp, npieces, co, fall, self.jerk_min, self.jerk_max, self.eps_a, self.jerk_cap

    def scaled(self, factor: float) -> "ConstraintSet":
        """Same path, jerk bounds multiplied by ``factor``."""
        return ConstraintSet(self.path, self.jerk_min * factor, self.jerk_max * factor,
                             self.eps_a, self.jerk_cap * factor)

    def row_scale(self) -> np.ndarray:
        """Magnitude of each row's bound term, used to normalise violations."""
        return np.concatenate([self.jerk_max, -self.jerk_min])

    def zero_threshold(self, a: np.ndarray) -> float:
        return self.eps_a * (1.0 + float(np.max(np.abs(a))))

    def row_derivatives(self, s: float):
        """Analytic ``(a', b', c', d')`` with respect to s."""
        q = eval_derivatives(self.path, s, 4)
        qss, qsss, qssss = q[2], q[3], q[4]
        z = np.zeros(self.m)
        return (np.concatenate([qss, -qss]), np.concatenate([3 * qsss, -3 * qsss]),
                np.concatenate([qssss, -qssss]), z)

    def to_dict(self) -> dict:
        return {"jerk_min": self.jerk_min.tolist(), "jerk_max": self.jerk_max.tolist(),
                "eps_a": self.eps_a, "jerk_cap": self.jerk_cap}

    @classmethod
    def from_dict(cls, path: PathSpec, data: dict) -> "ConstraintSet":
        return cls(path, data["jerk_min"], data["jerk_max"],
                   eps_a=data.get("eps_a", EPS_A), jerk_cap=data.get("jerk_cap"))


def coeffs(cs: ConstraintSet, s: float) -> ConstraintRowBlock:
    s = float(s)
    if not (0.0 <= s <= cs.path.s_end):
        raise DomainError(f"s={s} outside [0, {cs.path.s_end}]")
    bp, npieces, co, fall, jmin, jmax, _, _ = cs.kernel_args
    a = np.empty(cs.m)
    b = np.empty(cs.m)
    c = np.empty(cs.m)
    d = np.empty(cs.m)
    K.jerk_rows(bp, npieces, co, fall, jmin, jmax, s, a, b, c, d)
    return ConstraintRowBlock(s, a, b, c, d, cs.row_kind)


def controls(cs: ConstraintSet, state) -> tuple:
    """Minimum and maximum admissible path jerk ``(gamma, eta)`` at a state.

    Rows with a vanishing ``a_i`` are ignored.  Missing bounds come back as
    ``-inf`` / ``+inf``; ``gamma > eta`` means no admissible jerk exists.
    """
    s, sd, sdd = state
    if not sd > 0:
        raise ValueError("controls need sd > 0")
    blk = coeffs(cs, s)
    return K.controls_from_rows(blk.a, blk.b, blk.c, blk.d, float(sd), float(sdd), cs.eps_a)


def accel_surfaces(cs: ConstraintSet, s: float, sd: float, sdd_cap: float):
    """Extreme feasible accelerations ``(MiAS, MaAS)`` at ``(s, sd)``.

    The jerk is eliminated pairwise between rows with ``a_i > 0`` and
    ``a_i < 0``; rows with ``a_i ~ 0`` act on ``sdd`` directly.  The result is
    clipped to ``[-sdd_cap, sdd_cap]``; a bound sitting on the window edge
    is reported as infinite.  Returns ``None`` when no acceleration is
    feasible.
    """
    if not sd > 0:
        raise ValueError("accel_surfaces needs sd > 0")
    if not sdd_cap > 0:
        raise ValueError("sdd_cap must be positive")
    blk = coeffs(cs, s)
    thr = cs.zero_threshold(blk.a)
    e = blk.c * sd ** 3 + blk.d
    bs = blk.b * sd
    pos = np.flatnonzero(blk.a > thr)
    neg = np.flatnonzero(blk.a < -thr)
    zer = np.flatnonzero(np.abs(blk.a) <= thr)
    lo, hi = -sdd_cap, sdd_cap

    def half_line(alpha, beta):
        # feasible where alpha * sdd + beta <= 0
        nonlocal lo, hi
        scale = 1.0 + abs(beta)
        if abs(alpha) <= ALPHA_TOL * scale:
            if beta > 1e-12 * scale:
                lo, hi = 1.0, -1.0
            return
        r = -beta / alpha
        if alpha > 0:
            hi = min(hi, r)
        else:
            lo = max(lo, r)

    for z in zer:
        half_line(bs[z], e[z])
    # upper bound on sddd from p: -(bs_p sdd + e_p)/a_p
    # lower bound on sddd from n: -(bs_n sdd + e_n)/a_n
    # need lower <= upper
    for p in pos:
        for n in neg:
            alpha = bs[p] / blk.a[p] - bs[n] / blk.a[n]
            beta = e[p] / blk.a[p] - e[n] / blk.a[n]
            half_line(alpha, beta)
    if lo > hi:
        # a pinched interval (end of a singular curve) may invert by round-off
        if lo - hi > PINCH_TOL * (1.0 + abs(lo) + abs(hi)):
            return None
        lo = hi = 0.5 * (lo + hi)
    mias = -math.inf if lo <= -sdd_cap else lo
    maas = math.inf if hi >= sdd_cap else hi
    return mias, maas

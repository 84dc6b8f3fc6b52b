"""Geometric paths q(s) as per-joint piecewise polynomials.

Each joint carries its own breakpoints and, per piece, monomial
coefficients in ``(s - breakpoint_left)``.  Derivatives up to order four
are exact.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import DegeneratePathError, DomainError, InconsistentBoundaryError

CONTINUITY_TOL = 1e-9
PARALLEL_TOL = 1e-6  # rad


def _dpoly(coef: np.ndarray, x: float, order: int) -> float:
    acc = 0.0
    for k in range(len(coef) - 1, order - 1, -1):
        acc = acc * x + coef[k] * K._FALL[order, k]
    return acc


class PathSpec:
    """Piecewise-polynomial path on ``[0, s_end]``.

    Parameters
    ----------
    s_end : float
        Path length in path-parameter units.
    joints : sequence of (breakpoints, pieces)
        ``breakpoints`` is strictly increasing from 0 to ``s_end``;
        ``pieces[p]`` holds monomial coefficients ``c_0..c_k`` (k <= 7) of
        piece ``p`` in the local variable ``s - breakpoints[p]``.
    smoothness : int, optional
        Declared continuity class (0 to 4), verified at construction.
    """

    def __init__(self, s_end: float, joints: Sequence, smoothness: int = 0):
        s_end = float(s_end)
        if not s_end > 0:
            raise ValueError("s_end must be positive")
        if not 0 <= smoothness <= 4:
            raise ValueError("smoothness class must be in 0..4")
        if len(joints) == 0:
            raise ValueError("path needs at least one joint")
        self.s_end = s_end
        self.smoothness = int(smoothness)
        self._bps = []
        self._pieces = []
        for j, (bps, pieces) in enumerate(joints):
            bps = np.asarray(bps, dtype=float)
            if bps.ndim != 1 or len(bps) < 2:
                raise ValueError(f"joint {j}: need at least two breakpoints")
            if np.any(np.diff(bps) <= 0):
                raise ValueError(f"joint {j}: breakpoints must be strictly increasing")
            if abs(bps[0]) > 0 or abs(bps[-1] - s_end) > 1e-12 * max(1.0, s_end):
                raise ValueError(f"joint {j}: breakpoints must span [0, s_end]")
            if len(pieces) != len(bps) - 1:
                raise ValueError(f"joint {j}: {len(bps) - 1} pieces expected, got {len(pieces)}")
            cl = []
            for p, cf in enumerate(pieces):
                cf = np.asarray(cf, dtype=float)
                if cf.ndim != 1 or len(cf) == 0:
                    raise ValueError(f"joint {j} piece {p}: empty coefficient list")
                if len(cf) > K.NCOEF:
                    raise ValueError(f"joint {j} piece {p}: degree above {K.MAX_DEGREE}")
                if not np.all(np.isfinite(cf)):
                    raise ValueError(f"joint {j} piece {p}: non-finite coefficient")
                cl.append(cf)
            self._bps.append(bps)
            self._pieces.append(cl)
        self.n_dof = len(self._bps)
        self._pack()
        self._check_continuity()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_polynomials(cls, coeffs: Sequence[Sequence[float]], s_end: float = 1.0) -> "PathSpec":
        """Single-piece path, one coefficient list (in powers of s) per joint."""
        return cls(s_end, [([0.0, s_end], [c]) for c in coeffs], smoothness=4)

    @classmethod
    def from_waypoints(cls, s: Sequence[float], q: np.ndarray) -> "PathSpec":
        """Clamped C2 cubic spline through waypoints ``q[i]`` at ``s[i]``."""
        from scipy.interpolate import CubicSpline

        s = np.asarray(s, dtype=float)
        q = np.asarray(q, dtype=float)
        if q.ndim == 1:
            q = q[:, None]
        if s[0] != 0.0:
            raise ValueError("waypoint parameters must start at 0")
        warnings.warn(
            "cubic spline path: third derivative is piecewise constant and the "
            "fourth vanishes almost everywhere; singular jerks and switch "
            "points will be poorly resolved", stacklevel=2)
        joints = []
        for j in range(q.shape[1]):
            cs = CubicSpline(s, q[:, j], bc_type="clamped")
            # scipy stores highest power first
            pieces = [cs.c[::-1, p].copy() for p in range(cs.c.shape[1])]
            joints.append((s, pieces))
        return cls(float(s[-1]), joints, smoothness=2)

    # -- packed form for the compiled kernels ---------------------------------

    def _pack(self):
        maxp = max(len(b) - 1 for b in self._bps)
        bp = np.full((self.n_dof, maxp + 1), np.inf)
        co = np.zeros((self.n_dof, maxp, K.NCOEF))
        npieces = np.zeros(self.n_dof, dtype=np.int64)
        for j in range(self.n_dof):
            n = len(self._bps[j]) - 1
            bp[j, :n + 1] = self._bps[j]
            npieces[j] = n
            for p, cf in enumerate(self._pieces[j]):
                co[j, p, :len(cf)] = cf
        self.packed = (bp, npieces, co, K._FALL)

    def _check_continuity(self):
        for j in range(self.n_dof):
            bps = self._bps[j]
            pcs = self._pieces[j]
            for p in range(1, len(bps) - 1):
                width = bps[p] - bps[p - 1]
                for r in range(self.smoothness + 1):
                    left = _dpoly(pcs[p - 1], width, r)
                    right = _dpoly(pcs[p], 0.0, r)
                    if abs(left - right) > CONTINUITY_TOL * max(1.0, abs(left)):
                        raise ValueError(
                            f"joint {j}: derivative {r} jumps by {abs(left - right):.3g} "
                            f"at breakpoint {bps[p]:.6g} (declared C{self.smoothness})")

    # -- accessors --------------------------------------------------------------

    @property
    def breakpoints(self):
        return [b.copy() for b in self._bps]

    @property
    def pieces(self):
        return [[c.copy() for c in p] for p in self._pieces]

    def __call__(self, s: float, order: int = 0) -> np.ndarray:
        return eval_derivatives(self, s, order)[order]

    def to_dict(self) -> dict:
        return {
            "n_dof": self.n_dof,
            "s_end": self.s_end,
            "joints": [
                {"breakpoints": b.tolist(), "pieces": [c.tolist() for c in p]}
                for b, p in zip(self._bps, self._pieces)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, smoothness: int = 0) -> "PathSpec":
        joints = [(jt["breakpoints"], jt["pieces"]) for jt in data["joints"]]
        path = cls(data["s_end"], joints, smoothness=smoothness)
        if "n_dof" in data and int(data["n_dof"]) != path.n_dof:
            raise ValueError(f"n_dof={data['n_dof']} but {path.n_dof} joints given")
        return path

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PathSpec":
        return cls.from_dict(json.loads(text))


def eval_derivatives(path: PathSpec, s: float, max_order: int = 3) -> list:
    """Return ``[q, q_s, ..., q_s^(max_order)]`` at ``s``.

    At an interior breakpoint the right-hand piece is used; at ``s_end`` the
    last piece.
    """
    if not 0 <= max_order <= 4:
        raise ValueError("max_order must be within 0..4")
    s = float(s)
    if not (0.0 <= s <= path.s_end):
        raise DomainError(f"s={s} outside [0, {path.s_end}]")
    bp, npieces, co, fall = path.packed
    out = []
    for r in range(max_order + 1):
        out.append(np.array([K.eval_joint(bp, npieces, co, fall, j, s, r)
                             for j in range(path.n_dof)]))
    return out


@dataclass(frozen=True)
class BoundaryCondition:
    """Joint velocities and accelerations at both ends of the path."""

    v_beg: np.ndarray
    a_beg: np.ndarray
    v_end: np.ndarray
    a_end: np.ndarray

    def __post_init__(self):
        for name in ("v_beg", "a_beg", "v_end", "a_end"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, v)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundaryCondition":
        return cls(data["v_beg"], data["a_beg"], data["v_end"], data["a_end"])

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("v_beg", "a_beg", "v_end", "a_end")}

    @classmethod
    def from_path_state(cls, path: PathSpec, start: tuple, end: tuple) -> "BoundaryCondition":
        """Joint-space boundary data matching path states ``(sd, sdd)`` at each end."""
        vals = []
        for s, (sd, sdd) in ((0.0, start), (path.s_end, end)):
            _, qs, qss = eval_derivatives(path, s, 2)
            vals += [qs * sd, qss * sd ** 2 + qs * sdd]
        return cls(*vals)


def boundary_state(path: PathSpec, bc: BoundaryCondition, endpoint: str = "start"):
    """Path state ``(s, sd, sdd)`` implied by the joint boundary data.

    ``sd = |v| / |q_s|``.  The acceleration uses the signed projection of
    ``a - q_ss sd^2`` onto the tangent, so braking at the boundary keeps its
    sign.
    """
    if endpoint == "start":
        s, v, acc = 0.0, bc.v_beg, bc.a_beg
    elif endpoint == "end":
        s, v, acc = path.s_end, bc.v_end, bc.a_end
    else:
        raise ValueError("endpoint must be 'start' or 'end'")
    if v.shape != (path.n_dof,) or acc.shape != (path.n_dof,):
        raise InconsistentBoundaryError(
            f"boundary vectors must have {path.n_dof} entries")
    _, qs, qss = eval_derivatives(path, s, 2)
    nqs = float(np.linalg.norm(qs))
    if nqs == 0.0:
        raise DegeneratePathError(f"q_s vanishes at s={s}")
    nv = float(np.linalg.norm(v))
    if nv > 0.0:
        cosang = float(np.dot(v, qs)) / (nv * nqs)
        ang = math.acos(max(-1.0, min(1.0, cosang)))
        if ang > PARALLEL_TOL:
            raise InconsistentBoundaryError(
                f"velocity at {endpoint} is {ang:.3g} rad off the path tangent")
    sd = nv / nqs
    sdd = float(np.dot(acc - qss * sd ** 2, qs)) / nqs ** 2
    return s, sd, sdd

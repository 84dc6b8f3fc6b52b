"""Third-order singularities: detection, singular curves, singular jerk, extension."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import shooting
from .constraints import ConstraintSet, coeffs
from .errors import (EmptySingularCurve, ExtensionFailed, SingularJerkUndefined,
                     Topp3Error, UnsupportedDoubleZero)
from .integrator import Limits, Policy, Profile, integrate
from .lp import linprog

EPS_B = 1e-8
SD_CAP = 100.0
N_SAMPLES = 64
WINDOW_FACTOR = 10.0


class Side(enum.Enum):
    MaxCurve = "max"
    MinCurve = "min"


@dataclass(frozen=True)
class Singularity:
    s_star: float
    k: int
    side: Side
    bracket: tuple

    def equality(self, cs: ConstraintSet):
        """``(b_k, c_k, d_k)`` at ``s*``."""
        blk = coeffs(cs, self.s_star)
        return float(blk.b[self.k]), float(blk.c[self.k]), float(blk.d[self.k])

    def sdd_on_curve(self, cs: ConstraintSet, sd: float) -> float:
        b, c, d = self.equality(cs)
        return -(c * sd ** 3 + d) / (b * sd)

    def band(self, cs: ConstraintSet, form: str = "frozen",
             window_factor: float = WINDOW_FACTOR) -> np.ndarray:
        """Kernel descriptor applying the singular jerk around ``s*``.

        The band is where ``|a_k(s)|`` stays below ``window_factor`` times the
        zero threshold, estimated from the slope ``a_k'(s*)``.
        """
        blk = coeffs(cs, self.s_star)
        da, db, dc, dd = cs.row_derivatives(self.s_star)
        thr = window_factor * cs.zero_threshold(blk.a)
        slope = abs(da[self.k])
        half = thr / slope if slope > 0 else 0.0
        b = blk.b[self.k]
        b_lin = b if form == "frozen" else db[self.k]
        return np.array([1.0, self.s_star - half, self.s_star + half, da[self.k], b,
                         b_lin, blk.c[self.k], dc[self.k], dd[self.k]])


@dataclass
class SingularCurve:
    singularity: Singularity
    sd_min: float
    sd_max: float
    samples: np.ndarray  # (n, 2): sd, sdd
    capped: bool = False
    lower_open: bool = False

    def sdd_at(self, cs: ConstraintSet, sd: float) -> float:
        return self.singularity.sdd_on_curve(cs, sd)

    def to_csv_rows(self) -> List[str]:
        sg = self.singularity
        return [f"{sg.s_star:.12g},{sg.k},{sg.side.name},{v:.12g},{a:.12g}"
                for v, a in self.samples]


def _row_zero(cs, s, k):
    return float(coeffs(cs, s).a[k])


def find_singularities(cs: ConstraintSet, s_range=None, scan_step: Optional[float] = None,
                       sd_cap: float = SD_CAP) -> List[Singularity]:
    """Positions where a row's ``a_k`` changes sign and the singular curve is non-empty."""
    s_lo, s_hi = (0.0, cs.path.s_end) if s_range is None else s_range
    step = cs.path.s_end / 2000 if scan_step is None else scan_step
    if not step > 0:
        raise ValueError("scan step must be positive")
    n = max(2, int(math.ceil((s_hi - s_lo) / step)) + 1)
    grid = np.linspace(s_lo, s_hi, n)
    A = np.array([coeffs(cs, s).a for s in grid])
    out = []
    for k in range(cs.m):
        roots = []
        col = A[:, k]
        for g in range(n - 1):
            a0, a1 = col[g], col[g + 1]
            if a0 == 0.0:
                if 0 < g and (not roots or grid[g] - roots[-1][0] > 1e-12):
                    roots.append((grid[g], (grid[g - 1], grid[g + 1])))
                continue
            if a0 * a1 < 0:
                lo, hi = grid[g], grid[g + 1]
                flo = a0
                while hi - lo > 1e-12:
                    mid = 0.5 * (lo + hi)
                    fm = _row_zero(cs, mid, k)
                    if fm == 0.0:
                        lo = hi = mid
                        break
                    if (fm < 0) == (flo < 0):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                root = lo if abs(_row_zero(cs, lo, k)) <= abs(_row_zero(cs, hi, k)) else hi
                roots.append((root, (grid[g], grid[g + 1])))
        for s_star, br in roots:
            blk = coeffs(cs, s_star)
            bk = float(blk.b[k])
            if abs(bk) <= EPS_B * (1.0 + np.max(np.abs(blk.b))):
                raise UnsupportedDoubleZero(
                    f"row {k}: a_k and b_k both vanish at s={s_star:.12g}")
            side = Side.MaxCurve if bk > 0 else Side.MinCurve
            sg = Singularity(float(s_star), k, side, tuple(float(x) for x in br))
            if _curve_lp(cs, sg, sd_cap, maximize=True) is not None:
                out.append(sg)
    out.sort(key=lambda x: (x.s_star, x.k))
    return out


def _curve_lp(cs, sg: Singularity, sd_cap: float, maximize: bool):
    """Extreme ``w = sd^3`` over the singular set at ``s*``; None if empty.

    Variables are ``(sddd, u, w) = (sddd, sd*sdd, sd^3)``, in which every
    row is linear.
    """
    blk = coeffs(cs, sg.s_star)
    thr = cs.zero_threshold(blk.a)
    a = np.where(np.abs(blk.a) <= thr, 0.0, blk.a)
    k = sg.k
    others = [i for i in range(cs.m) if i != k]
    A_ub = np.column_stack([a[others], blk.b[others], blk.c[others]])
    b_ub = -blk.d[others]
    A_eq = np.array([[0.0, blk.b[k], blk.c[k]]])
    b_eq = np.array([-blk.d[k]])
    c = np.array([0.0, 0.0, -1.0 if maximize else 1.0])
    res = linprog(c, A_ub, b_ub, A_eq, b_eq,
                  bounds=[(None, None), (None, None), (0.0, sd_cap ** 3)])
    if res.status == "infeasible":
        return None
    if res.status == "unbounded":  # cannot happen with w boxed, kept for safety
        return sd_cap ** 3 if maximize else 0.0
    return float(res.x[2])


def sample_feasible(cs: ConstraintSet, sg: Singularity, sd: float, sdd: float,
                    tol: float = 1e-8) -> bool:
    """Whether ``(s*, sd, sdd)`` admits a jerk satisfying every row but ``k``."""
    blk = coeffs(cs, sg.s_star)
    thr = cs.zero_threshold(blk.a)
    rest = blk.b * sd * sdd + blk.c * sd ** 3 + blk.d
    scale = 1.0 + np.abs(blk.d)
    lo, hi = -math.inf, math.inf
    for i in range(cs.m):
        if i == sg.k:
            continue
        if abs(blk.a[i]) <= thr:
            if rest[i] > tol * scale[i]:
                return False
        elif blk.a[i] > 0:
            hi = min(hi, -rest[i] / blk.a[i])
        else:
            lo = max(lo, -rest[i] / blk.a[i])
    return lo <= hi + tol * (1.0 + abs(lo) + abs(hi))


def singular_curve(cs: ConstraintSet, sing: Singularity, sd_cap: float = SD_CAP,
                   n_samples: int = N_SAMPLES) -> SingularCurve:
    """Velocity interval of the singular curve by a pair of LPs, plus samples."""
    w_max = _curve_lp(cs, sing, sd_cap, maximize=True)
    if w_max is None:
        raise EmptySingularCurve(f"no feasible state on row {sing.k} at s={sing.s_star:.9g}")
    w_min = _curve_lp(cs, sing, sd_cap, maximize=False)
    sd_max = w_max ** (1.0 / 3.0)
    sd_min = max(w_min, 0.0) ** (1.0 / 3.0)
    capped = sd_max >= sd_cap * (1 - 1e-12)
    lower_open = sd_min <= 1e-12 * sd_cap
    if sd_max <= 0.0:
        raise EmptySingularCurve(f"singular curve at s={sing.s_star:.9g} has no positive velocity")
    if lower_open:
        grid = np.linspace(0.0, sd_max, n_samples + 1)[1:]
    else:
        grid = np.linspace(sd_min, sd_max, n_samples)
    ok = np.array([sample_feasible(cs, sing, v, sing.sdd_on_curve(cs, v)) for v in grid])
    if not ok.all():
        # connected set: keep the longest feasible run
        best, cur, start = (0, 0), 0, 0
        for i, f in enumerate(ok):
            if f:
                if cur == 0:
                    start = i
                cur += 1
                if cur > best[1] - best[0]:
                    best = (start, i + 1)
            else:
                cur = 0
        if best[1] == best[0]:
            raise EmptySingularCurve(f"no feasible sample at s={sing.s_star:.9g}")
        grid = grid[best[0]:best[1]]
        sd_min, sd_max = float(grid[0]), float(grid[-1])
    samples = np.column_stack([grid, [sing.sdd_on_curve(cs, v) for v in grid]])
    return SingularCurve(sing, float(sd_min), float(sd_max), samples, capped, lower_open)


def singular_jerk(cs: ConstraintSet, sing: Singularity, sd: float, sdd: float,
                  form: str = "frozen") -> float:
    """Jerk to apply on a singular curve.

    ``form="frozen"`` multiplies the ``sd*sdd`` term by ``b_k(s*)``;
    ``form="active"`` uses ``b_k'(s*)``, which is what keeping row ``k``
    active to first order along the flow gives.
    """
    if not sd > 0:
        raise ValueError("singular jerk needs sd > 0")
    if form not in ("frozen", "active"):
        raise ValueError("form must be 'frozen' or 'active'")
    blk = coeffs(cs, sing.s_star)
    da, db, dc, dd = cs.row_derivatives(sing.s_star)
    k = sing.k
    den = da[k] + blk.b[k]
    if abs(den) <= 1e-8 * (1.0 + abs(da[k]) + abs(blk.b[k])):
        raise SingularJerkUndefined(f"a_k' + b_k vanishes at s={sing.s_star:.9g}")
    b_lin = blk.b[k] if form == "frozen" else db[k]
    num = (dd[k] + dc[k] * sd ** 3 + 3.0 * blk.c[k] * sd * sdd
           + b_lin * sd * sdd + blk.b[k] * sdd ** 2 / sd)
    return float(-num / den)


@dataclass
class Extension:
    profile: Profile
    bridge: Profile
    resumed: Profile
    s_anchor: float
    sd_curve: float
    curve: SingularCurve
    newton: object = None


def extend_profile(cs: ConstraintSet, profile: Profile, sing: Singularity, direction: int = 1,
                   N: int = 3, opts=None, limits: Optional[Limits] = None,
                   sd_cap: float = SD_CAP, form: str = "frozen") -> Optional[Extension]:
    """Continue a terminated profile through ``sing``.

    Forward profiles connect by a minimum-jerk piece onto the maximum
    singular curve at ``s*`` and resume maximum jerk from there; backward
    profiles are mirrored (minimum singular curve, connection shot forward
    from ``s*``).  Returns None when the profile already covers ``s*``.
    """
    limits = limits or Limits(dt=profile.dt)
    s_lo, s_hi = profile.s_range
    if direction > 0:
        if s_hi >= sing.s_star:
            return None
        if sing.side is not Side.MaxCurve:
            raise ValueError("forward extension needs a maximum singular curve")
    else:
        if s_lo <= sing.s_star:
            return None
        if sing.side is not Side.MinCurve:
            raise ValueError("backward extension needs a minimum singular curve")
    curve = singular_curve(cs, sing, sd_cap=sd_cap)
    band = sing.band(cs, form=form)
    try:
        res = shooting.solve_extension(cs, profile, curve, N=N, opts=opts, direction=direction,
                                       limits=limits, singular=band)
    except Topp3Error as exc:
        raise ExtensionFailed(f"extension through s*={sing.s_star:.9g} failed: {exc}",
                              sing.s_star) from exc
    sd_c = res.anchor2
    start = (sing.s_star, sd_c, sing.sdd_on_curve(cs, sd_c))
    resumed = integrate(cs, start, direction, Policy.MaxJerk, limits=limits, singular=band)
    if len(resumed) < 2:
        raise ExtensionFailed(
            f"maximum-jerk integration stalls right after s*={sing.s_star:.9g} "
            f"({resumed.termination.name})", sing.s_star)
    return Extension(profile, res.profile, resumed, res.anchor1, sd_c, curve, res)


class _ScaledCurve:
    """Points ``(sd, fraction * sdd_C(sd))`` at s*: a family strictly inside the feasible set."""

    def __init__(self, curve: SingularCurve, fraction: float):
        self.singularity = curve.singularity
        self.sd_min, self.sd_max = curve.sd_min, curve.sd_max
        self.lower_open = curve.lower_open
        self.samples = curve.samples * np.array([1.0, fraction])
        self._curve, self._fraction = curve, fraction

    def sdd_at(self, cs: ConstraintSet, sd: float) -> float:
        return self._fraction * self._curve.sdd_at(cs, sd)


def feasible_point_extension(cs: ConstraintSet, profile: Profile, sing: Singularity,
                             fraction: float = 0.5, direction: int = 1, N: int = 3, opts=None,
                             limits: Optional[Limits] = None,
                             sd_cap: float = SD_CAP) -> Extension:
    """Extension through a generic feasible point at ``s*`` instead of the singular curve.

    The connection targets ``(sd, fraction * sdd_C(sd))`` with ``sd`` free,
    then resumes maximum jerk from there.  Used to compare against
    :func:`extend_profile`.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    limits = limits or Limits(dt=profile.dt)
    curve = _ScaledCurve(singular_curve(cs, sing, sd_cap=sd_cap), fraction)
    try:
        res = shooting.solve_extension(cs, profile, curve, N=N, opts=opts, direction=direction,
                                       limits=limits)
    except Topp3Error as exc:
        raise ExtensionFailed(f"feasible-point extension at s*={sing.s_star:.9g} failed: {exc}",
                              sing.s_star) from exc
    sd_c = res.anchor2
    start = (sing.s_star, sd_c, curve.sdd_at(cs, sd_c))
    resumed = integrate(cs, start, direction, Policy.MaxJerk, limits=limits)
    return Extension(profile, res.profile, resumed, res.anchor1, sd_c, curve, res)

"""Fixed-step integration of profiles in the (s, sd, sdd) space."""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from . import _kernels as K
from .constraints import ConstraintSet, State, controls
from .errors import PreconditionError, ProfileRangeError

DEFAULT_DT = 1e-3


class Termination(enum.IntEnum):
    ReachedTarget = K.T_REACHED
    EmptyJerkInterval = K.T_EMPTY
    VelocityNonpositive = K.T_VEL
    OutOfRange = K.T_RANGE
    JerkCapHit = K.T_CAP
    StepLimit = K.T_STEPS


class Policy(enum.IntEnum):
    MaxJerk = K.P_MAX
    MinJerk = K.P_MIN


class Tag(enum.IntEnum):
    MaxJerk = K.TAG_MAX
    MinJerk = K.TAG_MIN
    SingularJerk = K.TAG_SINGULAR


class ProfileNode(NamedTuple):
    t: float
    state: State
    applied_jerk: float
    policy_tag: Tag


@dataclass
class Limits:
    dt: float = DEFAULT_DT
    step_limit: int = 1_000_000
    jerk_cap: Optional[float] = None


@dataclass
class Profile:
    """Sampled profile, stored with s increasing whatever the direction.

    ``t`` is time relative to the start of integration, so backward profiles
    carry non-positive times.  ``pieces`` lists ``(s_lo, s_hi, kind)`` for
    composite profiles built by the solver.
    """

    t: np.ndarray
    s: np.ndarray
    sd: np.ndarray
    sdd: np.ndarray
    jerk: np.ndarray
    tag: np.ndarray
    direction: int
    termination: Termination
    dt: float
    pieces: list = field(default_factory=list)

    def __len__(self):
        return len(self.s)

    @property
    def s_range(self):
        return float(self.s[0]), float(self.s[-1])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def nodes(self):
        return [ProfileNode(float(t), State(float(s), float(v), float(a)), float(u), Tag(int(g)))
                for t, s, v, a, u, g in zip(self.t, self.s, self.sd, self.sdd, self.jerk, self.tag)]

    @property
    def start_state(self) -> State:
        """First state in integration order."""
        i = 0 if self.direction > 0 else -1
        return State(float(self.s[i]), float(self.sd[i]), float(self.sdd[i]))

    @property
    def end_state(self) -> State:
        """Last state in integration order."""
        i = -1 if self.direction > 0 else 0
        return State(float(self.s[i]), float(self.sd[i]), float(self.sdd[i]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,s,sd,sdd,sddd,policy\n")
        for t, s, v, a, u, g in zip(self.t, self.s, self.sd, self.sdd, self.jerk, self.tag):
            buf.write(f"{t:.12g},{s:.12g},{v:.12g},{a:.12g},{u:.12g},{Tag(int(g)).name}\n")
        buf.write(f"# termination={self.termination.name}\n")
        return buf.getvalue()


def _sing_array(singular) -> np.ndarray:
    if singular is None:
        return np.zeros(9)
    return np.asarray(singular, dtype=float)


def integrate(cs: ConstraintSet, start, direction: int = 1,
              policy: Union[Policy, Callable] = Policy.MaxJerk,
              stop_s: Optional[float] = None, limits: Optional[Limits] = None,
              singular=None) -> Profile:
    """Integrate a profile from ``start`` until the first termination event.

    Parameters
    ----------
    cs : ConstraintSet
    start : (s, sd, sdd)
    direction : +1 (forward in time) or -1 (backward in time)
    policy : Policy or callable
        ``MaxJerk`` follows eta, ``MinJerk`` follows gamma.  A callable
        ``f(s, sd, sdd) -> jerk`` is integrated as is, with no interval check.
    stop_s : float, optional
        Position at which to stop; the last step is shortened to land on it.
    limits : Limits, optional
    singular : array, optional
        Singular-jerk band descriptor from
        :meth:`topp3.singularity.Singularity.band`.
    """
    limits = limits or Limits()
    s0, sd0, sdd0 = (float(x) for x in start)
    if not sd0 > 0:
        raise PreconditionError(f"start velocity must be positive, got {sd0}")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if not limits.dt > 0:
        raise PreconditionError("dt must be positive")
    s_end = cs.path.s_end
    if not (0.0 <= s0 <= s_end):
        raise PreconditionError(f"start s={s0} outside [0, {s_end}]")
    cap = cs.jerk_cap if limits.jerk_cap is None else float(limits.jerk_cap)
    stop = math.nan if stop_s is None else float(stop_s)
    if callable(policy) and not isinstance(policy, Policy):
        out = _integrate_callable(cs, policy, s0, sd0, sdd0, limits.dt, direction,
                                  stop, cap, limits.step_limit)
    else:
        bp, npieces, co, fall, jmin, jmax, eps_a, _ = cs.kernel_args
        out = K.integrate_kernel(bp, npieces, co, fall, jmin, jmax, eps_a, cap,
                                 int(policy), _sing_array(singular), s0, sd0, sdd0,
                                 limits.dt, direction, stop, 0.0, s_end,
                                 limits.step_limit)
    t, s, sd, sdd, u, tag, term = out
    if direction < 0:
        t, s, sd, sdd, u, tag = (x[::-1].copy() for x in (t, s, sd, sdd, u, tag))
    return Profile(t, s, sd, sdd, u, tag, direction, Termination(term), limits.dt)


def _integrate_callable(cs, fn, s, sd, sdd, dt, direction, stop, cap, step_limit):
    """Pure-python twin of the compiled loop for arbitrary jerk functions."""
    h = dt * direction
    s_end = cs.path.s_end
    if direction > 0:
        target = s_end if math.isnan(stop) else min(stop, s_end)
        reached = K.T_REACHED if not math.isnan(stop) and stop <= s_end else K.T_RANGE
    else:
        target = 0.0 if math.isnan(stop) else max(stop, 0.0)
        reached = K.T_REACHED if not math.isnan(stop) and stop >= 0.0 else K.T_RANGE

    def step(y, hh):
        s_, v_, a_ = y
        u1 = fn(s_, v_, a_)
        s2, v2, a2 = s_ + 0.5 * hh * v_, v_ + 0.5 * hh * a_, a_ + 0.5 * hh * u1
        u2 = fn(s2, v2, a2)
        s3, v3, a3 = s_ + 0.5 * hh * v2, v_ + 0.5 * hh * a2, a_ + 0.5 * hh * u2
        u3 = fn(s3, v3, a3)
        s4, v4, a4 = s_ + hh * v3, v_ + hh * a3, a_ + hh * u3
        u4 = fn(s4, v4, a4)
        capped = max(abs(u1), abs(u2), abs(u3), abs(u4)) > cap
        return ((s_ + hh / 6 * (v_ + 2 * v2 + 2 * v3 + v4),
                 v_ + hh / 6 * (a_ + 2 * a2 + 2 * a3 + a4),
                 a_ + hh / 6 * (u1 + 2 * u2 + 2 * u3 + u4)), capped)

    def past(x):
        return x >= target if direction > 0 else x <= target

    rows = []
    t = 0.0
    y = (s, sd, sdd)
    term = K.T_STEPS
    while True:
        rows.append((t, y[0], y[1], y[2], fn(*y)))
        if past(y[0]):
            term = reached
            break
        if len(rows) > step_limit:
            break
        y1, capped = step(y, h)
        if capped:
            term = K.T_CAP
            break
        frac = 1.0
        if past(y1[0]):
            lo, hi = 0.0, 1.0
            while (hi - lo) * dt >= 1e-13:
                mid = 0.5 * (lo + hi)
                if past(step(y, h * mid)[0][0]):
                    hi = mid
                else:
                    lo = mid
            frac = hi
            y1, capped = step(y, h * frac)
            y1 = (target, y1[1], y1[2])
        if y1[1] <= 0:
            term = K.T_VEL
            break
        t += h * frac
        y = y1
    arr = np.array(rows)
    tag = np.full(len(arr), K.TAG_MAX, dtype=np.int64)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], tag, term


def _bracket(profile: Profile, s: float) -> int:
    s_lo, s_hi = profile.s_range
    if not (s_lo <= s <= s_hi):
        raise ProfileRangeError(f"s={s} outside profile range [{s_lo}, {s_hi}]")
    i = int(np.searchsorted(profile.s, s, side="right")) - 1
    return min(max(i, 0), len(profile.s) - 2)


def _hermite(x0, x1, y0, y1, m0, m1, x):
    hx = x1 - x0
    tau = (x - x0) / hx
    h00 = 2 * tau ** 3 - 3 * tau ** 2 + 1
    h10 = tau ** 3 - 2 * tau ** 2 + tau
    h01 = -2 * tau ** 3 + 3 * tau ** 2
    h11 = tau ** 3 - tau ** 2
    return h00 * y0 + h10 * hx * m0 + h01 * y1 + h11 * hx * m1


def interpolate(profile: Profile, s: float):
    """Velocity and acceleration ``(sd, sdd)`` on the profile at position ``s``."""
    s = float(s)
    if len(profile.s) == 1:
        if s == profile.s[0]:
            return float(profile.sd[0]), float(profile.sdd[0])
        raise ProfileRangeError(f"s={s} outside single-node profile")
    i = _bracket(profile, s)
    s0, s1 = profile.s[i], profile.s[i + 1]
    if s == s0:
        return float(profile.sd[i]), float(profile.sdd[i])
    if s == s1:
        return float(profile.sd[i + 1]), float(profile.sdd[i + 1])
    v0, v1 = profile.sd[i], profile.sd[i + 1]
    a0, a1 = profile.sdd[i], profile.sdd[i + 1]
    sd = _hermite(s0, s1, v0, v1, a0 / v0, a1 / v1, s)
    sdd = _hermite(s0, s1, a0, a1, profile.jerk[i] / v0, profile.jerk[i + 1] / v1, s)
    return float(sd), float(sdd)


def time_at(profile: Profile, s: float) -> float:
    """Profile time at position ``s`` (Hermite in s with dt/ds = 1/sd)."""
    s = float(s)
    if len(profile.s) == 1:
        return float(profile.t[0])
    i = _bracket(profile, s)
    return float(_hermite(profile.s[i], profile.s[i + 1], profile.t[i], profile.t[i + 1],
                          1.0 / profile.sd[i], 1.0 / profile.sd[i + 1], s))


def concatenate(parts, pieces=None, direction=1) -> Profile:
    """Join profiles that abut in s into one, with continuous time.

    At each junction the later part's first node replaces the earlier
    part's last node, so the stored jerk is that of the piece starting there.
    """
    parts = [p for p in parts if len(p) > 0]
    t_all, cols = [], [[] for _ in range(5)]
    last_t = None
    for p in parts:
        if last_t is None:
            shift = -p.t[0]
        else:
            if p.s[0] < cols[0][-1][-1] - 1e-9:
                raise ValueError("profiles to concatenate overlap in s")
            for col in cols:
                col[-1] = col[-1][:-1]
            t_all[-1] = t_all[-1][:-1]
            shift = last_t - p.t[0]
        t_all.append(p.t + shift)
        for col, arr in zip(cols, (p.s, p.sd, p.sdd, p.jerk, p.tag)):
            col.append(arr)
        last_t = float(p.t[-1] + shift)
    t = np.concatenate(t_all)
    s, sd, sdd, u, tag = (np.concatenate(c) for c in cols)
    if direction < 0:
        t = t - t[-1]
    term = parts[-1].termination if direction > 0 else parts[0].termination
    return Profile(t, s, sd, sdd, u, tag.astype(np.int64), direction, term,
                   parts[0].dt, list(pieces or []))


def _policy_jerk(cs, s, sd, sdd, tag, fallback):
    if cs is None or tag == Tag.SingularJerk or not sd > 0:
        return fallback
    gamma, eta = controls(cs, (s, sd, sdd))
    u = eta if tag == Tag.MaxJerk else gamma
    return u if math.isfinite(u) else fallback


def truncate(profile: Profile, s_lo: Optional[float] = None, s_hi: Optional[float] = None,
             cs: Optional[ConstraintSet] = None) -> Profile:
    """Restrict a profile to ``[s_lo, s_hi]``, adding interpolated end nodes.

    With ``cs`` given, the jerk at the new end nodes is re-evaluated from the
    policy at the interpolated state rather than copied from a neighbour.
    """
    lo, hi = profile.s_range
    s_lo = lo if s_lo is None else float(s_lo)
    s_hi = hi if s_hi is None else float(s_hi)
    inside = (profile.s > s_lo + 1e-12) & (profile.s < s_hi - 1e-12)
    idx = np.flatnonzero(inside)
    t = list(profile.t[idx])
    s = list(profile.s[idx])
    sd = list(profile.sd[idx])
    sdd = list(profile.sdd[idx])
    u = list(profile.jerk[idx])
    tag = list(profile.tag[idx])
    for where, sv in ((0, s_lo), (None, s_hi)):
        v, a = interpolate(profile, sv)
        j = int(np.argmin(np.abs(profile.s - sv)))
        uj = _policy_jerk(cs, sv, v, a, int(profile.tag[j]), float(profile.jerk[j]))
        if where == 0:
            t.insert(0, time_at(profile, sv)); s.insert(0, sv); sd.insert(0, v)
            sdd.insert(0, a); u.insert(0, uj); tag.insert(0, profile.tag[j])
        elif s_hi > s_lo:
            t.append(time_at(profile, sv)); s.append(sv); sd.append(v)
            sdd.append(a); u.append(uj); tag.append(profile.tag[j])
    arr = [np.array(x, dtype=float) for x in (t, s, sd, sdd, u)]
    return Profile(*arr, np.array(tag, dtype=np.int64), profile.direction,
                   profile.termination, profile.dt, list(profile.pieces))

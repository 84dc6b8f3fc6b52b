"""Compiled inner loops: path evaluation, jerk controls and the RK4 stepper.

Everything here works on the packed array form of a path (see
``PathSpec.packed``) so that it can be jitted by numba.  Public wrappers
live in :mod:`topp3.path`, :mod:`topp3.constraints` and
:mod:`topp3.integrator`.
"""

import math

import numpy as np
from numba import njit

MAX_DEGREE = 7
NCOEF = MAX_DEGREE + 1

# termination codes, mirrored by integrator.Termination
T_REACHED = 0
T_EMPTY = 1
T_VEL = 2
T_RANGE = 3
T_CAP = 4
T_STEPS = 5

# policy codes
P_MAX = 0
P_MIN = 1

# node tags
TAG_MAX = 0
TAG_MIN = 1
TAG_SINGULAR = 2

# falling factorial k!/(k-r)! for k < NCOEF, r <= 4
_FALL = np.zeros((5, NCOEF))
for _r in range(5):
    for _k in range(NCOEF):
        if _k >= _r:
            v = 1.0
            for _i in range(_r):
                v *= _k - _i
            _FALL[_r, _k] = v


@njit(cache=True)
def find_piece(bp, npieces, j, s):
    n = npieces[j]
    if s <= bp[j, 0]:
        return 0
    if s >= bp[j, n]:
        return n - 1
    lo = 0
    hi = n
    # largest p with bp[p] <= s, so a breakpoint selects the right piece
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bp[j, mid] <= s:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def eval_joint(bp, npieces, co, fall, j, s, order):
    p = find_piece(bp, npieces, j, s)
    x = s - bp[j, p]
    acc = 0.0
    for k in range(NCOEF - 1, order - 1, -1):
        acc = acc * x + co[j, p, k] * fall[order, k]
    return acc


@njit(cache=True)
def jerk_rows(bp, npieces, co, fall, jmin, jmax, s, a, b, c, d):
    n = jmin.shape[0]
    for j in range(n):
        qs = eval_joint(bp, npieces, co, fall, j, s, 1)
        qss = eval_joint(bp, npieces, co, fall, j, s, 2)
        qsss = eval_joint(bp, npieces, co, fall, j, s, 3)
        a[j] = qs
        a[n + j] = -qs
        b[j] = 3.0 * qss
        b[n + j] = -3.0 * qss
        c[j] = qsss
        c[n + j] = -qsss
        d[j] = -jmax[j]
        d[n + j] = jmin[j]


@njit(cache=True)
def zero_threshold(a, eps_a):
    amax = 0.0
    for i in range(a.shape[0]):
        if abs(a[i]) > amax:
            amax = abs(a[i])
    return eps_a * (1.0 + amax)


@njit(cache=True)
def controls_from_rows(a, b, c, d, sd, sdd, eps_a):
    thr = zero_threshold(a, eps_a)
    gamma = -np.inf
    eta = np.inf
    for i in range(a.shape[0]):
        ai = a[i]
        if abs(ai) <= thr:
            continue
        v = (-b[i] * sd * sdd - c[i] * sd * sd * sd - d[i]) / ai
        if ai < 0.0:
            if v > gamma:
                gamma = v
        else:
            if v < eta:
                eta = v
    return gamma, eta


@njit(cache=True)
def singular_jerk_value(sd, sdd, ap, b, b_lin, c, cp, dp):
    # b_lin multiplies the sd*sdd term; see singularity.singular_jerk
    num = dp + cp * sd ** 3 + 3.0 * c * sd * sdd + b_lin * sd * sdd + b * sdd * sdd / sd
    return -num / (ap + b)


@njit(cache=True)
def policy_eval(bp, npieces, co, fall, jmin, jmax, eps_a, cap, policy, sing,
                s, sd, sdd, a, b, c, d):
    """Returns (jerk, tag, empty, capped)."""
    if sing[0] > 0.0 and s >= sing[1] and s <= sing[2]:
        u = singular_jerk_value(sd, sdd, sing[3], sing[4], sing[5], sing[6],
                                sing[7], sing[8])
        return u, TAG_SINGULAR, False, abs(u) > cap
    jerk_rows(bp, npieces, co, fall, jmin, jmax, s, a, b, c, d)
    gamma, eta = controls_from_rows(a, b, c, d, sd, sdd, eps_a)
    empty = gamma > eta + 1e-9 * (1.0 + abs(gamma) + abs(eta)) if (
        math.isfinite(gamma) and math.isfinite(eta)) else False
    if policy == P_MAX:
        u = eta
        if u == np.inf:
            u = cap
            return u, TAG_MAX, empty, False
        return u, TAG_MAX, empty, abs(u) > cap
    u = gamma
    if u == -np.inf:
        u = -cap
        return u, TAG_MIN, empty, False
    return u, TAG_MIN, empty, abs(u) > cap


@njit(cache=True)
def rk4_step(bp, npieces, co, fall, jmin, jmax, eps_a, cap, policy, sing,
             s, sd, sdd, h, a, b, c, d):
    """One classical RK4 step of (s, sd, sdd)' = (sd, sdd, u).

    Returns (s1, sd1, sdd1, u_first, tag_first, flag) where flag is 0 for a
    clean step, 1 if any stage saw an empty jerk interval, 2 if any stage
    jerk exceeded the cap.
    """
    flag = 0
    u1, tag1, e1, c1 = policy_eval(bp, npieces, co, fall, jmin, jmax, eps_a,
                                   cap, policy, sing, s, sd, sdd, a, b, c, d)
    if e1:
        flag = 1
    elif c1:
        flag = 2
    s2 = s + 0.5 * h * sd
    sd2 = sd + 0.5 * h * sdd
    sdd2 = sdd + 0.5 * h * u1
    u2, t2, e2, c2 = policy_eval(bp, npieces, co, fall, jmin, jmax, eps_a,
                                 cap, policy, sing, s2, sd2, sdd2, a, b, c, d)
    s3 = s + 0.5 * h * sd2
    sd3 = sd + 0.5 * h * sdd2
    sdd3 = sdd + 0.5 * h * u2
    u3, t3, e3, c3 = policy_eval(bp, npieces, co, fall, jmin, jmax, eps_a,
                                 cap, policy, sing, s3, sd3, sdd3, a, b, c, d)
    s4 = s + h * sd3
    sd4 = sd + h * sdd3
    sdd4 = sdd + h * u3
    u4, t4, e4, c4 = policy_eval(bp, npieces, co, fall, jmin, jmax, eps_a,
                                 cap, policy, sing, s4, sd4, sdd4, a, b, c, d)
    if flag == 0:
        if e2 or e3 or e4:
            flag = 1
        elif c2 or c3 or c4:
            flag = 2
    s1 = s + h / 6.0 * (sd + 2.0 * sd2 + 2.0 * sd3 + sd4)
    sd1 = sd + h / 6.0 * (sdd + 2.0 * sdd2 + 2.0 * sdd3 + sdd4)
    sdd1 = sdd + h / 6.0 * (u1 + 2.0 * u2 + 2.0 * u3 + u4)
    return s1, sd1, sdd1, u1, tag1, flag


@njit(cache=True)
def integrate_kernel(bp, npieces, co, fall, jmin, jmax, eps_a, cap, policy,
                     sing, s0, sd0, sdd0, dt, direction, stop_s, s_lo, s_hi,
                     step_limit):
    """Fixed-step integration until the first termination event.

    ``stop_s`` is NaN when absent.  Returns node arrays in integration
    order plus the termination code.
    """
    m = 2 * jmin.shape[0]
    a = np.empty(m)
    b = np.empty(m)
    c = np.empty(m)
    d = np.empty(m)
    cap_n = 1024
    ts = np.empty(cap_n)
    ss = np.empty(cap_n)
    sds = np.empty(cap_n)
    sdds = np.empty(cap_n)
    us = np.empty(cap_n)
    tags = np.empty(cap_n, dtype=np.int64)
    h = dt * direction
    # target in the direction of travel
    if direction > 0:
        target = s_hi
        if not math.isnan(stop_s) and stop_s < target:
            target = stop_s
    else:
        target = s_lo
        if not math.isnan(stop_s) and stop_s > target:
            target = stop_s
    reached_code = T_RANGE
    if not math.isnan(stop_s):
        if (direction > 0 and stop_s <= s_hi) or (direction < 0 and stop_s >= s_lo):
            reached_code = T_REACHED

    n = 0
    s = s0
    sd = sd0
    sdd = sdd0
    t = 0.0
    term = T_STEPS
    while True:
        if n >= ts.shape[0]:
            k = ts.shape[0] * 2
            ts2 = np.empty(k)
            ss2 = np.empty(k)
            sds2 = np.empty(k)
            sdds2 = np.empty(k)
            us2 = np.empty(k)
            tags2 = np.empty(k, dtype=np.int64)
            ts2[:n] = ts[:n]
            ss2[:n] = ss[:n]
            sds2[:n] = sds[:n]
            sdds2[:n] = sdds[:n]
            us2[:n] = us[:n]
            tags2[:n] = tags[:n]
            ts = ts2
            ss = ss2
            sds = sds2
            sdds = sdds2
            us = us2
            tags = tags2
        u0, tag0, e0, c0 = policy_eval(bp, npieces, co, fall, jmin, jmax,
                                       eps_a, cap, policy, sing, s, sd, sdd,
                                       a, b, c, d)
        ts[n] = t
        ss[n] = s
        sds[n] = sd
        sdds[n] = sdd
        us[n] = u0
        tags[n] = tag0
        n += 1
        if (direction > 0 and s >= target) or (direction < 0 and s <= target):
            term = reached_code
            break
        if n > step_limit:
            term = T_STEPS
            break
        s1, sd1, sdd1, u1, tg, flag = rk4_step(
            bp, npieces, co, fall, jmin, jmax, eps_a, cap, policy, sing,
            s, sd, sdd, h, a, b, c, d)
        if flag == 1:
            term = T_EMPTY
            break
        if flag == 2:
            term = T_CAP
            break
        crossed = (direction > 0 and s1 >= target) or (direction < 0 and s1 <= target)
        if crossed:
            # shrink the last step so that it lands on the target
            lo = 0.0
            hi = 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                sm, sdm, sddm, um, tgm, fm = rk4_step(
                    bp, npieces, co, fall, jmin, jmax, eps_a, cap, policy,
                    sing, s, sd, sdd, h * mid, a, b, c, d)
                if (direction > 0 and sm >= target) or (direction < 0 and sm <= target):
                    hi = mid
                else:
                    lo = mid
                if (hi - lo) * dt < 1e-13:
                    break
            s1, sd1, sdd1, u1, tg, flag = rk4_step(
                bp, npieces, co, fall, jmin, jmax, eps_a, cap, policy, sing,
                s, sd, sdd, h * hi, a, b, c, d)
            if flag == 1:
                term = T_EMPTY
                break
            if flag == 2:
                term = T_CAP
                break
            if sd1 <= 0.0:
                term = T_VEL
                break
            t += h * hi
            s = target
            sd = sd1
            sdd = sdd1
            continue
        if sd1 <= 0.0:
            term = T_VEL
            break
        t += h
        s = s1
        sd = sd1
        sdd = sdd1
    return ts[:n], ss[:n], sds[:n], sdds[:n], us[:n], tags[:n], term

"""Small dense two-phase simplex with Bland's rule.

Sized for the handful of variables and rows that arise when computing
singular curves; no attempt is made at sparsity or warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

TOL = 1e-10


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    fun: Optional[float]
    iterations: int = 0


def _pivot(T, r, k):
    T[r] /= T[r, k]
    col = T[:, k].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _simplex(T, basis, n_cols, max_iter):
    """Minimise the objective held in the last row of ``T`` (reduced costs).

    Bland's rule: entering column is the lowest index with a negative reduced
    cost, leaving row is the lowest basis index among ratio-test ties.
    """
    it = 0
    m = T.shape[0] - 1
    while it < max_iter:
        cost = T[-1, :n_cols]
        enter = next((j for j in range(n_cols) if cost[j] < -TOL), None)
        if enter is None:
            return "optimal", it
        col = T[:m, enter]
        best = None
        for i in range(m):
            if col[i] > TOL:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best[0] - TOL or (
                        abs(ratio - best[0]) <= TOL and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", it
        _pivot(T, best[1], enter)
        basis[best[1]] = enter
        it += 1
    raise RuntimeError("simplex iteration limit reached")


def linprog(c: Sequence[float], A_ub=None, b_ub=None, A_eq=None, b_eq=None,
            bounds=None, max_iter: int = 500) -> LPResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x == b_eq``.

    ``bounds`` is a list of ``(lo, hi)`` pairs, ``None`` meaning unbounded;
    the default leaves every variable free.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    bounds = [(None, None)] * n if bounds is None else list(bounds)

    # x = offset + M y with y >= 0
    cols = []  # (var index, sign)
    offset = np.zeros(n)
    extra_ub = []
    for j, (lo, hi) in enumerate(bounds):
        if lo is not None:
            offset[j] = lo
            cols.append((j, 1.0))
            if hi is not None:
                extra_ub.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    M = np.zeros((n, ny))
    for k, (j, sg) in enumerate(cols):
        M[j, k] = sg

    Aub = A_ub @ M
    bub = b_ub - A_ub @ offset
    if extra_ub:
        rows = np.zeros((len(extra_ub), ny))
        for r, (k, ub) in enumerate(extra_ub):
            rows[r, k] = 1.0
        Aub = np.vstack([Aub, rows])
        bub = np.concatenate([bub, [ub for _, ub in extra_ub]])
    Aeq = A_eq @ M
    beq = b_eq - A_eq @ offset
    cy = c @ M

    m_ub, m_eq = len(bub), len(beq)
    m = m_ub + m_eq
    n_slack = m_ub
    # rows: [Aub | I] y,s = bub ; [Aeq | 0] = beq
    A = np.zeros((m, ny + n_slack))
    b = np.zeros(m)
    A[:m_ub, :ny] = Aub
    A[:m_ub, ny:] = np.eye(m_ub)
    A[m_ub:, :ny] = Aeq
    b[:m_ub] = bub
    b[m_ub:] = beq
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    n_main = ny + n_slack
    basis = [-1] * m
    art_rows = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis[i] = ny + i
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    ntot = n_main + n_art
    T = np.zeros((m + 1, ntot + 1))
    T[:m, :n_main] = A
    T[:m, -1] = b
    for a, i in enumerate(art_rows):
        T[i, n_main + a] = 1.0
        basis[i] = n_main + a
    iters = 0
    if n_art:
        T[-1, n_main:ntot] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status, it = _simplex(T, basis, ntot, max_iter)
        iters += it
        if -T[-1, -1] > 1e-8 * (1.0 + np.max(np.abs(b), initial=0.0)):
            return LPResult("infeasible", None, None, iters)
        # drive remaining artificials out of the basis
        for i in range(m):
            if basis[i] >= n_main:
                k = next((j for j in range(n_main) if abs(T[i, j]) > TOL), None)
                if k is not None:
                    _pivot(T, i, k)
                    basis[i] = k
        T = np.delete(T, np.s_[n_main:ntot], axis=1)
        keep = [i for i in range(m) if basis[i] < n_main]
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
    # phase 2 objective
    T[-1] = 0.0
    T[-1, :ny] = cy
    for i, k in enumerate(basis):
        if T[-1, k] != 0.0:
            T[-1] -= T[-1, k] * T[i]
    status, it = _simplex(T, basis, n_main, max_iter)
    iters += it
    if status == "unbounded":
        return LPResult("unbounded", None, None, iters)
    y = np.zeros(n_main)
    for i, k in enumerate(basis):
        y[k] = T[i, -1]
    x = offset + M @ y[:ny]
    return LPResult("optimal", x, float(c @ x), iters)

"""Dense bounded-variable primal simplex with Bland's rule.

Solves  min c^T x  s.t.  A x (<=,=,>=) b,  lo <= x <= hi  on a full tableau.
Each row receives a slack (bounded [0, inf) for inequalities, [0, 0] for
equalities); phase 1 adds artificials only for rows whose slack cannot start
basic. Sizes targeted: up to a few hundred columns.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np

from ..model import Sense

PIVOT_TOL = 1e-9


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time_limit"  # stopped in phase 1, no feasible point
    FEASIBLE_LIMIT = "feasible_limit"  # stopped in phase 2 with a feasible point
    ERROR = "error"


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = math.nan
    iterations: int = 0


class _Tableau:
    def __init__(self, T, beta, basis, x, lo, hi):
        self.T = T
        self.beta = beta
        self.basis = basis
        self.x = x
        self.lo = lo
        self.hi = hi
        self.is_basic = np.zeros(len(lo), dtype=bool)
        self.is_basic[basis] = True


def _iterate(tab: _Tableau, cost: np.ndarray, tol: float, deadline: float | None, max_iter: int):
    """Run primal simplex on ``tab`` for ``cost``; return (status, iterations)."""
    T, lo, hi = tab.T, tab.lo, tab.hi
    m = T.shape[0]
    it = 0
    while True:
        if it >= max_iter or (deadline is not None and (it & 15) == 0 and time.perf_counter() > deadline):
            return "limit", it
        cb = cost[tab.basis]
        d = cost - cb @ T if m else cost.copy()
        x = tab.x
        can_up = (~tab.is_basic) & (d < -tol) & (x < hi - tol)
        can_dn = (~tab.is_basic) & (d > tol) & (x > lo + tol)
        cand = np.flatnonzero(can_up | can_dn)
        if cand.size == 0:
            return "optimal", it
        j = int(cand[0])  # Bland: lowest eligible index
        direction = 1.0 if can_up[j] else -1.0

        col = T[:, j] * direction  # basic values move by -col * theta
        theta = hi[j] - lo[j]
        leave = -1
        leave_to_upper = False
        if m:
            bidx = tab.basis
            pos = col > PIVOT_TOL
            neg = col < -PIVOT_TOL
            ratios = np.full(m, math.inf)
            ratios[pos] = (tab.beta[pos] - lo[bidx[pos]]) / col[pos]
            ratios[neg] = (hi[bidx[neg]] - tab.beta[neg]) / (-col[neg])
            ratios = np.maximum(ratios, 0.0)
            rmin = ratios.min()
            if rmin < theta - 1e-12 or (rmin <= theta and math.isinf(theta)):
                ties = np.flatnonzero(ratios <= rmin + 1e-12)
                # Bland: among tied rows leave the lowest-indexed basic variable
                r = int(ties[np.argmin(bidx[ties])])
                leave = r
                leave_to_upper = bool(neg[r])
                theta = rmin
        if math.isinf(theta):
            return "unbounded", it

        if leave < 0:
            # bound flip
            tab.x[j] += direction * theta
            if m:
                tab.beta -= col * theta
        else:
            r = leave
            tab.beta -= col * theta
            entering_val = tab.x[j] + direction * theta
            lv = tab.basis[r]
            tab.x[lv] = hi[lv] if leave_to_upper else lo[lv]
            tab.is_basic[lv] = False
            piv = T[r, j]
            T[r, :] /= piv
            factors = T[:, j].copy()
            factors[r] = 0.0
            T -= np.outer(factors, T[r, :])
            T[:, j] = 0.0
            T[r, j] = 1.0
            tab.beta[r] = entering_val
            tab.basis[r] = j
            tab.is_basic[j] = True
            tab.x[j] = entering_val
        it += 1


def solve_lp_arrays(
    c: np.ndarray,
    A: np.ndarray,
    senses,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    time_limit: float | None = None,
    tol: float = 1e-7,
    max_iter: int = 100000,
) -> LpResult:
    """Minimise ``c @ x`` over rows ``A x ? b`` and box ``[lo, hi]``."""
    start = time.perf_counter()
    deadline = None if time_limit is None else start + time_limit
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, len(c))
    b = np.asarray(b, float)
    m, n = A.shape
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if np.any(lo > hi + tol):
        return LpResult(LpStatus.INFEASIBLE)

    # Columns: structural | slacks | artificials.  Row k: a_k x + sgn_k s_k = b_k.
    slack_sign = np.array([1.0 if s is Sense.LE else (-1.0 if s is Sense.GE else 1.0) for s in senses])
    s_lo = np.zeros(m)
    s_hi = np.array([0.0 if s is Sense.EQ else math.inf for s in senses])

    x0 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    resid = b - A @ x0 if m else np.zeros(0)

    # Slack can start basic if resid/sign lies within the slack bounds.
    slack_val = resid * slack_sign
    slack_ok = (slack_val >= -tol) & (slack_val <= s_hi + tol)
    art_rows = np.flatnonzero(~slack_ok)
    na = len(art_rows)
    N = n + m + na

    full = np.zeros((m, N))
    full[:, :n] = A
    full[np.arange(m), n + np.arange(m)] = slack_sign
    art_sign = np.sign(resid[art_rows])
    art_sign[art_sign == 0] = 1.0
    full[art_rows, n + m + np.arange(na)] = art_sign

    lo_all = np.concatenate([lo, s_lo, np.zeros(na)])
    hi_all = np.concatenate([hi, s_hi, np.full(na, math.inf)])
    x_all = np.concatenate([x0, np.zeros(m), np.zeros(na)])

    basis = np.empty(m, dtype=int)
    beta = np.empty(m)
    for k in range(m):
        if slack_ok[k]:
            basis[k] = n + k
            beta[k] = min(max(slack_val[k], 0.0), s_hi[k])
    for a, k in enumerate(art_rows):
        basis[k] = n + m + a
        beta[k] = abs(resid[k])
    # B is diagonal with entries full[k, basis[k]] = +/-1
    diag = full[np.arange(m), basis] if m else np.zeros(0)
    T = full / diag[:, None] if m else full
    x_all[basis] = beta
    tab = _Tableau(T, beta.copy(), basis, x_all, lo_all, hi_all)

    iters = 0
    if na:
        cost1 = np.zeros(N)
        cost1[n + m:] = 1.0
        status, k = _iterate(tab, cost1, tol * 1e-2, deadline, max_iter)
        iters += k
        if status == "limit":
            return LpResult(LpStatus.TIME_LIMIT, iterations=iters)
        tab.x[tab.basis] = tab.beta
        infeas = float(np.sum(tab.x[n + m:]))
        if infeas > tol:
            return LpResult(LpStatus.INFEASIBLE, iterations=iters)
        # Pin artificials at zero for phase 2.
        tab.hi[n + m:] = 0.0
        tab.x[n + m:] = np.where(tab.is_basic[n + m:], tab.x[n + m:], 0.0)

    cost2 = np.zeros(N)
    cost2[:n] = c
    status, k = _iterate(tab, cost2, tol * 1e-2, deadline, max_iter - iters)
    iters += k
    if status == "unbounded":
        return LpResult(LpStatus.UNBOUNDED, iterations=iters)

    x_all = tab.x.copy()
    x_all[tab.basis] = tab.beta
    # Recompute basic values from the original columns to shed pivoting drift.
    if m:
        B = full[:, tab.basis]
        nonbasic = ~tab.is_basic
        try:
            xb = np.linalg.solve(B, b - full[:, nonbasic] @ x_all[nonbasic])
            x_all[tab.basis] = xb
        except np.linalg.LinAlgError:
            pass
    x = x_all[:n]
    # Snap tiny bound excursions.
    x = np.minimum(np.maximum(x, lo), hi)
    if m:
        act = A @ x
        viol = np.where(slack_sign > 0, act - b, b - act)
        viol = np.where(np.array([s is Sense.EQ for s in senses]), np.abs(act - b), viol)
        if np.max(viol, initial=0.0) > max(tol, 1e-6) * (1 + np.max(np.abs(b), initial=0.0)):
            return LpResult(LpStatus.ERROR, iterations=iters)
    obj = float(c @ x)
    if status == "limit":
        return LpResult(LpStatus.FEASIBLE_LIMIT, x, obj, iters)
    return LpResult(LpStatus.OPTIMAL, x, obj, iters)

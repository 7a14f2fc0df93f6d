"""Desk-scale reference backend: LP-based branch-and-bound plus an enumeration oracle."""
from __future__ import annotations

import heapq
import itertools
import math
import time
from typing import Optional

import numpy as np

from ..model import MipModel, Solution, SolutionKind
from .base import BackendConfig, Observer, SolveOutcome, SolveStatus
from .simplex import LpStatus, solve_lp_arrays

_LP_STATUS = {
    LpStatus.OPTIMAL: SolveStatus.OPTIMAL,
    LpStatus.INFEASIBLE: SolveStatus.INFEASIBLE,
    LpStatus.UNBOUNDED: SolveStatus.UNBOUNDED,
    LpStatus.TIME_LIMIT: SolveStatus.NO_SOLUTION_LIMIT,
    LpStatus.FEASIBLE_LIMIT: SolveStatus.FEASIBLE_LIMIT,
    LpStatus.ERROR: SolveStatus.ERROR,
}

PRUNE_TOL = 1e-9


class ReferenceBackend:
    """Branch on the most fractional variable, explore best-bound first (deepest on ties).

    Every node LP solution and every improving incumbent is forwarded to the
    observer, which is what makes probing observable without an external solver.
    """

    def __init__(self, cfg: Optional[BackendConfig] = None):
        self.cfg = cfg or BackendConfig()

    def solve_lp(self, model: MipModel, cfg: Optional[BackendConfig] = None) -> SolveOutcome:
        cfg = cfg or self.cfg
        t0 = time.perf_counter()
        try:
            res = solve_lp_arrays(model.c, model.A, model.senses, model.rhs, model.lower, model.upper,
                                  time_limit=cfg.time_limit, tol=cfg.lp_tol)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError):
            return SolveOutcome(SolveStatus.ERROR, runtime=time.perf_counter() - t0)
        runtime = time.perf_counter() - t0
        status = _LP_STATUS[res.status]
        if res.x is None or not status.has_solution:
            return SolveOutcome(status, runtime=runtime)
        obj = res.objective + model.obj_offset
        x = res.x
        kind = SolutionKind.FRACTIONAL
        if model.integral_mask.any():
            xi = x[model.integral_mask]
            if np.all(np.abs(xi - np.round(xi)) <= cfg.integrality_tol):
                kind = SolutionKind.FEASIBLE
        else:
            kind = SolutionKind.FEASIBLE
        sol = Solution(x, obj, kind, runtime)
        bound = obj if status is SolveStatus.OPTIMAL else -math.inf
        return SolveOutcome(status, sol, bound, [sol], runtime)

    def solve_mip(self, model: MipModel, warm_start: Optional[Solution] = None,
                  cfg: Optional[BackendConfig] = None, observer: Optional[Observer] = None) -> SolveOutcome:
        cfg = cfg or self.cfg
        t0 = time.perf_counter()
        deadline = t0 + cfg.time_limit
        observed: list[Solution] = []

        def emit(values, obj, kind):
            sol = Solution(values, obj, kind, time.perf_counter() - t0)
            observed.append(sol)
            if observer is not None:
                observer(sol)
            return sol

        c, A, senses, b = model.c, model.A, model.senses, model.rhs
        integral = model.integral_mask
        int_idx = np.flatnonzero(integral)
        lo0 = model.lower.copy()
        hi0 = model.upper.copy()
        lo0[integral] = np.ceil(lo0[integral] - cfg.integrality_tol)
        hi0[integral] = np.floor(hi0[integral] + cfg.integrality_tol)

        best: Optional[Solution] = None
        inc_obj = math.inf
        if warm_start is not None and len(warm_start) == model.n_vars:
            vals = np.array(warm_start.values, dtype=float)
            vals[integral] = np.round(vals[integral])
            if model.is_feasible(vals, cfg.integrality_tol):
                inc_obj = model.objective(vals)
                best = emit(vals, inc_obj, SolutionKind.FEASIBLE)

        if np.any(lo0 > hi0):
            return SolveOutcome(SolveStatus.INFEASIBLE, None, math.inf, observed, time.perf_counter() - t0)

        counter = itertools.count()
        heap = [(-math.inf, 0, next(counter), lo0, hi0)]
        nodes = 0
        interrupted_bound = None
        root_status = None
        while heap:
            if time.perf_counter() >= deadline or (cfg.node_limit is not None and nodes >= cfg.node_limit):
                break
            key, negdepth, _, lo, hi = heapq.heappop(heap)
            if key >= inc_obj - PRUNE_TOL:
                continue
            try:
                res = solve_lp_arrays(c, A, senses, b, lo, hi, time_limit=max(deadline - time.perf_counter(), 1e-3),
                                      tol=cfg.lp_tol)
            except (FloatingPointError, np.linalg.LinAlgError, ValueError):
                res = None
            nodes += 1
            if res is None or res.status is LpStatus.ERROR:
                if nodes == 1:
                    root_status = SolveStatus.ERROR
                    break
                continue
            if res.status in (LpStatus.TIME_LIMIT, LpStatus.FEASIBLE_LIMIT):
                interrupted_bound = key
                break
            if res.status is LpStatus.INFEASIBLE:
                continue
            if res.status is LpStatus.UNBOUNDED:
                root_status = SolveStatus.UNBOUNDED
                break
            x = res.x
            obj = res.objective + model.obj_offset
            emit(x, obj, SolutionKind.FRACTIONAL)
            if obj >= inc_obj - PRUNE_TOL:
                continue
            xi = x[int_idx]
            frac = np.abs(xi - np.round(xi))
            if frac.size == 0 or frac.max() <= cfg.integrality_tol:
                vals = x.copy()
                vals[int_idx] = np.round(xi)
                if model.is_feasible(vals, 1e-6):
                    val = model.objective(vals)
                    if val < inc_obj - PRUNE_TOL:
                        inc_obj = val
                        best = emit(vals, val, SolutionKind.FEASIBLE)
                continue
            if cfg.rounding:
                for vals in _roundings(x, int_idx, lo, hi):
                    if model.is_feasible(vals, 1e-6):
                        val = model.objective(vals)
                        if val < inc_obj - PRUNE_TOL:
                            inc_obj = val
                            best = emit(vals, val, SolutionKind.FEASIBLE)
            # most fractional; argmax returns the lowest index on ties
            j = int(int_idx[int(np.argmax(np.minimum(xi - np.floor(xi), np.ceil(xi) - xi)))])
            depth = -negdepth + 1
            down_hi = hi.copy()
            down_hi[j] = math.floor(x[j])
            up_lo = lo.copy()
            up_lo[j] = math.ceil(x[j])
            heapq.heappush(heap, (obj, -depth, next(counter), lo, down_hi))
            heapq.heappush(heap, (obj, -depth, next(counter), up_lo, hi))

        runtime = time.perf_counter() - t0
        if root_status is SolveStatus.UNBOUNDED:
            return SolveOutcome(SolveStatus.UNBOUNDED, best, -math.inf, observed, runtime, nodes)
        if root_status is SolveStatus.ERROR:
            return SolveOutcome(SolveStatus.ERROR, best, -math.inf, observed, runtime, nodes)
        open_keys = [k for k, *_ in heap if k < inc_obj - PRUNE_TOL]
        if interrupted_bound is not None:
            open_keys.append(interrupted_bound)
        if open_keys:
            bound = min(min(open_keys), inc_obj)
            status = SolveStatus.FEASIBLE_LIMIT if best is not None else SolveStatus.NO_SOLUTION_LIMIT
        else:
            bound = inc_obj
            status = SolveStatus.OPTIMAL if best is not None else SolveStatus.INFEASIBLE
        return SolveOutcome(status, best, bound, observed, runtime, nodes)


def _roundings(x, int_idx, lo, hi):
    """Nearest, down and up roundings of the integer part, within node bounds."""
    for fn in (np.round, np.floor, np.ceil):
        vals = x.copy()
        vals[int_idx] = np.clip(fn(x[int_idx]), lo[int_idx], hi[int_idx])
        yield vals


def enumerate_oracle(model: MipModel, max_binaries: int = 20, chunk: int = 1 << 15) -> SolveOutcome:
    """Exact optimum of a pure-binary model by checking all 2^n assignments."""
    n = model.n_vars
    if not model.is_pure_binary():
        raise ValueError("enumeration oracle requires a pure-binary model")
    if n > max_binaries:
        raise ValueError(f"enumeration oracle limited to {max_binaries} binaries, got {n}")
    t0 = time.perf_counter()
    c, A, b = model.c, model.A, model.rhs
    le = np.array([s.value == "L" for s in model.senses], dtype=bool)
    ge = np.array([s.value == "G" for s in model.senses], dtype=bool)
    eq = ~(le | ge)
    lo, hi = model.lower, model.upper
    shifts = np.arange(n, dtype=np.int64)
    best_obj, best_x = math.inf, None
    total = 1 << n
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = ((ids[:, None] >> shifts) & 1).astype(float)
        ok = np.all((X >= lo - 1e-9) & (X <= hi + 1e-9), axis=1)
        if A.shape[0]:
            act = X @ A.T
            d = act - b
            ok &= np.all(~le | (d <= 1e-6), axis=1)
            ok &= np.all(~ge | (d >= -1e-6), axis=1)
            ok &= np.all(~eq | (np.abs(d) <= 1e-6), axis=1)
        if not ok.any():
            continue
        objs = X @ c
        objs[~ok] = math.inf
        k = int(np.argmin(objs))
        if objs[k] < best_obj - PRUNE_TOL:
            best_obj, best_x = float(objs[k]), X[k]
    runtime = time.perf_counter() - t0
    if best_x is None:
        return SolveOutcome(SolveStatus.INFEASIBLE, None, math.inf, [], runtime)
    sol = model.make_solution(best_x, SolutionKind.FEASIBLE, runtime)
    return SolveOutcome(SolveStatus.OPTIMAL, sol, sol.objective, [sol], runtime)

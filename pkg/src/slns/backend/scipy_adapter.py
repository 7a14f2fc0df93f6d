"""Adapter wiring SciPy's HiGHS bindings to the backend contract.

``scipy.optimize.milp`` exposes neither callbacks nor warm starts, so the
observer only sees the final incumbent and the hint is ignored. It exists to
show the adapter shape and to cross-check the reference backend; nothing in
the pipeline depends on it.
"""
from __future__ import annotations

import math
import time
from typing import Optional

import numpy as np
from scipy.optimize import Bounds, LinearConstraint as ScipyRows, linprog, milp

from ..model import MipModel, Sense, Solution, SolutionKind
from .base import BackendConfig, Observer, SolveOutcome, SolveStatus


def _row_bounds(model: MipModel):
    lo = np.full(model.n_rows, -np.inf)
    hi = np.full(model.n_rows, np.inf)
    for k, s in enumerate(model.senses):
        if s is not Sense.GE:
            hi[k] = model.rhs[k]
        if s is not Sense.LE:
            lo[k] = model.rhs[k]
    return lo, hi


class ScipyBackend:
    def __init__(self, cfg: Optional[BackendConfig] = None):
        self.cfg = cfg or BackendConfig()

    def solve_mip(self, model, warm_start=None, cfg=None, observer: Optional[Observer] = None) -> SolveOutcome:
        cfg = cfg or self.cfg
        t0 = time.perf_counter()
        cons = []
        if model.n_rows:
            lo, hi = _row_bounds(model)
            cons.append(ScipyRows(model.A, lo, hi))
        res = milp(model.c, constraints=cons, integrality=model.integral_mask.astype(int),
                   bounds=Bounds(model.lower, model.upper),
                   options={"time_limit": cfg.time_limit, "mip_rel_gap": 0.0})
        runtime = time.perf_counter() - t0
        if res.x is None:
            status = {2: SolveStatus.INFEASIBLE, 3: SolveStatus.UNBOUNDED, 1: SolveStatus.NO_SOLUTION_LIMIT}.get(
                res.status, SolveStatus.ERROR)
            return SolveOutcome(status, runtime=runtime)
        x = np.array(res.x)
        x[model.integral_mask] = np.round(x[model.integral_mask])
        sol = Solution(x, model.objective(x), SolutionKind.FEASIBLE, runtime)
        if observer is not None:
            observer(sol)
        status = SolveStatus.OPTIMAL if res.status == 0 else SolveStatus.FEASIBLE_LIMIT
        bound = getattr(res, "mip_dual_bound", None)
        bound = sol.objective if status is SolveStatus.OPTIMAL or bound is None else bound + model.obj_offset
        return SolveOutcome(status, sol, min(bound, sol.objective), [sol], runtime)

    def solve_lp(self, model, cfg=None) -> SolveOutcome:
        cfg = cfg or self.cfg
        t0 = time.perf_counter()
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for k, s in enumerate(model.senses):
            row, b = model.A[k], model.rhs[k]
            if s is Sense.LE:
                ub_rows.append(row), ub_rhs.append(b)
            elif s is Sense.GE:
                ub_rows.append(-row), ub_rhs.append(-b)
            else:
                eq_rows.append(row), eq_rhs.append(b)
        res = linprog(model.c,
                      A_ub=np.array(ub_rows) if ub_rows else None, b_ub=ub_rhs or None,
                      A_eq=np.array(eq_rows) if eq_rows else None, b_eq=eq_rhs or None,
                      bounds=list(zip(model.lower, model.upper)), method="highs",
                      options={"time_limit": cfg.time_limit})
        runtime = time.perf_counter() - t0
        if res.status == 0:
            sol = Solution(res.x, model.objective(res.x), SolutionKind.FRACTIONAL, runtime)
            return SolveOutcome(SolveStatus.OPTIMAL, sol, sol.objective, [sol], runtime)
        status = {1: SolveStatus.NO_SOLUTION_LIMIT, 2: SolveStatus.INFEASIBLE, 3: SolveStatus.UNBOUNDED}.get(
            res.status, SolveStatus.ERROR)
        return SolveOutcome(status, runtime=runtime, bound=-math.inf)

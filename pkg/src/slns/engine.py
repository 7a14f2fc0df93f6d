"""The destroy/repair loop with an adaptive fixing ratio and greedy acceptance."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .backend.base import Backend, BackendConfig, SolveStatus
from .model import MipModel, Solution, SolutionKind, apply_cut, fixing_counts, relax
from .policies import Policy, PolicyContext, PolicyError, PolicyExhausted, make_policy, random_policy

log = logging.getLogger(__name__)

IMPROVE_TOL = 1e-9


@dataclass(frozen=True)
class EngineConfig:
    total_budget: float = 600.0
    iter_budget: float = 20.0
    initial_ratio: float = 0.2
    scale: float = 1.5
    r_min: float = 0.01
    r_max: float = 0.9
    fallback_after: int = 2
    # Desk-scale determinism knobs: stop after this many iterations, and cap B&B nodes per sub-solve.
    max_iterations: Optional[int] = None
    node_limit: Optional[int] = None
    pool_size: int = 10

    def __post_init__(self):
        if not 0 < self.r_min <= self.initial_ratio <= self.r_max < 1:
            raise ValueError("need 0 < r_min <= initial_ratio <= r_max < 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass
class NeighbourhoodSizeManager:
    ratio: float = 0.2
    scale: float = 1.5
    r_min: float = 0.01
    r_max: float = 0.9

    @classmethod
    def from_config(cls, cfg: EngineConfig) -> "NeighbourhoodSizeManager":
        return cls(cfg.initial_ratio, cfg.scale, cfg.r_min, cfg.r_max)

    def update(self, status: SolveStatus, improved: bool) -> float:
        self.ratio = update_ratio(self, status, improved)
        return self.ratio


def update_ratio(manager: NeighbourhoodSizeManager, status: SolveStatus, improved: bool) -> float:
    """Shrink the fixed share after easy sub-problems, grow it after fruitless hard ones."""
    r = manager.ratio
    if status in (SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE):
        return max(r / (1.0 + manager.scale), manager.r_min)
    if status in (SolveStatus.FEASIBLE_LIMIT, SolveStatus.NO_SOLUTION_LIMIT) and not improved:
        return min(r * (1.0 + manager.scale), manager.r_max)
    return r


def update_solution(current: Solution, candidate: Optional[Solution]) -> Solution:
    if candidate is not None and candidate.objective < current.objective - IMPROVE_TOL:
        return candidate
    return current


@dataclass
class IterationRecord:
    index: int
    ratio_used: float
    policy_used: str
    fallback: bool
    status: str
    objective_after: float
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchState:
    incumbent: Solution
    rng: np.random.Generator
    iteration: int = 0
    elapsed: float = 0.0
    non_improving: int = 0
    history: list[IterationRecord] = field(default_factory=list)

    @property
    def best_objective(self) -> float:
        return self.incumbent.objective


def should_fallback(state: SearchState, threshold: int) -> bool:
    return state.non_improving >= threshold


def write_history(records: Iterable[IterationRecord], path) -> None:
    """One JSON object per line, fields exactly as in :class:`IterationRecord`."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def read_history(path) -> list[IterationRecord]:
    return [IterationRecord(**json.loads(line)) for line in Path(path).read_text().splitlines() if line.strip()]


def _add_to_pool(pool: list[Solution], sol: Solution, model: MipModel, size: int) -> None:
    b = model.binary_indices
    key = np.round(sol.values[b])
    for other in pool:
        if np.array_equal(np.round(other.values[b]), key) and abs(other.objective - sol.objective) < 1e-9:
            return
    pool.append(sol)
    pool.sort(key=lambda s: s.objective)
    del pool[size:]


def run(
    problem: MipModel,
    x0: Solution,
    policy: Policy | str,
    backend: Backend,
    cfg: EngineConfig = EngineConfig(),
    manager: Optional[NeighbourhoodSizeManager] = None,
    *,
    seed: int | np.random.Generator = 0,
    predictions=None,
    oracle_labels=None,
    root_relaxation: Optional[Solution] = None,
    pool: Iterable[Solution] = (),
) -> tuple[Solution, list[IterationRecord]]:
    """Improve ``x0`` by repeatedly fixing part of the binaries and re-solving the rest.

    Returns the best feasible solution found and the per-iteration history.
    """
    t0 = time.perf_counter()
    if len(x0) != problem.n_vars or not problem.is_feasible(x0.values):
        raise ValueError("initial solution is not feasible for the problem")
    if isinstance(policy, str):
        policy = make_policy(policy)
    manager = manager or NeighbourhoodSizeManager.from_config(cfg)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = SearchState(incumbent=x0, rng=rng)
    if cfg.total_budget <= 0:
        return x0, state.history

    if root_relaxation is None and policy.needs_relaxation:
        lp = backend.solve_lp(relax(problem), BackendConfig(time_limit=max(min(cfg.iter_budget, cfg.total_budget), 1e-3)))
        if lp.best is not None and lp.status is SolveStatus.OPTIMAL:
            root_relaxation = lp.best
    ctx = PolicyContext(problem, x0, rng, root_relaxation=root_relaxation, pool=[x0],
                        predictions=predictions, oracle_labels=oracle_labels, lp_backend=backend,
                        lp_time_limit=min(5.0, cfg.iter_budget))
    for sol in pool:
        _add_to_pool(ctx.pool, sol, problem, cfg.pool_size)
    nb = len(problem.binary_indices)

    while True:
        state.elapsed = time.perf_counter() - t0
        remaining = cfg.total_budget - state.elapsed
        if remaining <= 0 or (cfg.max_iterations is not None and state.iteration >= cfg.max_iterations):
            break
        ratio = manager.ratio
        _, k_f = fixing_counts(nb, ratio)
        ctx.incumbent = state.incumbent
        fallback = should_fallback(state, cfg.fallback_after)
        used = "random" if fallback else policy.name
        try:
            cut = random_policy(ctx, k_f) if fallback else policy(ctx, ratio, k_f)
        except PolicyExhausted:
            log.info("policy %s exhausted after %d iterations", policy.name, state.iteration)
            break
        except PolicyError as err:
            log.debug("policy %s failed (%s); falling back to random", policy.name, err)
            fallback, used = True, "random"
            cut = random_policy(ctx, k_f)

        sub = apply_cut(problem, cut)
        sub_cfg = BackendConfig(time_limit=max(min(cfg.iter_budget, remaining), 1e-3),
                                seed=int(rng.integers(2**31 - 1)), node_limit=cfg.node_limit)
        outcome = backend.solve_mip(sub, warm_start=state.incumbent, cfg=sub_cfg)
        state.iteration += 1

        if outcome.status is SolveStatus.ERROR:
            state.history.append(IterationRecord(state.iteration, ratio, used, fallback, outcome.status.value,
                                                 state.incumbent.objective, time.perf_counter() - t0))
            continue

        for sol in outcome.observed:
            if sol.kind is SolutionKind.FEASIBLE:
                _add_to_pool(ctx.pool, sol, problem, cfg.pool_size)
        candidate = outcome.best
        if candidate is not None:
            # Sub-problem solutions are re-evaluated on the original problem.
            candidate = Solution(candidate.values, problem.objective(candidate.values), SolutionKind.FEASIBLE,
                                 time.perf_counter() - t0)
        new = update_solution(state.incumbent, candidate)
        improved = new is not state.incumbent
        state.incumbent = new
        manager.update(outcome.status, improved)
        if improved or fallback:
            state.non_improving = 0
        else:
            state.non_improving += 1
        state.history.append(IterationRecord(state.iteration, ratio, used, fallback, outcome.status.value,
                                             state.incumbent.objective, time.perf_counter() - t0))
    state.elapsed = time.perf_counter() - t0
    return state.incumbent, state.history


def trajectory_events(x0: Solution, history: Iterable[IterationRecord], start: float = 0.0) -> list[tuple[float, float]]:
    """Incumbent improvements as ``(time, objective)`` pairs, starting with ``x0`` at ``start``."""
    events = [(start, x0.objective)]
    for rec in history:
        if rec.objective_after < events[-1][1] - IMPROVE_TOL:
            t = max(start + rec.wall_time, events[-1][0] + 1e-9)
            events.append((t, rec.objective_after))
    return events

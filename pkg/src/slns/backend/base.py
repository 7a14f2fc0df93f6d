"""Solver contract shared by the reference backend and third-party adapters.

An adapter is any object exposing::

    solve_mip(model, warm_start=None, cfg=None, observer=None) -> SolveOutcome
    solve_lp(model, cfg=None) -> SolveOutcome

``cfg.time_limit`` bounds wall time, ``cfg.seed`` is forwarded to the solver,
``warm_start`` is a hint (ignored if infeasible), and ``observer`` must be called
on the solving thread with every new incumbent (``SolutionKind.FEASIBLE``) and,
where the solver exposes them, node relaxation solutions
(``SolutionKind.FRACTIONAL``), each stamped with its time offset.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol

from ..model import MipModel, Solution

Observer = Callable[[Solution], None]


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE_LIMIT = "FeasibleLimit"
    INFEASIBLE = "Infeasible"
    NO_SOLUTION_LIMIT = "NoSolutionLimit"
    UNBOUNDED = "Unbounded"
    ERROR = "Error"

    @property
    def has_solution(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_LIMIT)


@dataclass(frozen=True)
class BackendConfig:
    time_limit: float = 60.0
    seed: int = 0
    integrality_tol: float = 1e-6
    lp_tol: float = 1e-7
    # Deterministic work limit for the reference backend (None = unlimited).
    node_limit: Optional[int] = None
    # Try nearest/floor/ceil roundings of each node LP solution.
    rounding: bool = True

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")

    def with_(self, **kw) -> "BackendConfig":
        return replace(self, **kw)


@dataclass
class SolveOutcome:
    status: SolveStatus
    best: Optional[Solution] = None
    bound: float = -math.inf
    observed: list[Solution] = field(default_factory=list)
    runtime: float = 0.0
    nodes: int = 0

    @property
    def objective(self) -> float:
        return self.best.objective if self.best is not None else math.inf

    @property
    def gap(self) -> float:
        """Relative optimality gap in percent (inf without a solution)."""
        if self.best is None:
            return math.inf
        if self.status is SolveStatus.OPTIMAL:
            return 0.0
        obj = self.best.objective
        return 100.0 * max(obj - self.bound, 0.0) / max(abs(obj), 1e-10)


class Backend(Protocol):
    def solve_mip(self, model: MipModel, warm_start: Optional[Solution] = None,
                  cfg: Optional[BackendConfig] = None, observer: Optional[Observer] = None) -> SolveOutcome: ...

    def solve_lp(self, model: MipModel, cfg: Optional[BackendConfig] = None) -> SolveOutcome: ...

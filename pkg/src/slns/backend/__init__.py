from .base import Backend, BackendConfig, Observer, SolveOutcome, SolveStatus
from .reference import ReferenceBackend, enumerate_oracle
from .simplex import LpResult, LpStatus, solve_lp_arrays

__all__ = [
    "Backend",
    "BackendConfig",
    "LpResult",
    "LpStatus",
    "Observer",
    "ReferenceBackend",
    "SolveOutcome",
    "SolveStatus",
    "enumerate_oracle",
    "solve_lp_arrays",
]

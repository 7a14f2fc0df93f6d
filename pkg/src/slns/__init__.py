"""Large neighbourhood search for MIPs with learned, sampled and classic destroy policies."""
from .backend import BackendConfig, ReferenceBackend, SolveOutcome, SolveStatus, enumerate_oracle
from .engine import EngineConfig, IterationRecord, NeighbourhoodSizeManager, run, update_ratio
from .model import (HardFix, LinearConstraint, MipModel, Sense, SoftLB, Solution, SolutionKind, Variable, VarKind,
                    apply_cut, fixing_counts)
from .mps import parse_mps, read_mps, write_mps
from .policies import POLICY_NAMES, make_policy

__version__ = "0.1.0"

"""In-memory mixed-integer programs, their relaxations, and neighbourhood cuts.

Everything here is minimisation-only. A :class:`MipModel` is immutable; every
transformation (:func:`relax`, :func:`apply_cut`) returns a new model.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

FEAS_TOL = 1e-6
INT_TOL = 1e-6


class VarKind(enum.Enum):
    BINARY = "B"
    INTEGER = "I"
    CONTINUOUS = "C"


class Sense(enum.Enum):
    LE = "L"
    EQ = "E"
    GE = "G"


class SolutionKind(enum.Enum):
    FEASIBLE = "feasible"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf
    obj_coeff: float = 0.0

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"variable {self.name}: lower {self.lower} > upper {self.upper}")
        # Binary bounds may be tightened by fixing, never widened past [0, 1].
        if self.kind is VarKind.BINARY and not (0.0 <= self.lower and self.upper <= 1.0):
            raise ValueError(f"binary variable {self.name} must have bounds within [0, 1]")


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float
    name: str = ""

    def __post_init__(self):
        idx = [i for i, _ in self.terms]
        if len(set(idx)) != len(idx):
            raise ValueError(f"constraint {self.name!r} has duplicate variable indices")
        object.__setattr__(self, "terms", tuple((int(i), float(a)) for i, a in self.terms))


@dataclass(frozen=True, eq=False)
class MipModel:
    """min c^T x + offset  s.t. rows, bounds, integrality."""

    name: str
    variables: tuple[Variable, ...]
    constraints: tuple[LinearConstraint, ...] = ()
    obj_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        n = len(self.variables)
        for k, con in enumerate(self.constraints):
            for i, _ in con.terms:
                if not 0 <= i < n:
                    raise ValueError(f"constraint {k} references variable {i} out of range")

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.constraints)

    @cached_property
    def binary_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind is VarKind.BINARY], dtype=int)

    @cached_property
    def integer_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind is VarKind.INTEGER], dtype=int)

    @cached_property
    def continuous_indices(self) -> np.ndarray:
        return np.array([i for i, v in enumerate(self.variables) if v.kind is VarKind.CONTINUOUS], dtype=int)

    @cached_property
    def integral_mask(self) -> np.ndarray:
        return np.array([v.kind is not VarKind.CONTINUOUS for v in self.variables], dtype=bool)

    @cached_property
    def c(self) -> np.ndarray:
        return np.array([v.obj_coeff for v in self.variables], dtype=float)

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    @cached_property
    def A(self) -> np.ndarray:
        """Dense constraint matrix, one row per constraint."""
        mat = np.zeros((self.n_rows, self.n_vars))
        for k, con in enumerate(self.constraints):
            for i, a in con.terms:
                mat[k, i] = a
        return mat

    @cached_property
    def rhs(self) -> np.ndarray:
        return np.array([con.rhs for con in self.constraints], dtype=float)

    @cached_property
    def senses(self) -> tuple[Sense, ...]:
        return tuple(con.sense for con in self.constraints)

    def is_pure_binary(self) -> bool:
        return len(self.binary_indices) == self.n_vars

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.obj_offset)

    def max_violation(self, x, integrality: bool = True) -> float:
        """Largest violation of bounds, rows, and (optionally) integrality."""
        x = np.asarray(x, dtype=float)
        viol = 0.0
        if self.n_vars:
            viol = max(viol, float(np.max(np.maximum(self.lower - x, 0.0), initial=0.0)))
            viol = max(viol, float(np.max(np.maximum(x - self.upper, 0.0), initial=0.0)))
            if integrality and self.integral_mask.any():
                xi = x[self.integral_mask]
                viol = max(viol, float(np.max(np.abs(xi - np.round(xi)))))
        if self.n_rows:
            act = self.A @ x
            for k, s in enumerate(self.senses):
                d = act[k] - self.rhs[k]
                if s is Sense.LE:
                    viol = max(viol, d)
                elif s is Sense.GE:
                    viol = max(viol, -d)
                else:
                    viol = max(viol, abs(d))
        return viol

    def is_feasible(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            return False
        return self.max_violation(x) <= tol

    def same_as(self, other: "MipModel") -> bool:
        """Field-by-field structural equality."""
        return (
            self.name == other.name
            and self.variables == other.variables
            and self.constraints == other.constraints
            and self.obj_offset == other.obj_offset
        )

    def make_solution(self, values, kind: SolutionKind = SolutionKind.FEASIBLE, time_offset: float = 0.0) -> "Solution":
        values = np.asarray(values, dtype=float)
        return Solution(values, self.objective(values), kind, time_offset)


@dataclass(frozen=True, eq=False)
class Solution:
    values: np.ndarray
    objective: float
    kind: SolutionKind = SolutionKind.FEASIBLE
    time_offset: float = 0.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "objective", float(self.objective))

    @property
    def is_feasible(self) -> bool:
        return self.kind is SolutionKind.FEASIBLE

    def __len__(self):
        return len(self.values)

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "objective": self.objective,
            "kind": self.kind.value,
            "time_offset": self.time_offset,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Solution":
        return cls(np.asarray(d["values"], dtype=float), d["objective"], SolutionKind(d["kind"]), d.get("time_offset", 0.0))


@dataclass(frozen=True)
class HardFix:
    """Fix each binary ``index`` to ``value`` (a fixing set)."""

    entries: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", {int(i): int(v) for i, v in dict(self.entries).items()})
        for v in self.entries.values():
            if v not in (0, 1):
                raise ValueError("fixing values must be 0 or 1")

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class SoftLB:
    """Local-branching ball of Hamming radius ``radius`` around ``reference`` on the binaries."""

    reference: Solution
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("local branching radius must be non-negative")


NeighbourhoodCut = Union[HardFix, SoftLB]


def relax(model: MipModel) -> MipModel:
    """Continuous relaxation; bounds, objective and rows are untouched."""
    if not model.integral_mask.any():
        return model
    variables = tuple(replace(v, kind=VarKind.CONTINUOUS) for v in model.variables)
    return MipModel(model.name, variables, model.constraints, model.obj_offset)


def fixing_counts(num_binaries: int, ratio: float) -> tuple[int, int]:
    """Return ``(k_d, k_f)``: how many binaries to destroy and to fix."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"fixing ratio must lie in [0, 1], got {ratio}")
    k_f = int(math.floor(num_binaries * ratio + 0.5))
    k_f = min(k_f, num_binaries)
    return num_binaries - k_f, k_f


def lb_row(model: MipModel, reference, radius: float, name: str = "local_branching") -> LinearConstraint:
    """Linearised distance row  sum_{x'_i=0} x_i - sum_{x'_i=1} x_i <= k - |{x'_i=1}|."""
    ref = np.asarray(reference.values if isinstance(reference, Solution) else reference, dtype=float)
    terms = []
    ones = 0
    for i in model.binary_indices:
        if round(ref[i]) >= 1:
            terms.append((int(i), -1.0))
            ones += 1
        else:
            terms.append((int(i), 1.0))
    return LinearConstraint(tuple(terms), Sense.LE, float(radius) - ones, name)


def lb_distance(model: MipModel, reference, x) -> float:
    """Value of the local-branching left-hand side for ``x`` around ``reference``."""
    ref = np.asarray(reference.values if isinstance(reference, Solution) else reference, dtype=float)
    x = np.asarray(x.values if isinstance(x, Solution) else x, dtype=float)
    b = model.binary_indices
    r = np.round(ref[b])
    return float(np.sum(x[b] * (1 - r) + (1 - x[b]) * r))


def _unique_name(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name, k = base, 1
    while name in taken:
        name = f"{base}_{k}"
        k += 1
    return name


def apply_cut(model: MipModel, cut: NeighbourhoodCut) -> MipModel:
    """Return the sub-problem obtained by adding ``cut`` to ``model``."""
    if isinstance(cut, HardFix):
        if not cut.entries:
            return model
        variables = list(model.variables)
        for i, val in cut.entries.items():
            if not 0 <= i < model.n_vars or variables[i].kind is not VarKind.BINARY:
                raise ValueError(f"fixing index {i} is not a binary variable")
            variables[i] = replace(variables[i], lower=float(val), upper=float(val))
        return MipModel(model.name, tuple(variables), model.constraints, model.obj_offset)
    if isinstance(cut, SoftLB):
        if len(cut.reference) != model.n_vars:
            raise ValueError("local branching reference has the wrong length")
        name = _unique_name("local_branching", (c.name for c in model.constraints))
        row = lb_row(model, cut.reference, cut.radius, name)
        return MipModel(model.name, model.variables, model.constraints + (row,), model.obj_offset)
    raise TypeError(f"unknown cut type {type(cut).__name__}")


def l1_distance(a, b, indices: Sequence[int] | None = None) -> float:
    av = np.asarray(a.values if isinstance(a, Solution) else a, dtype=float)
    bv = np.asarray(b.values if isinstance(b, Solution) else b, dtype=float)
    if av.shape != bv.shape:
        raise ValueError("solutions have different lengths")
    if indices is not None:
        idx = np.asarray(indices, dtype=int)
        av, bv = av[idx], bv[idx]
    return float(np.sum(np.abs(av - bv)))


def model_to_dict(model: MipModel) -> dict:
    """JSON-friendly dump (infinite bounds as strings)."""

    def num(x):
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

    return {
        "name": model.name,
        "obj_offset": model.obj_offset,
        "variables": [[v.name, v.kind.value, num(v.lower), num(v.upper), v.obj_coeff] for v in model.variables],
        "constraints": [[c.name, c.sense.value, c.rhs, [list(t) for t in c.terms]] for c in model.constraints],
    }


def model_from_dict(d: Mapping) -> MipModel:
    variables = [Variable(n, VarKind(k), float(lo), float(hi), float(c)) for n, k, lo, hi, c in d["variables"]]
    cons = [LinearConstraint(tuple((int(i), float(a)) for i, a in terms), Sense(s), float(rhs), name)
            for name, s, rhs, terms in d["constraints"]]
    return MipModel(d["name"], tuple(variables), tuple(cons), float(d.get("obj_offset", 0.0)))

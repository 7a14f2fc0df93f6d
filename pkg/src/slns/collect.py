"""Data collection before the search: a short probing solve and LP sampling under local-branching cuts."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .backend.base import Backend, BackendConfig, SolveStatus
from .model import MipModel, Solution, SolutionKind, SoftLB, apply_cut, l1_distance, relax

log = logging.getLogger(__name__)


class NoInitialSolution(RuntimeError):
    pass


@dataclass
class ProbeRecord:
    feasible: list[Solution]
    fractional: list[Solution]
    probe_time: float
    status: str = ""

    @property
    def best(self) -> Solution:
        if not self.feasible:
            raise NoInitialSolution("probing found no feasible solution")
        return self.feasible[0]

    def to_dict(self) -> dict:
        return {
            "feasible": [s.to_dict() for s in self.feasible],
            "fractional": [s.to_dict() for s in self.fractional],
            "probe_time": self.probe_time,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d) -> "ProbeRecord":
        return cls([Solution.from_dict(s) for s in d["feasible"]], [Solution.from_dict(s) for s in d["fractional"]],
                   d["probe_time"], d.get("status", ""))


@dataclass
class Sample:
    solution: Solution
    ratio: float
    status: SolveStatus
    radius: int


@dataclass
class SampleSet:
    samples: list[Sample] = field(default_factory=list)
    reference: Optional[Solution] = None
    elapsed: float = 0.0

    def __len__(self):
        return len(self.samples)

    @property
    def ratios(self) -> list[float]:
        return [s.ratio for s in self.samples]

    def to_dict(self) -> dict:
        return {
            "reference": self.reference.to_dict() if self.reference is not None else None,
            "samples": [{"solution": s.solution.to_dict(), "ratio": s.ratio, "status": s.status.value,
                         "radius": s.radius} for s in self.samples],
            "elapsed": self.elapsed,
        }

    @classmethod
    def from_dict(cls, d) -> "SampleSet":
        ref = Solution.from_dict(d["reference"]) if d.get("reference") else None
        samples = [Sample(Solution.from_dict(s["solution"]), s["ratio"], SolveStatus(s["status"]), s["radius"])
                   for s in d["samples"]]
        return cls(samples, ref, d.get("elapsed", 0.0))


def probe(problem: MipModel, backend: Backend, t_probe: float, node_limit: Optional[int] = None,
          seed: int = 0) -> ProbeRecord:
    """Run the MIP solver briefly and keep every incumbent and node relaxation it reports."""
    if t_probe <= 0:
        raise NoInitialSolution("probing budget is zero")
    feasible: list[Solution] = []
    fractional: list[Solution] = []

    def observer(sol: Solution):
        (feasible if sol.kind is SolutionKind.FEASIBLE else fractional).append(sol)

    out = backend.solve_mip(problem, cfg=BackendConfig(time_limit=t_probe, seed=seed, node_limit=node_limit),
                            observer=observer)
    feasible.sort(key=lambda s: s.objective)
    rec = ProbeRecord(feasible, fractional, out.runtime, out.status.value)
    if not feasible:
        raise NoInitialSolution(f"probing ended with {out.status.value} and no feasible solution")
    return rec


def spl(problem: MipModel, x0: Solution, backend: Backend, t_total: float = 60.0, per_solve: float = 5.0,
        seed: int | np.random.Generator = 0, max_samples: Optional[int] = None) -> SampleSet:
    """Collect LP solutions of the relaxation restricted to random-radius balls around ``x0``."""
    t0 = time.perf_counter()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    base = relax(problem)
    out = SampleSet(reference=x0)
    root = backend.solve_lp(base, BackendConfig(time_limit=max(min(per_solve, t_total), 1e-3)))
    if root.status is not SolveStatus.OPTIMAL or root.best is None:
        log.warning("root relaxation ended with %s; no samples collected", root.status.value)
        out.elapsed = time.perf_counter() - t0
        return out
    k_max = l1_distance(x0, root.best, problem.binary_indices)
    while time.perf_counter() - t0 < t_total and (max_samples is None or len(out) < max_samples):
        r = float(rng.random())
        radius = max(1, int(math.floor((1.0 - r) * k_max + 1e-9)))
        lp = apply_cut(base, SoftLB(x0, radius))
        limit = max(min(per_solve, t_total - (time.perf_counter() - t0)), 1e-3)
        res = backend.solve_lp(lp, BackendConfig(time_limit=limit))
        if res.status.has_solution and res.best is not None:
            sol = Solution(res.best.values, res.best.objective, SolutionKind.FRACTIONAL, time.perf_counter() - t0)
            out.samples.append(Sample(sol, r, res.status, radius))
    out.elapsed = time.perf_counter() - t0
    return out


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj.to_dict()))


def load_probe(path) -> ProbeRecord:
    return ProbeRecord.from_dict(json.loads(Path(path).read_text()))


def load_samples(path) -> SampleSet:
    return SampleSet.from_dict(json.loads(Path(path).read_text()))

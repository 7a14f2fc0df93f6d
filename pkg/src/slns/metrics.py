"""Primal gap, primal integral, shifted geometric mean and per-scenario tables."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

GAP_CAP = 100.0
QUANTILES = (0.1, 0.5, 0.9)


@dataclass
class Trajectory:
    events: list[tuple[float, float]]
    horizon: float

    def __post_init__(self):
        self.events = [(float(t), float(o)) for t, o in self.events]
        for (t1, o1), (t2, o2) in zip(self.events, self.events[1:]):
            if not (t2 > t1 and o2 < o1):
                raise ValueError("trajectory times must increase and objectives decrease")

    def to_dict(self) -> dict:
        return {"events": [list(e) for e in self.events], "horizon": self.horizon}

    @classmethod
    def from_dict(cls, d) -> "Trajectory":
        return cls([tuple(e) for e in d["events"]], d["horizon"])


def primal_gap(obj: Optional[float], best_known: float) -> float:
    """Percent distance to the best known objective, capped at 100 (100 without a solution)."""
    if obj is None or not math.isfinite(obj):
        return GAP_CAP
    if not math.isfinite(best_known):
        raise ValueError("best known objective must be finite")
    gap = 100.0 * abs(obj - best_known) / max(abs(best_known), 1e-10)
    return min(gap, GAP_CAP)


def primal_integral(traj: Trajectory, best_known: float) -> float:
    """Time-average of the step-function primal gap over ``[0, horizon]``, in percent."""
    if traj.horizon <= 0:
        raise ValueError("horizon must be positive")
    area = 0.0
    t_prev, gap_prev = 0.0, GAP_CAP
    for t, obj in traj.events:
        t = min(max(t, 0.0), traj.horizon)
        area += gap_prev * (t - t_prev)
        t_prev, gap_prev = t, primal_gap(obj, best_known)
    area += gap_prev * (traj.horizon - t_prev)
    return area / traj.horizon


def shifted_geomean(values: Iterable[float], shift: float = 1.0) -> float:
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("shifted geometric mean of an empty list")
    if np.any(v < 0):
        raise ValueError("values must be non-negative")
    return float(np.exp(np.mean(np.log(v + shift))) - shift)


@dataclass
class MetricsRow:
    instance: str
    scenario: str
    seed: int
    primal_gap: float
    primal_integral: float
    n_iterations: int
    best_objective: float


@dataclass
class ScenarioSummary:
    scenario: str
    q10: float
    q50: float
    q90: float
    mean: float
    geomean: float
    wins: int
    count: int


def aggregate(rows: Sequence[MetricsRow], metric: str = "primal_gap", tie_tol: float = 1e-9) -> list[ScenarioSummary]:
    """Per-scenario quantiles, mean, shifted geomean and wins, in first-seen scenario order."""
    by_scen: dict[str, list[MetricsRow]] = defaultdict(list)
    for r in rows:
        by_scen[r.scenario].append(r)
    # mean over seeds per (scenario, instance)
    per_inst: dict[str, dict[str, float]] = defaultdict(dict)
    for scen, rs in by_scen.items():
        acc = defaultdict(list)
        for r in rs:
            acc[r.instance].append(getattr(r, metric))
        for inst, vals in acc.items():
            per_inst[inst][scen] = float(np.mean(vals))
    wins = defaultdict(int)
    for inst, scores in per_inst.items():
        best = min(scores.values())
        for scen, v in scores.items():
            if v <= best + tie_tol:
                wins[scen] += 1
    out = []
    for scen, rs in by_scen.items():
        vals = np.array([getattr(r, metric) for r in rs], dtype=float)
        q = np.quantile(vals, QUANTILES, method="linear")
        out.append(ScenarioSummary(scen, *map(float, q), float(vals.mean()), shifted_geomean(vals),
                                   wins[scen], len(vals)))
    return out


HEADER = ("Scenario", "Q0.1", "Q0.5", "Q0.9", "Mean", "Geomean", "Wins")


def table_rows(summaries: Sequence[ScenarioSummary]) -> list[tuple]:
    return [(s.scenario, s.q10, s.q50, s.q90, s.mean, s.geomean, s.wins) for s in summaries]


def to_csv(summaries: Sequence[ScenarioSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for row in table_rows(summaries):
        w.writerow([row[0]] + [f"{v:.6g}" for v in row[1:6]] + [row[6]])
    return buf.getvalue()


def to_text(summaries: Sequence[ScenarioSummary], title: str = "") -> str:
    body = [[r[0]] + [f"{v:.2f}" for v in r[1:6]] + [str(r[6])] for r in table_rows(summaries)]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(HEADER)]
    lines = [title] if title else []
    lines.append("  ".join(h.ljust(widths[0]) if i == 0 else h.rjust(widths[i]) for i, h in enumerate(HEADER)))
    for b in body:
        lines.append("  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(b)))
    return "\n".join(lines) + "\n"

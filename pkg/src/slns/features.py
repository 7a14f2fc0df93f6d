"""Per-binary feature rows: a histogram of fractional values plus raw values in the best incumbents."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .collect import ProbeRecord, SampleSet
from .model import MipModel, Solution

K_H = 10
N_BEST = 10
MISSING = -1.0
CLIP_TOL = 1e-9

HIST_COLS = [f"h{j}" for j in range(K_H)]
BEST_COLS = [f"b{j}" for j in range(N_BEST)]
FEATURE_COLS = HIST_COLS + BEST_COLS + ["n_feasible", "n_fractional"]
CSV_COLS = ["instance", "var_index"] + FEATURE_COLS + ["label"]


def build_histogram(values, k_h: int = K_H) -> np.ndarray:
    """Relative frequencies over ``k_h`` equal-width bins of [0, 1]; 1.0 falls in the last bin."""
    x = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    hist = np.zeros(k_h)
    if x.size == 0:
        return hist
    if np.any(x < -CLIP_TOL) or np.any(x > 1 + CLIP_TOL):
        raise ValueError("histogram values must lie in [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    j = np.minimum(np.floor(x * k_h).astype(int), k_h - 1)
    np.add.at(hist, j, 1.0 / x.size)
    return hist


@dataclass
class VariableFeatureRow:
    var_index: int
    hist: np.ndarray
    best10: np.ndarray
    n_feasible: int
    n_fractional: int
    label: Optional[int] = None

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.hist, self.best10, [self.n_feasible, self.n_fractional]])


@dataclass
class InstanceDataset:
    instance: str
    rows: list[VariableFeatureRow]
    source: str = "PRB"

    def matrix(self) -> np.ndarray:
        return np.array([r.vector for r in self.rows]).reshape(len(self.rows), len(FEATURE_COLS))

    def labels(self) -> np.ndarray:
        if any(r.label is None for r in self.rows):
            raise ValueError(f"dataset {self.instance} has unlabelled rows")
        return np.array([r.label for r in self.rows], dtype=int)

    @property
    def labelled(self) -> bool:
        return all(r.label is not None for r in self.rows)


def assemble_features(probe: ProbeRecord, samples: Optional[SampleSet], model: MipModel,
                      source: str = "PRB", instance: Optional[str] = None) -> InstanceDataset:
    """One row per binary, in index order. ``SPL`` adds the sample values to the histogram."""
    if source not in ("PRB", "SPL"):
        raise ValueError("source must be PRB or SPL")
    b = model.binary_indices
    fractional = [s.values for s in probe.fractional]
    if source == "SPL" and samples is not None:
        fractional += [s.solution.values for s in samples.samples]
    frac = np.array(fractional).reshape(len(fractional), model.n_vars)
    best = sorted(probe.feasible, key=lambda s: s.objective)[:N_BEST]
    feas = np.array([s.values for s in best]).reshape(len(best), model.n_vars)
    rows = []
    for i in b:
        padded = np.full(N_BEST, MISSING)
        padded[: len(best)] = feas[:, i]
        rows.append(VariableFeatureRow(int(i), build_histogram(frac[:, i]), padded, len(probe.feasible), len(frac)))
    return InstanceDataset(instance or model.name, rows, source)


def attach_labels(dataset: InstanceDataset, label_solution: Solution | Sequence[float], model: MipModel | None = None
                  ) -> InstanceDataset:
    vals = np.asarray(label_solution.values if isinstance(label_solution, Solution) else label_solution, dtype=float)
    if model is not None and len(vals) != model.n_vars:
        raise ValueError("label solution length does not match the model")
    if dataset.rows and max(r.var_index for r in dataset.rows) >= len(vals):
        raise ValueError("label solution is shorter than the dataset's variable indices")
    rows = [replace(r, label=int(round(vals[r.var_index]))) for r in dataset.rows]
    return InstanceDataset(dataset.instance, rows, dataset.source)


def write_csv(datasets: Iterable[InstanceDataset], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLS)
        for ds in datasets:
            for r in ds.rows:
                w.writerow([ds.instance, r.var_index, *[repr(float(v)) for v in r.hist],
                            *[repr(float(v)) for v in r.best10], r.n_feasible, r.n_fractional,
                            "" if r.label is None else r.label])


def read_csv(path, source: str = "PRB") -> list[InstanceDataset]:
    out: dict[str, InstanceDataset] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            ds = out.setdefault(rec["instance"], InstanceDataset(rec["instance"], [], source))
            ds.rows.append(VariableFeatureRow(
                int(rec["var_index"]),
                np.array([float(rec[c]) for c in HIST_COLS]),
                np.array([float(rec[c]) for c in BEST_COLS]),
                int(rec["n_feasible"]),
                int(rec["n_fractional"]),
                int(rec["label"]) if rec["label"] != "" else None,
            ))
    return list(out.values())

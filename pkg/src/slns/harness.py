"""Benchmark orchestration: instance filtering, labels, scenario runs and reports."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from . import classifier
from .backend.base import Backend, BackendConfig, SolveStatus
from .backend.reference import ReferenceBackend, enumerate_oracle
from .collect import NoInitialSolution, ProbeRecord, SampleSet, probe, spl
from .engine import EngineConfig, IterationRecord, run, trajectory_events
from .features import InstanceDataset, assemble_features, attach_labels
from .metrics import MetricsRow, ScenarioSummary, Trajectory, aggregate, primal_gap, primal_integral, to_csv, to_text
from .model import MipModel, Solution, relax
from .mps import MpsError, read_mps, write_mps
from .policies import OracleNoise, make_policy

log = logging.getLogger(__name__)

BINARY_RATIO_MIN = 0.10
HARD_GAP = 10.0
FILTER_STATUSES = ("selected", "infeasible", "error", "low_binary", "no_solution", "trivial")


class ConfigurationError(ValueError):
    pass


# Budgets ---------------------------------------------------------------------

@dataclass(frozen=True)
class HarnessConfig:
    """Time budgets in seconds; node/iteration caps make desk runs deterministic."""

    total_budget: float = 600.0
    probe_budget: float = 120.0
    sample_budget: float = 60.0
    iter_budget: float = 20.0
    lp_budget: float = 5.0
    probe_nodes: Optional[int] = None
    node_limit: Optional[int] = None
    max_iterations: Optional[int] = None
    max_samples: Optional[int] = None
    label_budget: float = 6 * 3600.0
    workers: int = 1

    @classmethod
    def desk(cls, factor: float = 0.1, **overrides) -> "HarnessConfig":
        """The default budgets shrunk by ``factor`` (0.1 gives 60/12/6/2 s)."""
        base = cls()
        scaled = {f: getattr(base, f) * factor for f in
                  ("total_budget", "probe_budget", "sample_budget", "iter_budget")}
        scaled["label_budget"] = 600.0
        scaled.update(overrides)
        return replace(base, **scaled)

    def engine_config(self, search_budget: float, **overrides) -> EngineConfig:
        kw = dict(total_budget=search_budget, iter_budget=self.iter_budget, max_iterations=self.max_iterations,
                  node_limit=self.node_limit)
        kw.update(overrides)
        return EngineConfig(**kw)


# Artifact cache --------------------------------------------------------------

def content_key(model: MipModel, config: Mapping[str, Any] | None = None) -> str:
    h = hashlib.sha256(write_mps(model).encode())
    h.update(json.dumps(config or {}, sort_keys=True, default=str).encode())
    return h.hexdigest()[:20]


class ArtifactCache:
    """JSON artifacts on disk keyed by a content hash of instance and config."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.json"

    def get(self, kind: str, key: str):
        p = self.path(kind, key)
        return json.loads(p.read_text()) if p.exists() else None

    def put(self, kind: str, key: str, obj) -> None:
        p = self.path(kind, key)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(obj))


# Instance filtering ----------------------------------------------------------

@dataclass
class InstanceManifest:
    path: str
    name: str
    n_vars: int = 0
    n_binary: int = 0
    binary_ratio: float = 0.0
    tags: list[str] = field(default_factory=list)
    filter_status: str = "selected"

    def to_dict(self):
        return asdict(self)


def _classify(path: Path, backend: Backend, probe_budget: float, hardness_budget: float, tags: list[str],
              probe_nodes: Optional[int], hardness_nodes: Optional[int]) -> InstanceManifest:
    name = path.name.split(".")[0]
    man = InstanceManifest(str(path), name, tags=list(tags))
    try:
        model = read_mps(path)
    except (MpsError, OSError, ValueError) as err:
        log.info("%s: parse error (%s)", name, err)
        man.filter_status = "error"
        return man
    man.name = model.name or name
    man.n_vars = model.n_vars
    man.n_binary = len(model.binary_indices)
    man.binary_ratio = man.n_binary / man.n_vars if man.n_vars else 0.0
    if {"infeasible", "no_solution"} & set(tags):
        man.filter_status = "infeasible"
        return man
    root = backend.solve_lp(relax(model), BackendConfig(time_limit=max(probe_budget, 1e-3)))
    if root.status is SolveStatus.INFEASIBLE:
        man.filter_status = "infeasible"
        return man
    if root.status is SolveStatus.ERROR:
        man.filter_status = "error"
        return man
    if man.binary_ratio < BINARY_RATIO_MIN:
        man.filter_status = "low_binary"
        return man
    out = backend.solve_mip(model, cfg=BackendConfig(time_limit=probe_budget, node_limit=probe_nodes))
    if out.status is SolveStatus.INFEASIBLE:
        man.filter_status = "infeasible"
        return man
    if out.status is SolveStatus.ERROR:
        man.filter_status = "error"
        return man
    if out.best is None:
        man.filter_status = "no_solution"
        return man
    hard = backend.solve_mip(model, cfg=BackendConfig(time_limit=hardness_budget, node_limit=hardness_nodes))
    gap = hard.gap if hard.best is not None else math.inf
    man.filter_status = "trivial" if gap <= HARD_GAP else "selected"
    return man


def filter_instances(directory, backend: Backend | None = None, probe_budget: float = 120.0,
                     hardness_budget: float = 600.0, tags: Mapping[str, list[str]] | None = None,
                     probe_nodes: Optional[int] = None, hardness_nodes: Optional[int] = None,
                     cache: ArtifactCache | None = None) -> list[InstanceManifest]:
    """Classify every ``*.mps`` file in ``directory`` by the selection conditions, in filename order.

    ``tags`` maps instance names to their tags; when omitted, a ``tags.json``
    in the directory is used if present.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise OSError(f"not a readable directory: {directory}")
    backend = backend or ReferenceBackend()
    if tags is None and (directory / "tags.json").exists():
        tags = json.loads((directory / "tags.json").read_text())
    tags = tags or {}
    out = []
    for path in sorted(directory.glob("*.mps")):
        name = path.name.split(".")[0]
        key = None
        if cache is not None:
            h = hashlib.sha256(path.read_bytes())
            h.update(json.dumps([probe_budget, hardness_budget, probe_nodes, hardness_nodes,
                                 tags.get(name, [])]).encode())
            key = h.hexdigest()[:20]
            hit = cache.get("filter", key)
            if hit is not None:
                out.append(InstanceManifest(**hit))
                continue
        man = _classify(path, backend, probe_budget, hardness_budget, tags.get(name, []), probe_nodes, hardness_nodes)
        if cache is not None:
            cache.put("filter", key, man.to_dict())
        out.append(man)
    return out


def save_manifest(manifests: Iterable[InstanceManifest], path) -> None:
    Path(path).write_text(json.dumps([m.to_dict() for m in manifests], indent=1))


def load_manifest(path) -> list[InstanceManifest]:
    return [InstanceManifest(**d) for d in json.loads(Path(path).read_text())]


# Labels ------------------------------------------------------------------------

def label_solution(model: MipModel, backend: Backend | None = None, label_budget: float = 6 * 3600.0,
                   enumeration_limit: int = 20) -> Optional[Solution]:
    """Best known solution: exact enumeration for small pure-binary models, a long solve otherwise."""
    if model.is_pure_binary() and model.n_vars <= enumeration_limit:
        out = enumerate_oracle(model, enumeration_limit)
    else:
        out = (backend or ReferenceBackend()).solve_mip(model, cfg=BackendConfig(time_limit=label_budget))
    return out.best


def store_label(path, solution: Solution) -> Solution:
    """Persist ``solution`` unless the stored label is at least as good; returns the label kept."""
    path = Path(path)
    if path.exists():
        old = Solution.from_dict(json.loads(path.read_text()))
        if old.objective <= solution.objective:
            return old
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(solution.to_dict()))
    return solution


def load_label(path) -> Solution:
    return Solution.from_dict(json.loads(Path(path).read_text()))


def generate_labels(models: Mapping[str, MipModel], backend: Backend | None = None, label_budget: float = 6 * 3600.0,
                    label_dir=None) -> dict[str, Solution]:
    """Label every instance; instances without a feasible solution are left out."""
    out = {}
    for name, model in models.items():
        sol = label_solution(model, backend, label_budget)
        if sol is None:
            log.info("%s: no feasible label; dropped from oracle/SLNS scenarios", name)
            continue
        out[name] = store_label(Path(label_dir) / f"{name}.json", sol) if label_dir is not None else sol
    return out


# Scenarios and runs --------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    policy: str
    source: str = "PRB"
    weights: str = "none"
    m_w: float = 2.0
    error_rate: float = 0.0
    seeds: tuple[int, ...] = (0, 1, 2)
    budgets: Mapping[str, Any] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        object.__setattr__(self, "budgets", dict(self.budgets))
        if self.source not in ("PRB", "SPL"):
            raise ConfigurationError(f"unknown feature source {self.source!r}")
        if self.weights not in classifier.PRESETS:
            raise ConfigurationError(f"unknown weights preset {self.weights!r}")
        if not self.name:
            object.__setattr__(self, "name", self.default_name())

    def default_name(self) -> str:
        if self.policy == "slns":
            w = "" if self.weights == "none" else self.weights
            return f"SLNS-GBM{w}-{self.source}"
        if self.policy == "olns":
            return f"OLNS-{self.m_w:g}-e{self.error_rate:g}"
        if self.policy == "dolns":
            return f"DOLNS-e{self.error_rate:g}"
        return self.policy

    @property
    def model_key(self) -> str:
        return f"{self.weights}-{self.source}"

    @property
    def uses_sampling(self) -> bool:
        return self.policy == "slns" and self.source == "SPL"

    def to_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d) -> "ScenarioSpec":
        d = dict(d)
        if "seeds" in d:
            d["seeds"] = tuple(d["seeds"])
        return cls(**d)


@dataclass
class RunRecord:
    scenario: ScenarioSpec
    instance: str
    seed: int
    trajectory: Trajectory
    metrics: MetricsRow
    iterations: list[IterationRecord]
    n_samples: int = 0
    error: str = ""

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "instance": self.instance,
            "seed": self.seed,
            "trajectory": self.trajectory.to_dict(),
            "metrics": asdict(self.metrics),
            "iterations": [r.to_dict() for r in self.iterations],
            "n_samples": self.n_samples,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d) -> "RunRecord":
        return cls(ScenarioSpec.from_dict(d["scenario"]), d["instance"], d["seed"], Trajectory.from_dict(d["trajectory"]),
                   MetricsRow(**d["metrics"]), [IterationRecord(**r) for r in d["iterations"]],
                   d.get("n_samples", 0), d.get("error", ""))


def write_records(records: Iterable[RunRecord], path, append: bool = False) -> None:
    with open(path, "a" if append else "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_records(path) -> list[RunRecord]:
    return [RunRecord.from_dict(json.loads(line)) for line in Path(path).read_text().splitlines() if line.strip()]


@dataclass
class PreparedInstance:
    """Pre-search data for one instance and seed: probing, optional sampling, features."""

    model: MipModel
    probe: ProbeRecord
    samples: Optional[SampleSet] = None

    def dataset(self, source: str) -> InstanceDataset:
        return assemble_features(self.probe, self.samples if source == "SPL" else None, self.model, source)


def prepare(model: MipModel, cfg: HarnessConfig, backend: Backend, seed: int = 0, sampling: bool = True,
            cache: ArtifactCache | None = None) -> PreparedInstance:
    """Probe (and optionally sample) ``model``; cached by content hash when ``cache`` is given."""
    key = None
    if cache is not None:
        key = content_key(model, {"probe_budget": cfg.probe_budget, "probe_nodes": cfg.probe_nodes, "seed": seed,
                                  "sample_budget": cfg.sample_budget, "lp_budget": cfg.lp_budget,
                                  "max_samples": cfg.max_samples, "sampling": sampling})
        hit = cache.get("prepared", key)
        if hit is not None:
            samples = SampleSet.from_dict(hit["samples"]) if hit["samples"] is not None else None
            return PreparedInstance(model, ProbeRecord.from_dict(hit["probe"]), samples)
    rec = probe(model, backend, cfg.probe_budget, cfg.probe_nodes, seed)
    samples = None
    if sampling:
        samples = spl(model, rec.best, backend, cfg.sample_budget, cfg.lp_budget, seed, cfg.max_samples)
    if cache is not None:
        cache.put("prepared", key, {"probe": rec.to_dict(),
                                    "samples": samples.to_dict() if samples is not None else None})
    return PreparedInstance(model, rec, samples)


def build_corpus(prepared: Mapping[str, PreparedInstance], labels: Mapping[str, Solution], source: str
                 ) -> list[InstanceDataset]:
    """Labelled feature datasets for every instance with a label."""
    out = []
    for name, prep in prepared.items():
        if name not in labels:
            continue
        ds = prep.dataset(source)
        out.append(attach_labels(InstanceDataset(name, ds.rows, source), labels[name], prep.model))
    return out


def train_models(prepared: Mapping[str, PreparedInstance], labels: Mapping[str, Solution],
                 scenarios: Sequence[ScenarioSpec], gbm: classifier.GbmConfig = classifier.GbmConfig(),
                 presets: Mapping[str, classifier.ClassWeights] = classifier.PRESETS
                 ) -> dict[str, dict[str, classifier.TrainedModel]]:
    """Leave-one-instance-out models for every SLNS scenario, keyed by ``model_key`` then instance."""
    out: dict[str, dict[str, classifier.TrainedModel]] = {}
    for sc in scenarios:
        if sc.policy != "slns" or sc.model_key in out:
            continue
        corpus = build_corpus(prepared, labels, sc.source)
        out[sc.model_key] = classifier.train_leave_one_out(corpus, presets[sc.weights], gbm)
    return out


def _validate(instances: Mapping[str, MipModel], scenarios: Sequence[ScenarioSpec], labels, models) -> None:
    for sc in scenarios:
        if sc.policy == "slns":
            per_inst = (models or {}).get(sc.model_key)
            if per_inst is None:
                raise ConfigurationError(f"scenario {sc.name} needs trained models for {sc.model_key}")
            missing = [n for n in instances if n not in per_inst]
            if missing:
                raise ConfigurationError(f"scenario {sc.name}: no model for {', '.join(missing)}")
        if sc.policy in ("olns", "dolns"):
            missing = [n for n in instances if n not in (labels or {})]
            if missing:
                raise ConfigurationError(f"scenario {sc.name}: no label for {', '.join(missing)}")
        make_policy(sc.policy)  # unknown names fail here


def run_one(name: str, model: MipModel, sc: ScenarioSpec, seed: int, cfg: HarnessConfig, backend: Backend,
            labels: Mapping[str, Solution] | None = None, models=None, best_known: Optional[float] = None,
            cache: ArtifactCache | None = None, prepared: Optional[PreparedInstance] = None) -> RunRecord:
    """Probe, optionally sample and predict, then search; the horizon is the scenario's total budget."""
    budgets = replace(cfg, **{k: v for k, v in sc.budgets.items() if k in {f.name for f in fields(HarnessConfig)}})
    label = (labels or {}).get(name)
    if best_known is None and label is not None:
        best_known = label.objective
    try:
        if prepared is None or (sc.uses_sampling and prepared.samples is None):
            prepared = prepare(model, budgets, backend, seed, sampling=sc.uses_sampling, cache=cache)
        x0 = prepared.probe.best
        spent = prepared.probe.probe_time
        n_samples = 0
        predictions = None
        if sc.policy == "slns":
            if sc.uses_sampling:
                spent += min(prepared.samples.elapsed, budgets.sample_budget)
                n_samples = len(prepared.samples)
            ds = prepared.dataset(sc.source)
            predictions = classifier.predict_dataset(models[sc.model_key][name], ds)
        oracle = None
        noise = None
        if sc.policy in ("olns", "dolns"):
            oracle = np.round(label.values[model.binary_indices]).astype(int)
            noise = OracleNoise.draw(sc.error_rate, len(oracle), np.random.default_rng([seed, 7919]))
        policy = make_policy(sc.policy, m_w=sc.m_w, noise=noise)
        search = max(budgets.total_budget - spent, 0.0)
        eng_over = {k: v for k, v in sc.budgets.items() if k in {f.name for f in fields(EngineConfig)}}
        best, history = run(model, x0, policy, backend, budgets.engine_config(search, **eng_over), seed=seed,
                            predictions=predictions, oracle_labels=oracle)
        events = [(x0.time_offset, x0.objective)] + [
            (t, o) for t, o in trajectory_events(x0, history, start=spent)[1:]]
        events = _monotone(events)
        if best_known is None:
            best_known = best.objective
        best_known = min(best_known, best.objective)
        traj = Trajectory(events, budgets.total_budget)
        row = MetricsRow(name, sc.name, seed, primal_gap(best.objective, best_known),
                         primal_integral(traj, best_known), len(history), best.objective)
        return RunRecord(sc, name, seed, traj, row, history, n_samples)
    except (NoInitialSolution, ValueError, KeyError) as err:
        log.warning("%s / %s / seed %d failed: %s", name, sc.name, seed, err)
        traj = Trajectory([], budgets.total_budget)
        row = MetricsRow(name, sc.name, seed, 100.0, 100.0, 0, math.inf)
        return RunRecord(sc, name, seed, traj, row, [], 0, str(err))


def _monotone(events):
    out = []
    for t, o in sorted(events):
        if not out:
            out.append((t, o))
        elif o < out[-1][1] - 1e-9:
            out.append((max(t, out[-1][0] + 1e-9), o))
    return out


def _run_task(args):
    return run_one(*args)


def run_experiment(instances: Mapping[str, MipModel], scenarios: Sequence[ScenarioSpec], cfg: HarnessConfig,
                   backend: Backend | None = None, labels: Mapping[str, Solution] | None = None,
                   models: Mapping[str, Mapping[str, classifier.TrainedModel]] | None = None,
                   best_known: Mapping[str, float] | None = None, out_path=None,
                   cache: ArtifactCache | None = None,
                   prepared: Mapping[str, PreparedInstance] | None = None) -> list[RunRecord]:
    """Every (instance, scenario, seed) run; configuration is checked before anything runs.

    ``prepared`` supplies probe/sample data per instance and is reused across
    scenarios and seeds, so every scenario starts from the same incumbent.
    """
    backend = backend or ReferenceBackend()
    _validate(instances, scenarios, labels, models)
    tasks = []
    for name, model in instances.items():
        for sc in scenarios:
            for seed in sc.seeds:
                bk = (best_known or {}).get(name)
                tasks.append((name, model, sc, seed, cfg, backend, labels, models, bk, cache,
                              (prepared or {}).get(name)))
    if out_path is not None:
        Path(out_path).write_text("")
    records: list[RunRecord] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for rec in pool.map(_run_task, tasks):
                records.append(rec)
                if out_path is not None:
                    write_records([rec], out_path, append=True)
    else:
        for task in tasks:
            rec = _run_task(task)
            records.append(rec)
            if out_path is not None:
                write_records([rec], out_path, append=True)
    return records


# Reporting -------------------------------------------------------------------------

def segments(records: Sequence[RunRecord], manifests: Sequence[InstanceManifest] | None = None
             ) -> dict[str, set[str]]:
    """Instance groups: all, median splits on binary count and sample size, and one per tag."""
    names = {r.instance for r in records}
    out = {"all": names}
    man = {m.name: m for m in (manifests or []) if m.name in names}
    if man:
        med = float(np.median([m.n_binary for m in man.values()]))
        out["high binary"] = {n for n, m in man.items() if m.n_binary > med}
        out["low binary"] = {n for n, m in man.items() if m.n_binary <= med}
        for m in man.values():
            for t in m.tags:
                out.setdefault(f"tag:{t}", set()).add(m.name)
    sizes: dict[str, list[int]] = {}
    for r in records:
        if r.scenario.uses_sampling:
            sizes.setdefault(r.instance, []).append(r.n_samples)
    if sizes:
        per = {n: float(np.mean(v)) for n, v in sizes.items()}
        med = float(np.median(list(per.values())))
        out["high sample size"] = {n for n, v in per.items() if v >= med}
        out["low sample size"] = {n for n, v in per.items() if v < med}
    return out


def report(records: Sequence[RunRecord], manifests: Sequence[InstanceManifest] | None = None,
           metric: str = "primal_gap", segmented: bool = False) -> dict[str, list[ScenarioSummary]]:
    if not records:
        raise ValueError("nothing to report")
    groups = segments(records, manifests) if segmented else {"all": {r.instance for r in records}}
    out = {}
    for seg, names in groups.items():
        rows = [r.metrics for r in records if r.instance in names]
        if rows:
            out[seg] = aggregate(rows, metric)
    return out


def render(tables: Mapping[str, list[ScenarioSummary]], fmt: str = "text") -> str:
    parts = []
    for seg, summ in tables.items():
        if fmt == "csv":
            parts.append(f"# {seg}\n" + to_csv(summ))
        else:
            parts.append(to_text(summ, title=f"[{seg}]"))
    return "\n".join(parts)

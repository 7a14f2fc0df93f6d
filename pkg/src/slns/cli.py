"""Command-line entry point: ``slns <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import classifier, harness
from .backend.reference import ReferenceBackend
from .collect import NoInitialSolution, load_probe, load_samples, probe, save_json, spl
from .features import assemble_features, attach_labels, read_csv, write_csv
from .mps import MpsError, read_mps

log = logging.getLogger("slns")


def load_config(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def harness_config(conf: dict) -> harness.HarnessConfig:
    budgets = dict(conf.get("budgets", {}))
    scale = budgets.pop("scale", None)
    known = {f.name for f in fields(harness.HarnessConfig)}
    unknown = set(budgets) - known
    if unknown:
        raise harness.ConfigurationError(f"unknown budget keys: {', '.join(sorted(unknown))}")
    if scale is not None:
        return harness.HarnessConfig.desk(scale, **budgets)
    return harness.HarnessConfig(**budgets)


def presets(conf: dict) -> dict:
    out = dict(classifier.PRESETS)
    for name, (w0, w1) in conf.get("presets", {}).items():
        if name not in out:
            raise harness.ConfigurationError(f"unknown preset {name!r}; expected one of {', '.join(out)}")
        out[name] = classifier.ClassWeights(w0, w1)
    return out


def gbm_config(conf: dict) -> classifier.GbmConfig:
    return classifier.GbmConfig(**conf.get("gbm", {}))


def scenarios(conf: dict) -> list[harness.ScenarioSpec]:
    default_seeds = conf.get("seeds", [0, 1, 2])
    default_mw = conf.get("m_w", 2.0)
    out = []
    for d in conf.get("scenarios", []):
        d = dict(d)
        d.setdefault("seeds", default_seeds)
        d.setdefault("m_w", default_mw)
        out.append(harness.ScenarioSpec.from_dict(d))
    if not out:
        raise harness.ConfigurationError("config lists no scenarios")
    return out


def _instances(directory, manifest=None) -> dict:
    directory = Path(directory)
    if manifest is not None:
        paths = [Path(m.path) for m in harness.load_manifest(manifest) if m.filter_status == "selected"]
    else:
        paths = sorted(directory.glob("*.mps"))
    out = {}
    for p in paths:
        model = read_mps(p)
        out[model.name or p.stem] = model
    return out


def _load_labels(directory, names) -> dict:
    if directory is None:
        return {}
    out = {}
    for n in names:
        p = Path(directory) / f"{n}.json"
        if p.exists():
            out[n] = harness.load_label(p)
    return out


def _load_models(directory) -> dict:
    if directory is None:
        return {}
    out: dict = {}
    for sub in sorted(Path(directory).iterdir()):
        if sub.is_dir():
            out[sub.name] = {p.stem: classifier.TrainedModel.load(p) for p in sorted(sub.glob("*.json"))}
    return out


# Subcommands ------------------------------------------------------------------

def cmd_filter(args, conf):
    cfg = harness_config(conf)
    cache = harness.ArtifactCache(args.cache) if args.cache else None
    tags = json.loads(Path(args.tags).read_text()) if args.tags else None
    mans = harness.filter_instances(args.directory, ReferenceBackend(), cfg.probe_budget,
                                    args.hardness_budget or cfg.total_budget, tags,
                                    probe_nodes=cfg.probe_nodes, hardness_nodes=args.hardness_nodes, cache=cache)
    harness.save_manifest(mans, args.out)
    counts = {s: sum(m.filter_status == s for m in mans) for s in harness.FILTER_STATUSES}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_probe(args, conf):
    cfg = harness_config(conf)
    model = read_mps(args.instance)
    rec = probe(model, ReferenceBackend(), args.budget or cfg.probe_budget, cfg.probe_nodes, args.seed)
    save_json(rec, args.out)
    print(f"{len(rec.feasible)} feasible, {len(rec.fractional)} fractional, best {rec.best.objective:.6g}")


def cmd_sample(args, conf):
    cfg = harness_config(conf)
    model = read_mps(args.instance)
    rec = load_probe(args.probe)
    ss = spl(model, rec.best, ReferenceBackend(), args.budget or cfg.sample_budget, cfg.lp_budget, args.seed,
             args.max_samples if args.max_samples is not None else cfg.max_samples)
    save_json(ss, args.out)
    print(f"{len(ss)} samples")


def cmd_features(args, conf):
    model = read_mps(args.instance)
    rec = load_probe(args.probe)
    ss = load_samples(args.samples) if args.samples else None
    if args.source == "SPL" and ss is None:
        raise harness.ConfigurationError("SPL features need --samples")
    ds = assemble_features(rec, ss, model, args.source)
    if args.label:
        ds = attach_labels(ds, harness.load_label(args.label), model)
    write_csv([ds], args.out)
    print(f"{len(ds.rows)} rows")


def cmd_label(args, conf):
    cfg = harness_config(conf)
    model = read_mps(args.instance)
    sol = harness.label_solution(model, ReferenceBackend(), args.budget or cfg.label_budget)
    if sol is None:
        print("no feasible solution; instance dropped", file=sys.stderr)
        return 1
    kept = harness.store_label(args.out, sol)
    print(f"label objective {kept.objective:.6g}")


def cmd_train(args, conf):
    w = presets(conf)[args.weights]
    gbm = gbm_config(conf)
    corpus = []
    for p in args.csv:
        corpus += read_csv(p, args.source)
    if args.loo:
        out = Path(args.out) / f"{args.weights}-{args.source}"
        out.mkdir(parents=True, exist_ok=True)
        for name, m in classifier.train_leave_one_out(corpus, w, gbm).items():
            m.save(out / f"{name}.json")
        print(f"{len(corpus)} leave-one-out models in {out}")
    else:
        classifier.train(corpus, args.exclude, w, gbm).save(args.out)
        print(f"model trained on {len(corpus) - (args.exclude is not None)} instances")


def cmd_run(args, conf):
    cfg = harness_config(conf)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    scs = scenarios(conf)
    models = _instances(args.instances, args.manifest)
    labels = _load_labels(args.labels, models)
    trained = _load_models(args.models)
    cache = harness.ArtifactCache(args.cache) if args.cache else None
    recs = harness.run_experiment(models, scs, cfg, ReferenceBackend(), labels, trained, out_path=args.out,
                                  cache=cache)
    failed = sum(bool(r.error) for r in recs)
    print(f"{len(recs)} runs written to {args.out} ({failed} failed)")
    if args.csv:
        Path(args.csv).write_text(harness.render(harness.report(recs), "csv"))


def cmd_report(args, conf):
    recs = harness.read_records(args.records)
    mans = harness.load_manifest(args.manifest) if args.manifest else None
    tables = harness.report(recs, mans, args.metric, segmented=args.segments)
    print(harness.render(tables), end="")
    if args.csv:
        Path(args.csv).write_text(harness.render(tables, "csv"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slns", description="LNS benchmarking with learned destroy policies")
    ap.add_argument("--config", help="JSON config (budgets, scenarios, presets, m_w, seeds, gbm)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="classify a directory of MPS files")
    p.add_argument("directory")
    p.add_argument("--out", default="manifest.json")
    p.add_argument("--tags", help="JSON mapping instance name -> tags")
    p.add_argument("--hardness-budget", type=float)
    p.add_argument("--hardness-nodes", type=int)
    p.add_argument("--cache")
    p.set_defaults(fn=cmd_filter)

    p = sub.add_parser("probe", help="short solve collecting incumbents and node relaxations")
    p.add_argument("instance")
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("sample", help="LP samples around the probe's best solution")
    p.add_argument("instance")
    p.add_argument("--probe", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=float)
    p.add_argument("--max-samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("features", help="write per-binary feature rows as CSV")
    p.add_argument("instance")
    p.add_argument("--probe", required=True)
    p.add_argument("--samples")
    p.add_argument("--source", choices=("PRB", "SPL"), default="PRB")
    p.add_argument("--label")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("label", help="best known solution for an instance")
    p.add_argument("instance")
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=float)
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train", help="fit the classifier on labelled feature CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--weights", choices=tuple(classifier.PRESETS), default="none")
    p.add_argument("--source", choices=("PRB", "SPL"), default="PRB")
    p.add_argument("--exclude", help="instance left out of training")
    p.add_argument("--loo", action="store_true", help="one model per instance, written under --out")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("run", help="execute every scenario x instance x seed")
    p.add_argument("instances", help="directory of MPS files")
    p.add_argument("--manifest", help="only run instances selected in this manifest")
    p.add_argument("--labels", help="directory of <instance>.json labels")
    p.add_argument("--models", help="directory of <weights>-<source>/<instance>.json models")
    p.add_argument("--out", default="runs.jsonl")
    p.add_argument("--csv")
    p.add_argument("--cache")
    p.add_argument("--workers", type=int)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("report", help="summary tables from run records")
    p.add_argument("records")
    p.add_argument("--manifest")
    p.add_argument("--metric", choices=("primal_gap", "primal_integral"), default="primal_gap")
    p.add_argument("--segments", action="store_true")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        conf = load_config(args.config)
        return args.fn(args, conf) or 0
    except (harness.ConfigurationError, MpsError, NoInitialSolution, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

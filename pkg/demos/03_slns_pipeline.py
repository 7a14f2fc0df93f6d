"""Probe, sample, featurize, train leave-one-out and search: SLNS against LB and random.

Takes about a minute on one core.
"""
import numpy as np

from slns import ReferenceBackend, classifier, harness
from slns.synthetic import planted_family

backend = ReferenceBackend()
instances = {m.name: m for m in planted_family(12, 20, seed=7)}
labels = harness.generate_labels(instances, backend)

# desk budgets; node and iteration caps keep runs reproducible
cfg = harness.HarnessConfig.desk(1.0, probe_nodes=3, max_iterations=3, node_limit=100, max_samples=20,
                                 iter_budget=60, sample_budget=1e3)
prepared = {n: harness.prepare(m, cfg, backend, seed=0) for n, m in instances.items()}
first = next(iter(prepared.values()))
print(f"probe: {len(first.probe.feasible)} incumbents, {len(first.probe.fractional)} node LPs; "
      f"spl: {len(first.samples)} samples")

ds = first.dataset("SPL")
print("feature matrix", ds.matrix().shape)

scenarios = [harness.ScenarioSpec("slns", "SPL"), harness.ScenarioSpec("slns", "PRB", "W1"),
             harness.ScenarioSpec("lb"), harness.ScenarioSpec("random")]
models = harness.train_models(prepared, labels, scenarios,
                              classifier.GbmConfig(n_trees=30, max_depth=3, min_leaf=5))

# held-out quality of the leave-one-out models
for key, per in models.items():
    reps = []
    for name, model in per.items():
        src = key.split("-")[1]
        d = harness.build_corpus({name: prepared[name]}, labels, src)[0]
        reps.append(classifier.evaluate(classifier.predict_dataset(model, d), d.labels()))
    print(f"{key:8s} balanced accuracy {np.mean([r.balanced_accuracy for r in reps]):.3f}  "
          f"FNR {np.mean([r.fnr for r in reps]):.3f}")

records = harness.run_experiment(instances, scenarios, cfg, backend, labels, models, prepared=prepared)
print(harness.render(harness.report(records)))
print(harness.render(harness.report(records, metric="primal_integral")))

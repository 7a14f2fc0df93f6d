"""Run each destroy policy on one multi-knapsack and compare against the exact optimum."""
import numpy as np

from slns import EngineConfig, ReferenceBackend, enumerate_oracle, run
from slns.metrics import primal_gap
from slns.synthetic import multi_knapsack

rng = np.random.default_rng(0)
model = multi_knapsack(18, 3, rng)
opt = enumerate_oracle(model).best
print(f"{model.n_vars} binaries, {model.n_rows} rows, optimum {opt.objective:g}")

# all-zero start is feasible for a knapsack
x0 = model.make_solution(np.zeros(model.n_vars))
backend = ReferenceBackend()
cfg = EngineConfig(total_budget=60, iter_budget=5, max_iterations=8, node_limit=40)

for name in ("random", "rins", "crossover", "lb", "lb-relax"):
    best, hist = run(model, x0, name, backend, cfg, seed=1)
    ratios = " ".join(f"{h.ratio_used:.2f}" for h in hist)
    fallbacks = sum(h.fallback for h in hist)
    print(f"{name:9s} gap {primal_gap(best.objective, opt.objective):6.2f}%  "
          f"fallbacks {fallbacks}  ratios {ratios}")

# the label-driven oracle fixes only variables that agree with the optimum
labels = np.round(opt.values).astype(int)
best, hist = run(model, x0, "dolns", backend, cfg, oracle_labels=labels)
print(f"dolns     gap {primal_gap(best.objective, opt.objective):6.2f}%  after {len(hist)} iterations")

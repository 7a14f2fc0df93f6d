"""How label noise degrades the weighted-sampling oracle (OLNS, m_w = 100)."""
import numpy as np

from slns import EngineConfig, ReferenceBackend, enumerate_oracle, run
from slns.metrics import primal_gap, shifted_geomean
from slns.policies import OracleNoise, make_policy
from slns.synthetic import multi_knapsack

rng = np.random.default_rng(2024)
suite = []
for _ in range(10):
    m = multi_knapsack(int(rng.integers(10, 17)), int(rng.integers(2, 5)), rng)
    suite.append((m, enumerate_oracle(m).best))

backend = ReferenceBackend()
cfg = EngineConfig(total_budget=60, iter_budget=10, max_iterations=2)

print("error  geomean  mean")
for e in (0.0, 0.1, 0.3, 0.5):
    gaps = []
    for i, (m, opt) in enumerate(suite):
        labels = np.round(opt.values).astype(int)
        for seed in range(3):
            # one generator per (instance, seed) keeps the flipped sets nested across error rates
            noise = OracleNoise.draw(e, m.n_vars, np.random.default_rng([i, seed]))
            x0 = m.make_solution(np.zeros(m.n_vars))
            best, _ = run(m, x0, make_policy("olns", m_w=100, noise=noise), backend, cfg, seed=seed,
                          oracle_labels=labels)
            gaps.append(primal_gap(best.objective, opt.objective))
    print(f"{e:5.1f}  {shifted_geomean(gaps):7.3f}  {np.mean(gaps):5.2f}")

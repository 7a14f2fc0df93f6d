"""Acceptance checks, one test per criterion.

Run ``pytest tests/test_acceptance.py``; the terminal summary lists one
PASS/FAIL line per criterion together with the measured quantities.
"""
import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import FIXTURES
from slns import classifier as clf
from slns import harness
from slns.backend import ReferenceBackend, SolveOutcome, SolveStatus, enumerate_oracle
from slns.collect import probe, spl
from slns.engine import EngineConfig, NeighbourhoodSizeManager, run, update_ratio
from slns.features import build_histogram
from slns.metrics import Trajectory, primal_gap, primal_integral, shifted_geomean
from slns.model import HardFix, MipModel, Solution, SolutionKind, Variable, VarKind, Sense, fixing_counts, lb_distance
from slns.mps import parse_mps, read_mps, write_mps
from slns.policies import (OracleNoise, PolicyContext, lb_radius, make_policy, random_policy, slns_policy)
from slns.synthetic import multi_knapsack, planted_family, random_binary

criterion = pytest.mark.criterion


def free_binaries(n):
    return MipModel("b", tuple(Variable(f"x{i}", VarKind.BINARY, 0, 1, 0.0) for i in range(n)))


def frac(values):
    return Solution(np.asarray(values, dtype=float), 0.0, SolutionKind.FRACTIONAL)


# 1 ---------------------------------------------------------------------------

@criterion(1, "formula exactness")
def test_c01_formulas(record_property):
    t0 = time.perf_counter()
    assert fixing_counts(10, 0.25) == (7, 3)  # floor(2.5 + 0.5)
    assert fixing_counts(10, 0.24) == (8, 2)
    assert fixing_counts(7, 0.5) == (3, 4)
    assert fixing_counts(5, 1.0) == (0, 5) and fixing_counts(5, 0.0) == (5, 0)

    m = NeighbourhoodSizeManager(0.2, 1.5, 0.01, 0.9)
    assert abs(update_ratio(m, SolveStatus.FEASIBLE_LIMIT, False) - 0.5) <= 1e-9
    m.ratio = 0.5
    assert abs(update_ratio(m, SolveStatus.FEASIBLE_LIMIT, False) - 0.9) <= 1e-9
    m.ratio = 0.5
    assert abs(update_ratio(m, SolveStatus.OPTIMAL, True) - 0.2) <= 1e-9

    # k_LB = max(1, floor((1 - r) k'))
    inc = Solution(np.array([1.0, 0.0, 1.0, 1.0, 0.0]), 0.0)
    ctx = PolicyContext(free_binaries(5), inc, np.random.default_rng(0),
                        root_relaxation=frac([0.5, 0.5, 0.0, 1.0, 1.0]))
    k_prime = 0.5 + 0.5 + 1.0 + 0.0 + 1.0
    for r in (0.0, 0.1, 0.5, 0.9):
        assert lb_radius(ctx, r) == max(1, math.floor((1 - r) * k_prime))
    assert lb_radius(ctx, 0.0) == 3 and lb_radius(ctx, 0.5) == 1

    assert abs(clf.weighted_bce(0.5, 1, clf.ClassWeights(0.25, 0.75)) - 0.75 * math.log(2)) <= 1e-9
    assert build_histogram([1.0], 10).tolist() == [0.0] * 9 + [1.0]
    elapsed = time.perf_counter() - t0
    record_property("seconds", f"{elapsed:.3f}")
    assert elapsed < 1.0


# 2, 3 --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def oracle_suite():
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(20):
        n = int(rng.integers(10, 19))
        m = multi_knapsack(n, int(rng.integers(2, 5)), rng)
        out.append((m, enumerate_oracle(m).best))
    return out


@criterion(2, "oracle optimality (DOLNS, OLNS m_w=1e4, error 0)")
def test_c02_oracle_optimality(oracle_suite, record_property):
    be = ReferenceBackend()
    cfg = EngineConfig(total_budget=100, iter_budget=20, max_iterations=3)
    t0 = time.perf_counter()
    worst = 0.0
    for name, m_w in (("dolns", 2.0), ("olns", 1e4)):
        for m, opt in oracle_suite:
            assert 10 <= len(m.binary_indices) <= 18 and m.is_pure_binary()
            x0 = m.make_solution(np.zeros(m.n_vars))
            labels = np.round(opt.values).astype(int)
            best, hist = run(m, x0, make_policy(name, m_w=m_w), be, cfg, seed=0, oracle_labels=labels)
            assert len(hist) <= 3
            worst = max(worst, primal_gap(best.objective, opt.objective))
    elapsed = time.perf_counter() - t0
    record_property("max_gap", worst)
    record_property("seconds", f"{elapsed:.1f}")
    assert worst <= 1e-6
    assert elapsed < 120


@criterion(3, "noise trend of OLNS m_w=100")
def test_c03_noise_trend(oracle_suite, record_property):
    be = ReferenceBackend()
    # two iterations per run: with more, every error rate reaches the optimum on toys
    cfg = EngineConfig(total_budget=100, iter_budget=20, max_iterations=2)
    means = []
    for e in (0.0, 0.1, 0.3, 0.5):
        gaps = []
        for i, (m, opt) in enumerate(oracle_suite):
            labels = np.round(opt.values).astype(int)
            for seed in range(3):
                # same generator per (instance, seed): masks are nested across error rates
                noise = OracleNoise.draw(e, m.n_vars, np.random.default_rng([i, seed]))
                x0 = m.make_solution(np.zeros(m.n_vars))
                best, _ = run(m, x0, make_policy("olns", m_w=100, noise=noise), be, cfg, seed=seed,
                              oracle_labels=labels)
                gaps.append(primal_gap(best.objective, opt.objective))
        means.append(shifted_geomean(gaps))
    record_property("geomeans", ", ".join(f"{v:.3f}" for v in means))
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert means[-1] > means[0]


# 4 ---------------------------------------------------------------------------

@criterion(4, "weighted sampling frequencies")
def test_c04_weighted_sampling(record_property):
    inc = np.array([1, 0, 1, 1, 0, 0], dtype=float)
    pred = np.array([1, 0, 0, 0, 1, 1])  # matches at 0 and 1
    m_w = 3.0
    expected = np.where(inc == pred, m_w, 1.0)
    expected /= expected.sum()
    ctx = PolicyContext(free_binaries(6), Solution(inc, 0.0), np.random.default_rng(42), predictions=pred)
    counts = np.zeros(6)
    for _ in range(100_000):
        (i,) = slns_policy(ctx, m_w, 1).entries
        counts[i] += 1
    dev = np.abs(counts / counts.sum() - expected).max()
    record_property("max_freq_dev", f"{dev:.4f}")
    assert dev <= 0.01

    flat = PolicyContext(free_binaries(6), Solution(inc, 0.0), np.random.default_rng(7), predictions=pred)
    rnd = PolicyContext(free_binaries(6), Solution(inc, 0.0), np.random.default_rng(8))
    # compare whole 3-element fixing sets: 20 categories
    subsets = {s: t for t, s in enumerate(itertools.combinations(range(6), 3))}
    a = np.zeros(len(subsets))
    b = np.zeros(len(subsets))
    for _ in range(10_000):
        a[subsets[tuple(sorted(slns_policy(flat, 1.0, 3).entries))]] += 1
        b[subsets[tuple(sorted(random_policy(rnd, 3).entries))]] += 1
    p = stats.chi2_contingency(np.vstack([a, b]))[1]
    record_property("chi2_p", f"{p:.3f}")
    assert p > 0.01


# 5 ---------------------------------------------------------------------------

class FixedLp:
    def __init__(self, values):
        self.values = values

    def solve_lp(self, model, cfg=None):
        s = frac(self.values)
        return SolveOutcome(SolveStatus.OPTIMAL, s, 0.0, [s])


@criterion(5, "fixing-set cardinality")
def test_c05_cardinality(record_property):
    rng = np.random.default_rng(5)
    names = ("random", "rins", "crossover", "lb-relax", "dolns", "olns", "slns")
    checked = dict.fromkeys(names, 0)
    for trial in range(1000):
        n = int(rng.integers(1, 41))
        ratio = float(rng.random())
        _, k = fixing_counts(n, ratio)
        inc = rng.integers(0, 2, n).astype(float)
        flip = rng.random(n) < 0.5
        flip[int(rng.integers(0, n))] = True
        other = np.where(flip, 1 - inc, inc)
        pool = [Solution(inc, -1.0), Solution(other, 0.0)]
        noise = OracleNoise.draw(float(rng.random()), n, rng)
        for name in names:
            ctx = PolicyContext(free_binaries(n), Solution(inc, -1.0), np.random.default_rng(trial),
                                root_relaxation=frac(np.clip(inc + rng.normal(0, 0.4, n), 0, 1)), pool=pool,
                                predictions=rng.integers(0, 2, n), oracle_labels=rng.integers(0, 2, n),
                                lp_backend=FixedLp(np.clip(inc + rng.normal(0, 0.3, n), 0, 1)))
            fix = make_policy(name, m_w=float(rng.uniform(1, 50)), noise=noise)(ctx, ratio, k)
            assert isinstance(fix, HardFix) and len(fix) == k, (name, n, ratio, len(fix), k)
            assert all(inc[i] == v for i, v in fix.entries.items())
            checked[name] += 1
    record_property("trials", min(checked.values()))
    assert min(checked.values()) == 1000


# 6 ---------------------------------------------------------------------------

@criterion(6, "reference B&B equals enumeration")
def test_c06_solver_equivalence(record_property):
    rng = np.random.default_rng(6)
    be = ReferenceBackend()
    t0 = time.perf_counter()
    mismatches = 0
    feasible = 0
    for k in range(100):
        n = int(rng.integers(2, 13))
        m = random_binary(n, rng) if k % 2 else multi_knapsack(n, int(rng.integers(1, 4)), rng)
        ref = enumerate_oracle(m)
        out = be.solve_mip(m)
        if ref.best is None:
            mismatches += out.status is not SolveStatus.INFEASIBLE
            continue
        feasible += 1
        mismatches += not (out.status is SolveStatus.OPTIMAL and out.best.objective == ref.best.objective)
    elapsed = time.perf_counter() - t0
    record_property("mismatches", mismatches)
    record_property("feasible", feasible)
    record_property("seconds", f"{elapsed:.1f}")
    assert mismatches == 0 and elapsed < 60


# 7 ---------------------------------------------------------------------------

@criterion(7, "gradient check")
def test_c07_gradient(record_property):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        s = float(rng.uniform(-6, 6))
        y = int(rng.integers(0, 2))
        w = clf.ClassWeights(float(rng.uniform(0.05, 1)), float(rng.uniform(0.05, 1)))
        h = 1e-5
        loss = lambda t: clf.weighted_bce(clf.sigmoid(t), y, w)
        num = (loss(s + h) - loss(s - h)) / (2 * h)
        ana = clf.loss_gradient(s, y, w)
        worst = max(worst, abs(ana - num) / max(abs(ana), 1e-12))
    record_property("max_rel_err", f"{worst:.2e}")
    assert worst < 1e-5


# 8 ---------------------------------------------------------------------------

def imbalanced(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 22))
    score = 6 * X[:, 3] + 3 * X[:, 12] + rng.normal(0, 1.0, n)
    y = (score > np.quantile(score, 0.95)).astype(int)
    return X, y


@criterion(8, "bias weights lower FNR")
def test_c08_bias_monotonicity(record_property):
    X, y = imbalanced(4000, 0)
    Xt, yt = imbalanced(4000, 100)
    assert abs(y.mean() - 0.05) < 0.001
    fnr = {}
    for w in ("none", "W1", "W2", "W3"):
        model = clf.fit(X, y, clf.PRESETS[w], clf.GbmConfig(max_depth=3))
        fnr[w] = clf.evaluate((model.predict_proba(Xt) >= 0.5).astype(int), yt).fnr
    record_property("fnr", ", ".join(f"{k}={v:.3f}" for k, v in fnr.items()))
    assert fnr["W3"] <= fnr["W2"] <= fnr["W1"] <= fnr["none"]

    rng = np.random.default_rng(80)
    Xs = rng.random((1200, 22))
    ys = (Xs[:, 5] + Xs[:, 9] > 1.0).astype(int)
    model = clf.fit(Xs[:800], ys[:800], cfg=clf.GbmConfig(n_trees=50, max_depth=3))
    ba = clf.evaluate((model.predict_proba(Xs[800:]) >= 0.5).astype(int), ys[800:]).balanced_accuracy
    record_property("separable_bal_acc", f"{ba:.3f}")
    assert ba > 0.5


# 9 ---------------------------------------------------------------------------

@criterion(9, "SPL cut validity and reproducible ratios")
def test_c09_spl(record_property):
    be = ReferenceBackend()
    n_samples = 0
    for seed in range(3):
        m = multi_knapsack(16, 3, np.random.default_rng(90 + seed))
        x0 = probe(m, be, 10.0, node_limit=3).best
        ss = spl(m, x0, be, t_total=30.0, per_solve=5.0, seed=seed, max_samples=20)
        assert len(ss) > 0
        for s in ss.samples:
            assert lb_distance(m, x0, s.solution) <= s.radius + 1e-6
            assert s.status in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE_LIMIT)
        n_samples += len(ss)
        again = spl(m, x0, be, t_total=30.0, per_solve=5.0, seed=seed, max_samples=20)
        assert again.ratios == ss.ratios
        assert np.array_equal(np.array(ss.ratios), np.random.default_rng(seed).random(len(ss.ratios)))
    record_property("samples", n_samples)


# 10 --------------------------------------------------------------------------

BOUND_CODES = {"UP", "LO", "FX", "FR", "MI", "PL", "BV", "LI", "UI"}


@criterion(10, "MPS round trip over the fixture corpus")
def test_c10_mps_round_trip(record_property):
    files = sorted((FIXTURES / "mps").glob("*.mps"))
    assert len(files) >= 10
    senses, codes = set(), set()
    markers = ranges = False
    for f in files:
        text = f.read_text()
        m = read_mps(f)
        again = parse_mps(write_mps(m))
        assert again.same_as(m), f.name
        assert parse_mps(write_mps(again)).same_as(again)
        senses |= {c.sense for c in m.constraints}
        markers |= "'MARKER'" in text
        section = None
        for line in text.splitlines():
            if line and not line[0].isspace():
                section = line.split()[0]
            elif section == "BOUNDS" and line.split():
                codes.add(line.split()[0])
            elif section == "RANGES" and line.split():
                ranges = True
    assert senses == {Sense.LE, Sense.GE, Sense.EQ}
    assert markers and ranges and codes == BOUND_CODES
    record_property("files", len(files))


# 11 --------------------------------------------------------------------------

@criterion(11, "metric hand cases")
def test_c11_metrics():
    assert abs(primal_integral(Trajectory([(0.0, 110.0)], 60.0), 100.0) - 10.0) <= 1e-9
    assert abs(primal_integral(Trajectory([(0.0, 120.0), (30.0, 100.0)], 60.0), 100.0) - 10.0) <= 1e-9
    assert primal_integral(Trajectory([], 60.0), 100.0) == 100.0
    assert abs(shifted_geomean([1, 3]) - (math.sqrt(8) - 1)) <= 1e-9


# 12, 13 ----------------------------------------------------------------------

PIPE_CFG = harness.HarnessConfig.desk(1.0, probe_nodes=3, max_iterations=3, node_limit=100, max_samples=20,
                                      iter_budget=60, sample_budget=1e3)
PIPE_GBM = clf.GbmConfig(n_trees=30, max_depth=3, min_leaf=5)
SLNS_SPL = harness.ScenarioSpec("slns", "SPL", m_w=2.0)
LB = harness.ScenarioSpec("lb")


class RecordingModels(dict):
    """Per-instance model map that remembers which instance each model was fetched for."""

    def __init__(self, *a):
        super().__init__(*a)
        self.served = []

    def __getitem__(self, name):
        model = super().__getitem__(name)
        self.served.append((name, model))
        return model


def build_pipeline(instances, labels):
    be = ReferenceBackend()
    prepared = {n: harness.prepare(m, PIPE_CFG, be, 0, sampling=True) for n, m in instances.items()}
    models = harness.train_models(prepared, labels, [SLNS_SPL], PIPE_GBM)
    return prepared, models


@pytest.fixture(scope="module")
def pipeline():
    instances = {m.name: m for m in planted_family(12, 20, seed=7)}
    labels = harness.generate_labels(instances)
    prepared, models = build_pipeline(instances, labels)
    models = {k: RecordingModels(v) for k, v in models.items()}
    recs = harness.run_experiment(instances, [SLNS_SPL, LB], PIPE_CFG, labels=labels, models=models,
                                  prepared=prepared)
    return instances, labels, prepared, models, recs


def decisions(records):
    return [(r.instance, r.seed, r.scenario.name,
             [(h.ratio_used, h.policy_used, h.fallback, h.status, h.objective_after) for h in r.iterations])
            for r in records]


@criterion(12, "end-to-end SLNS pipeline vs LB")
def test_c12_end_to_end(pipeline, record_property):
    instances, labels, prepared, models, recs = pipeline
    assert len(instances) == 12 and len(recs) == 12 * 2 * 3
    assert not any(r.error for r in recs)
    gaps = {sc.name: np.mean([r.metrics.primal_gap for r in recs if r.scenario.name == sc.name])
            for sc in (SLNS_SPL, LB)}
    record_property("mean_gap", ", ".join(f"{k}={v:.3f}" for k, v in gaps.items()))

    # the whole chain again, from probing onwards, gives the same runs
    prepared2, models2 = build_pipeline(instances, labels)
    for name in instances:
        assert np.array_equal(prepared2[name].dataset("SPL").matrix(), prepared[name].dataset("SPL").matrix())
        assert prepared2[name].samples.ratios == prepared[name].samples.ratios
    again = harness.run_experiment(instances, [SLNS_SPL, LB], PIPE_CFG, labels=labels, models=models2,
                                   prepared=prepared2)
    assert decisions(again) == decisions(recs)
    assert gaps[SLNS_SPL.name] <= gaps[LB.name]


@criterion(13, "leave-one-out hygiene")
def test_c13_loo(pipeline, record_property):
    instances, labels, prepared, models, recs = pipeline
    per_inst = models[SLNS_SPL.model_key]
    assert set(per_inst) == set(instances)
    rows = {n: len(prepared[n].probe.best.values) for n in instances}
    for name, model in per_inst.items():
        assert name not in model.trained_on
        assert model.trained_on == {o: rows[o] for o in instances if o != name}
    served = per_inst.served
    assert {n for n, _ in served} == set(instances)
    for name, model in served:
        assert model.trained_on.get(name, 0) == 0
    record_property("runs_checked", len(served))

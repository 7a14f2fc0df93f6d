import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slns import classifier as clf
from slns.features import FEATURE_COLS, InstanceDataset, VariableFeatureRow


def test_weighted_bce_examples():
    assert clf.weighted_bce(1.0, 1) == pytest.approx(0.0, abs=1e-11)
    assert clf.weighted_bce(0.5, 1, clf.ClassWeights(0.25, 0.75)) == pytest.approx(0.519860, abs=1e-6)
    p = 0.3
    assert clf.weighted_bce(p, 0) == pytest.approx(-math.log(1 - p))
    assert clf.weighted_bce(p, 1) == pytest.approx(-math.log(p))
    arr = clf.weighted_bce(np.array([0.2, 0.9]), np.array([0, 1]))
    assert arr.shape == (2,)


def test_loss_gradient_examples():
    assert clf.loss_gradient(0.0, 1) == -0.5
    assert abs(clf.loss_gradient(-40.0, 0)) < 1e-15


@given(st.floats(-8, 8), st.integers(0, 1), st.floats(0.01, 5), st.floats(0.01, 5))
def test_gradient_matches_finite_difference(s, y, w0, w1):
    w = clf.ClassWeights(w0, w1)
    h = 1e-5
    f = lambda t: clf.weighted_bce(clf.sigmoid(t), y, w)
    num = (f(s + h) - f(s - h)) / (2 * h)
    ana = clf.loss_gradient(s, y, w)
    assert abs(ana - num) / max(1.0, abs(ana)) < 1e-5


def test_class_weights_positive():
    with pytest.raises(ValueError):
        clf.ClassWeights(0.0, 1.0)
    with pytest.raises(ValueError):
        clf.GbmConfig(n_trees=0)
    assert clf.PRESETS["W2"] == clf.ClassWeights(0.10, 0.90)


def dataset(name, X, y):
    rows = [VariableFeatureRow(i, x[:10], x[10:20], int(x[20]), int(x[21]), int(l)) for i, (x, l) in enumerate(zip(X, y))]
    return InstanceDataset(name, rows)


def separable(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, len(FEATURE_COLS)))
    y = (X[:, 3] > 0.6).astype(int)
    return X, y


def test_separable_training_accuracy():
    X, y = separable(300, 0)
    model = clf.fit(X, y, cfg=clf.GbmConfig(n_trees=20, max_depth=2))
    rep = clf.evaluate((model.predict_proba(X) >= 0.5).astype(int), y)
    assert rep.balanced_accuracy == 1.0


def test_constant_labels_predict_prior():
    X, _ = separable(100, 1)
    y = np.zeros(100, dtype=int)
    w = clf.ClassWeights(0.25, 0.75)
    model = clf.fit(X, y, w, clf.GbmConfig(n_trees=10))
    assert all(len(t.feature) == 1 for t in model.trees)  # no split improves a constant target
    p = model.predict_proba(X)
    assert np.allclose(p, p[0]) and p[0] < 1e-6
    assert clf.predict(model, X[0])[1] == 0


def test_weighted_prior():
    X, _ = separable(40, 2)
    y = np.array([1] * 10 + [0] * 30)
    w = clf.ClassWeights(0.25, 0.75)
    model = clf.fit(X, y, w, clf.GbmConfig(n_trees=1))
    prior = 0.75 * 10 / (0.75 * 10 + 0.25 * 30)
    assert model.base_score == pytest.approx(math.log(prior / (1 - prior)))


def test_predict_threshold():
    model = clf.TrainedModel(0.0, 0.1)
    prob, hard = clf.predict(model, np.zeros(len(FEATURE_COLS)))
    assert prob == 0.5 and hard == 1
    extreme = clf.TrainedModel(500.0, 0.1)
    assert 0 < clf.predict(extreme, np.zeros(22))[0] < 1


def test_training_is_deterministic_and_loss_decreases():
    X, y = separable(200, 3)
    y[:20] ^= 1
    cfg = clf.GbmConfig(n_trees=30, max_depth=3, seed=5, subsample=0.8)
    a = clf.fit(X, y, clf.PRESETS["W1"], cfg)
    b = clf.fit(X, y, clf.PRESETS["W1"], cfg)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))
    full = clf.fit(X, y, clf.PRESETS["W1"], clf.GbmConfig(n_trees=30, max_depth=3))
    hist = full.loss_history
    assert all(b_ <= a_ + 1e-12 for a_, b_ in zip(hist, hist[1:]))


@given(st.integers(0, 10_000), st.sampled_from(list(clf.PRESETS)))
@settings(max_examples=15)
def test_loss_non_increasing_property(seed, preset):
    rng = np.random.default_rng(seed)
    X = rng.random((80, 22))
    y = (rng.random(80) < 0.3).astype(int)
    model = clf.fit(X, y, clf.PRESETS[preset], clf.GbmConfig(n_trees=15, max_depth=3, min_leaf=5))
    h = model.loss_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_leave_one_out_excludes_instance():
    corpus = [dataset(f"i{k}", *separable(30, k)) for k in range(4)]
    models = clf.train_leave_one_out(corpus, cfg=clf.GbmConfig(n_trees=3))
    for name, m in models.items():
        assert name not in m.trained_on
        assert sum(m.trained_on.values()) == 90
    with pytest.raises(ValueError):
        clf.train(corpus[:1], "i0")


def test_evaluate_examples():
    y = np.array([1, 1, 0, 0, 0])
    rep = clf.evaluate(y, y)
    assert (rep.balanced_accuracy, rep.fnr, rep.fpr) == (1.0, 0.0, 0.0)
    y = np.array([1] + [0] * 9)
    rep = clf.evaluate(np.zeros(10, dtype=int), y)
    assert (rep.balanced_accuracy, rep.fnr, rep.fpr) == (0.5, 1.0, 0.0)
    assert (rep.tp, rep.fn, rep.fp, rep.tn) == (0, 1, 0, 9)
    single = clf.evaluate(np.array([0, 1]), np.array([0, 0]))
    assert single.single_class and single.balanced_accuracy == 0.5
    with pytest.raises(ValueError):
        clf.evaluate([], [])
    with pytest.raises(ValueError):
        clf.evaluate([1], [1, 0])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=60))
def test_balanced_accuracy_identity(pairs):
    p, y = map(np.array, zip(*pairs))
    rep = clf.evaluate(p, y)
    if not rep.single_class:
        assert rep.balanced_accuracy == pytest.approx(((1 - rep.fnr) + (1 - rep.fpr)) / 2)
    assert rep.tp + rep.fn + rep.fp + rep.tn == len(p)


def test_model_json_round_trip(tmp_path):
    X, y = separable(100, 4)
    m = clf.fit(X, y, clf.PRESETS["W3"], clf.GbmConfig(n_trees=5, max_depth=3))
    m.trained_on = {"a": 100}
    m.save(tmp_path / "m.json")
    back = clf.TrainedModel.load(tmp_path / "m.json")
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))
    assert back.weights == m.weights and back.trained_on == {"a": 100}


def test_predict_dataset_alignment():
    X, y = separable(20, 6)
    ds = dataset("x", X, y)
    m = clf.fit(X, y, cfg=clf.GbmConfig(n_trees=10, max_depth=2, min_leaf=2))
    assert clf.predict_dataset(m, ds).tolist() == (m.predict_proba(X) >= 0.5).astype(int).tolist()
    assert clf.predict_dataset(m, InstanceDataset("e", [])).size == 0

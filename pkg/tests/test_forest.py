import numpy as np
import pytest

from subsidysim.stats import forest_fit, forest_predict


def test_constant_target_constant_prediction():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(100, 3))
    model = forest_fit(X, np.full(100, 4.2), n_trees=10, seed=1)
    assert model.constant == 4.2
    assert (forest_predict(model, rng.uniform(size=(20, 3))) == 4.2).all()


def test_beats_mean_predictor_on_smooth_signal():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, size=(2000, 3))
    y = X[:, 0]
    model = forest_fit(X, y, n_trees=200, seed=2)
    Xt = rng.uniform(0, 1, size=(500, 3))
    pred = forest_predict(model, Xt)
    mse = float(np.mean((pred - Xt[:, 0]) ** 2))
    base = float(np.mean((Xt[:, 0] - y.mean()) ** 2))
    assert mse < 0.25 * base


def test_deterministic_in_seed():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(400, 4))
    y = X[:, 0] - X[:, 1] + rng.normal(size=400) * 0.1
    Xt = rng.uniform(size=(50, 4))
    p1 = forest_predict(forest_fit(X, y, n_trees=30, seed=7), Xt)
    p2 = forest_predict(forest_fit(X, y, n_trees=30, seed=7), Xt)
    assert np.array_equal(p1, p2)
    p3 = forest_predict(forest_fit(X, y, n_trees=30, seed=8), Xt)
    assert not np.array_equal(p1, p3)


def test_min_leaf_respected():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(200, 2))
    y = rng.normal(size=200)
    model = forest_fit(X, y, n_trees=5, min_leaf=20, seed=0)
    # with 200 bootstrap rows and 20 per leaf, no tree can exceed 11 leaves
    n_leaves = [int((feat < 0).sum()) for feat, *_ in model.trees]
    assert max(n_leaves) <= 200 // 20 + 1


def test_too_few_rows_rejected():
    with pytest.raises(ValueError):
        forest_fit(np.ones((6, 1)), np.arange(6.0), min_leaf=5)


def test_max_depth_one_is_a_stump():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(300, 2))
    y = (X[:, 0] > 0.5).astype(float)
    model = forest_fit(X, y, n_trees=5, max_depth=1, seed=0)
    for feat, *_ in model.trees:
        assert feat.shape[0] <= 3  # root plus two leaves

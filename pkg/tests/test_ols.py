import numpy as np
import pytest

from subsidysim.errors import DimensionMismatch, RankDeficient, SingleCluster
from subsidysim.stats import DesignMatrix, linear_contrast, ols_fit


def random_design(n=200, k=4, seed=0, clusters=10):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k))
    names = [f"x{j}" for j in range(k)]
    cl = rng.integers(0, clusters, size=n)
    return DesignMatrix(X, names, cluster=cl), rng


def test_perfect_fit_no_intercept():
    x = np.linspace(1.0, 5.0, 30)[:, None]
    res = ols_fit(DesignMatrix(x, ["x"]), 2.0 * x[:, 0])
    assert res.coef[0] == pytest.approx(2.0, abs=1e-12)
    assert res.se[0] == pytest.approx(0.0, abs=1e-10)
    assert res.r_squared == pytest.approx(1.0)


def test_matches_pseudo_inverse_oracle():
    d, rng = random_design()
    y = rng.normal(size=200)
    res = ols_fit(d, y)
    oracle = np.linalg.pinv(d.X) @ y
    assert np.abs(res.coef - oracle).max() < 1e-10


def test_singleton_clusters_reduce_to_hc():
    d, rng = random_design(clusters=10)
    singles = DesignMatrix(d.X, d.names, cluster=np.arange(200))
    y = rng.normal(size=200)
    vc = ols_fit(singles, y, cov="cluster").cov
    vh = ols_fit(singles, y, cov="hc1").cov
    assert np.abs(vc - vh).max() < 1e-12


def test_residuals_orthogonal_to_design():
    d, rng = random_design(n=500, k=6, seed=3)
    y = rng.normal(size=500)
    res = ols_fit(d, y)
    e = y - d.X @ res.coef
    scale = np.abs(d.X).max() * np.abs(y).max()
    assert np.abs(d.X.T @ e).max() < 1e-8 * scale


def test_covariance_symmetric_psd():
    d, rng = random_design(seed=5)
    y = rng.normal(size=200)
    for kind in ("classical", "hc1", "cluster"):
        V = ols_fit(d, y, cov=kind).cov
        assert np.abs(V - V.T).max() < 1e-12
        assert np.linalg.eigvalsh(V).min() > -1e-10


def test_rank_deficiency_reports_columns():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 3))
    X = np.column_stack([X, X[:, 0] + X[:, 1]])
    d = DesignMatrix(X, ["a", "b", "c", "a_plus_b"])
    with pytest.raises(RankDeficient) as exc:
        ols_fit(d, rng.normal(size=50))
    assert len(exc.value.dropped) == 1


def test_collinear_drop_mode():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 2))
    X = np.column_stack([X, 2.0 * X[:, 1]])
    d = DesignMatrix(X, ["a", "b", "b2"])
    res = ols_fit(d, rng.normal(size=50), on_collinear="drop")
    assert len(res.names) == 2
    assert len(res.dropped) == 1


def test_single_cluster_rejected():
    d, rng = random_design()
    one = DesignMatrix(d.X, d.names, cluster=np.zeros(200, dtype=int))
    with pytest.raises(SingleCluster):
        ols_fit(one, rng.normal(size=200), cov="cluster")


class TestContrast:
    def test_unit_vector_reproduces_coefficient(self):
        d, rng = random_design(seed=7)
        res = ols_fit(d, rng.normal(size=200))
        c = linear_contrast(res, [0.0, 1.0, 0.0, 0.0])
        assert c["estimate"] == res.coef[1]
        assert c["se"] == pytest.approx(res.se[1])

    def test_identical_columns_contrast_is_zero(self):
        # two names aliasing the same regressor: one is dropped, and the
        # contrast between them collapses to the zero weight vector
        rng = np.random.default_rng(4)
        x = rng.normal(size=50)
        y = rng.normal(size=50)
        d = DesignMatrix(np.column_stack([np.ones(50), x, x]), ["const", "x_a", "x_b"])
        res = ols_fit(d, y, on_collinear="drop")
        assert res.dropped == ["x_b"]
        c = linear_contrast(res, [0.0, 1.0 - 1.0, 0.0][: len(res.names)])
        assert c["estimate"] == 0.0
        assert c["p"] == 1.0

    def test_mismatched_weights(self):
        d, rng = random_design()
        res = ols_fit(d, rng.normal(size=200))
        with pytest.raises(DimensionMismatch):
            linear_contrast(res, [1.0, 0.0])

    def test_contrast_se_against_bootstrap(self):
        rng = np.random.default_rng(11)
        n = 400
        X = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
        y = X @ np.array([1.0, 0.7, -0.3]) + rng.normal(size=n)
        d = DesignMatrix(X, ["const", "a", "b"])
        res = ols_fit(d, y, cov="hc1")
        w = np.array([0.0, -1.0, 1.0])
        c = linear_contrast(res, w)
        boots = []
        for _ in range(400):
            ix = rng.integers(0, n, size=n)
            bb = np.linalg.lstsq(X[ix], y[ix], rcond=None)[0]
            boots.append(w @ bb)
        assert c["se"] == pytest.approx(np.std(boots, ddof=1), rel=0.10)

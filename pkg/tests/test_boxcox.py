import numpy as np
import pytest

from subsidysim.errors import NonpositiveP
from subsidysim.stats import boxcox_profile
from subsidysim.stats.boxcox import _transform


def planted_draw(kind, seed=0, n=1000):
    rng = np.random.default_rng(seed)
    S = np.exp(rng.normal(size=n))
    noise = rng.normal(size=n) * 0.1
    if kind == "loglog":
        P = np.exp(2.0 + 0.5 * np.log(S) + noise)
    else:  # linear in ln S on the level scale, shifted positive
        P = 2.0 + 0.5 * np.log(S) + noise
        P = P - P.min() + 1.0
    return P, S


def test_planted_log_log():
    P, S = planted_draw("loglog")
    rep = boxcox_profile(P, S)
    assert -0.1 <= rep.lambda_hat <= 0.1
    assert rep.p_linear < 0.001


def test_planted_lin_log():
    P, S = planted_draw("linlog")
    rep = boxcox_profile(P, S)
    assert 0.85 <= rep.lambda_hat <= 1.15
    assert rep.p_log < 0.001


def test_transform_continuous_at_zero():
    P = np.array([0.5, 1.0, 2.0, 5.0])
    limit = np.log(P)
    assert np.abs(_transform(P, 1e-6) - limit).max() < 1e-5
    assert np.abs(_transform(P, -1e-6) - limit).max() < 1e-5
    assert np.array_equal(_transform(P, 0.0), limit)


def test_profile_continuous_at_zero():
    P, S = planted_draw("loglog", seed=3)
    rng = np.random.default_rng(3)
    n = P.shape[0]
    X = np.column_stack([np.ones(n), np.log(S)])
    H = X @ np.linalg.inv(X.T @ X) @ X.T
    sum_log_p = float(np.log(P).sum())

    def ll(lam):
        z = _transform(P, lam)
        r = z - H @ z
        return -0.5 * n * np.log(float(r @ r) / n) + (lam - 1.0) * sum_log_p

    assert abs(ll(1e-6) - ll(0.0)) < 1e-3
    assert abs(ll(-1e-6) - ll(0.0)) < 1e-3


def test_nonpositive_rejected():
    with pytest.raises(NonpositiveP):
        boxcox_profile(np.array([1.0, -1.0]), np.array([1.0, 2.0]))
    with pytest.raises(NonpositiveP):
        boxcox_profile(np.array([1.0, 1.0]), np.array([0.0, 2.0]))


def test_lr_nonnegative():
    P, S = planted_draw("loglog", seed=4)
    rep = boxcox_profile(P, S)
    assert rep.lr_log >= -1e-8
    assert rep.lr_linear >= -1e-8

"""Binary logit by Newton-Raphson maximum likelihood."""

import numpy as np
from scipy.special import expit

from ..errors import NoVariation, Separation
from .linear import DesignMatrix, _inference


def _loglik(y, eta):
    # numerically stable sum of y*eta - log(1+exp(eta))
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logit_fit(
    design: DesignMatrix,
    y: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> "EstimateResult":
    """Fit a logit model; covariance is the inverse observed information.

    Convergence requires the gradient sup-norm below ``tol``. Coefficients
    drifting past +-30 on a standardized scale, or a singular information
    matrix while the gradient is still large, are reported as separation.
    McFadden's pseudo R-squared is attached to the result.
    """
    X = design.X
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("response must be binary 0/1")
    if y.min() == y.max():
        raise NoVariation(f"response is constant at {y[0]:g}")

    beta = np.zeros(k)
    colscale = np.maximum(np.abs(X).max(axis=0), 1e-12)
    for _ in range(max_iter):
        eta = X @ beta
        mu = expit(eta)
        grad = X.T @ (y - mu)
        if np.abs(grad).max() < tol:
            break
        w = mu * (1.0 - mu)
        info = (X * w[:, None]).T @ X
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise Separation("information matrix singular before convergence")
        # dampen overshoot on the log-likelihood
        ll0 = _loglik(y, eta)
        lam = 1.0
        for _ in range(30):
            cand = beta + lam * step
            if _loglik(y, X @ cand) >= ll0 - 1e-12:
                break
            lam *= 0.5
        beta = beta + lam * step
        # linear-predictor contributions past ~100 mean fitted probabilities
        # pinned at 0/1: the MLE is off to infinity
        if np.abs(beta * colscale).max() > 100.0:
            raise Separation("coefficients diverging; classes likely separable")
    else:
        raise Separation(f"no convergence in {max_iter} Newton steps")

    # saturated probabilities zero the gradient, so divergence can masquerade
    # as convergence; huge linear-predictor contributions give it away
    if np.abs(beta * colscale).max() > 30.0:
        raise Separation("converged with saturated probabilities; classes likely separable")

    mu = expit(X @ beta)
    w = mu * (1.0 - mu)
    info = (X * w[:, None]).T @ X
    V = np.linalg.inv(info)
    ll = _loglik(y, X @ beta)
    p1 = y.mean()
    ll_null = float(n * (p1 * np.log(p1) + (1.0 - p1) * np.log(1.0 - p1)))
    pseudo = 1.0 - ll / ll_null if ll_null != 0 else 0.0
    res = _inference(design.names, beta, V, n, n - k, "observed-information")
    res.pseudo_r_squared = pseudo
    res.extra["loglik"] = ll
    res.extra["loglik_null"] = ll_null
    return res

"""Least squares with classical, heteroskedasticity-robust, and cluster-robust
covariance.

Coefficients come from a rank-revealing pivoted QR decomposition. Aliased
columns either abort with the offending names (default) or are dropped and
recorded, depending on ``on_collinear``. Inference is normal-approximation
throughout: the panels this serves are large and the convention is documented
in the result object.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import erfc

from ..errors import DimensionMismatch, RankDeficient, SingleCluster

Z975 = 1.959963984540054


@dataclass
class DesignMatrix:
    """Numeric design matrix with column names and optional cluster ids."""

    X: np.ndarray
    names: Sequence[str]
    cluster: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("design matrix must be 2-D")
        if self.X.shape[1] != len(self.names):
            raise ValueError("column-name count does not match the matrix width")
        if not np.isfinite(self.X).all():
            raise ValueError("design matrix contains non-finite entries")
        if self.cluster is not None:
            self.cluster = np.asarray(self.cluster)
            if self.cluster.shape[0] != self.X.shape[0]:
                raise ValueError("cluster id length does not match the row count")


@dataclass
class EstimateResult:
    """Coefficients with covariance and per-coefficient inference.

    ``p`` and the confidence interval use the normal approximation.
    ``dropped`` lists columns removed for collinearity, in design order.
    """

    names: list
    coef: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int
    dof: int
    cov_kind: str = "classical"
    r_squared: Optional[float] = None
    r_squared_within: Optional[float] = None
    pseudo_r_squared: Optional[float] = None
    n_clusters: Optional[int] = None
    dropped: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def se_of(self, name: str) -> float:
        return float(self.se[self.names.index(name)])


def _two_sided_p(z):
    return erfc(np.abs(z) / np.sqrt(2.0))


def _inference(names, beta, V, n, dof, kind, **kw):
    V = 0.5 * (V + V.T)
    se = np.sqrt(np.clip(np.diag(V), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.inf * np.sign(beta))
        z = np.where((se == 0) & (beta == 0), 0.0, z)
    p = np.where(np.isfinite(z), _two_sided_p(np.where(np.isfinite(z), z, 0.0)), 0.0)
    p = np.where((se == 0) & (beta == 0), 1.0, p)
    return EstimateResult(
        names=list(names), coef=beta, cov=V, se=se, z=z, p=p,
        ci_low=beta - Z975 * se, ci_high=beta + Z975 * se,
        n=n, dof=dof, cov_kind=kind, **kw,
    )


def ols_fit(
    design: DesignMatrix,
    y: np.ndarray,
    cov: str = "classical",
    on_collinear: str = "raise",
    rcond: float = 1e-10,
) -> EstimateResult:
    """Fit least squares and return coefficients with the requested covariance.

    ``cov`` is one of ``classical``, ``hc1``, or ``cluster`` (needs cluster
    ids on the design). The cluster estimator applies the small-sample factor
    G/(G-1) * (n-1)/(n-k); with singleton clusters it reduces to hc1 exactly.
    """
    X = design.X
    y = np.asarray(y, dtype=float)
    n, k_full = X.shape
    if y.shape[0] != n:
        raise DimensionMismatch(f"y has {y.shape[0]} rows, design has {n}")

    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > rcond * scale))
    keep = np.sort(piv[:rank])
    dropped = [design.names[j] for j in sorted(piv[rank:])]
    if dropped:
        if on_collinear == "raise":
            raise RankDeficient(dropped)
        X = X[:, keep]
    names = [design.names[j] for j in keep] if dropped else list(design.names)
    k = X.shape[1]
    if n <= k:
        raise ValueError(f"n={n} must exceed the rank {k}")

    Q, R = linalg.qr(X, mode="economic")
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    Rinv = linalg.solve_triangular(R, np.eye(k))
    XtX_inv = Rinv @ Rinv.T

    if cov == "classical":
        sigma2 = float(resid @ resid) / (n - k)
        V = sigma2 * XtX_inv
        n_clusters = None
    elif cov == "hc1":
        meat = (X * (resid ** 2)[:, None]).T @ X
        V = XtX_inv @ meat @ XtX_inv * (n / (n - k))
        n_clusters = None
    elif cov == "cluster":
        if design.cluster is None:
            raise ValueError("cluster covariance requested without cluster ids")
        ids, inv = np.unique(design.cluster, return_inverse=True)
        G = ids.shape[0]
        if G < 2:
            raise SingleCluster(f"{G} cluster(s); need at least 2")
        scores = np.zeros((G, k))
        np.add.at(scores, inv, X * resid[:, None])
        meat = scores.T @ scores
        factor = (G / (G - 1.0)) * ((n - 1.0) / (n - k))
        V = factor * XtX_inv @ meat @ XtX_inv
        n_clusters = G
    else:
        raise ValueError(f"unknown covariance kind {cov!r}")

    tss = float(((y - y.mean()) ** 2).sum())
    rss = float(resid @ resid)
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    return _inference(
        names, beta, V, n, n - k, cov,
        r_squared=r2, n_clusters=n_clusters, dropped=dropped,
    )


def linear_contrast(result: EstimateResult, weights) -> dict:
    """Estimate and test a linear combination w'beta of fitted coefficients."""
    w = np.asarray(weights, dtype=float)
    if w.shape[0] != len(result.names):
        raise DimensionMismatch(
            f"{w.shape[0]} weights for {len(result.names)} coefficients"
        )
    est = float(w @ result.coef)
    var = float(w @ result.cov @ w)
    se = np.sqrt(max(var, 0.0))
    z = est / se if se > 0 else (0.0 if est == 0 else np.inf * np.sign(est))
    p = float(_two_sided_p(z)) if np.isfinite(z) else 0.0
    if se == 0 and est == 0:
        p = 1.0
    return {
        "estimate": est,
        "se": se,
        "z": z,
        "p": p,
        "ci_low": est - Z975 * se,
        "ci_high": est + Z975 * se,
    }

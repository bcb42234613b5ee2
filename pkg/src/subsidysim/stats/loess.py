"""Locally weighted scatterplot smoothing (tricube weights, local linear)."""

from dataclasses import dataclass

import numpy as np

from ..errors import SpanTooSmall


@dataclass
class LoessFit:
    """Fitted curve on an evaluation grid with an approximate pointwise band.

    ``band`` is the standard error of the local fit at each grid point, from
    the smoother weights and a global residual variance estimate.
    """

    grid: np.ndarray
    fitted: np.ndarray
    band: np.ndarray
    span: float
    degree: int
    residual_scale: float

    def __call__(self, x):
        return np.interp(x, self.grid, self.fitted)


def _local_fit(x, y, x0, idx, degree):
    """Weighted polynomial fit at x0 over neighborhood idx; returns (value, l2).

    l2 is the squared norm of the equivalent-kernel weights, used for the
    pointwise variance.
    """
    xs, ys = x[idx], y[idx]
    d = np.abs(xs - x0)
    dmax = d.max()
    if dmax == 0:
        w = np.ones_like(d)
    else:
        w = (1.0 - (d / dmax) ** 3) ** 3
        w = np.clip(w, 0.0, None)
    if (w > 0).sum() <= degree:
        raise SpanTooSmall(
            f"only {(w > 0).sum()} weighted points at x0={x0}; need > degree={degree}"
        )
    B = np.vander(xs - x0, degree + 1, increasing=True)
    WB = B * w[:, None]
    G = B.T @ WB
    try:
        coef_weights = np.linalg.solve(G, WB.T)
    except np.linalg.LinAlgError:
        raise SpanTooSmall(f"rank-deficient local design at x0={x0}")
    lvec = coef_weights[0]  # row extracting the fitted value at x0
    return float(lvec @ ys), float(lvec @ lvec)


def loess_fit(
    x: np.ndarray,
    y: np.ndarray,
    span: float = 0.75,
    degree: int = 1,
    grid: np.ndarray = None,
    n_grid: int = 100,
) -> LoessFit:
    """Smooth y on x with span-fraction nearest neighbors and tricube weights."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n < 10:
        raise ValueError(f"need at least 10 points, got {n}")
    if not 0.0 < span <= 1.0:
        raise ValueError("span must lie in (0, 1]")
    q = max(int(np.ceil(span * n)), degree + 2)
    if q > n:
        raise SpanTooSmall(f"span {span} needs {q} neighbors but only {n} points exist")
    if grid is None:
        grid = np.linspace(x.min(), x.max(), n_grid)
    grid = np.asarray(grid, dtype=float)

    order = np.argsort(x)
    xs_sorted = x[order]
    fitted = np.empty(grid.shape[0])
    l2 = np.empty(grid.shape[0])
    for i, x0 in enumerate(grid):
        # q nearest neighbors via the sorted order
        pos = np.searchsorted(xs_sorted, x0)
        lo = min(max(pos - q // 2, 0), n - q)
        hi = lo + q
        # slide the window to the true nearest-q set
        while lo > 0 and x0 - xs_sorted[lo - 1] < xs_sorted[hi - 1] - x0:
            lo -= 1
            hi -= 1
        while hi < n and xs_sorted[hi] - x0 < x0 - xs_sorted[lo]:
            lo += 1
            hi += 1
        idx = order[lo:hi]
        fitted[i], l2[i] = _local_fit(x, y, x0, idx, degree)

    # global residual scale from the fit at the observed points
    resid = y - np.interp(x, grid, fitted)
    dof = max(n - (degree + 1), 1)
    sigma = float(np.sqrt((resid @ resid) / dof))
    return LoessFit(
        grid=grid,
        fitted=fitted,
        band=sigma * np.sqrt(l2),
        span=span,
        degree=degree,
        residual_scale=sigma,
    )

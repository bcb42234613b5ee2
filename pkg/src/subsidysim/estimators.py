"""Switching-effect estimators for the two-period provider panel.

All estimators consume lists of PanelRow and return EstimateResult objects
with cluster-robust inference at the provider level. The two treatment
margins are the bandwidth shares moved to the ad valorem mechanism (s2) and
to its consortium variant (s2c); their period-1 values act as time-invariant
group intensities interacted with the period dummy.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    FoldTooSmall,
    NoSwitchers,
    NuisanceFitFailure,
    UnbalancedPanelForFD,
)
from .simulate import PanelRow
from .stats import DesignMatrix, EstimateResult, linear_contrast, ols_fit
from .stats.forest import forest_fit, forest_predict
from .stats.logit import logit_fit

CATEGORICALS = ("state", "hcp_type", "service_type")


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwfeSpec:
    outcome: str = "ln_price"
    treatment_mode: str = "continuous"  # or "binary"
    covariates: Tuple[str, ...] = ("ln_speed",)
    fe_sets: Tuple[str, ...] = CATEGORICALS
    cluster: str = "hcp_id"

    def __post_init__(self):
        if self.treatment_mode not in ("continuous", "binary"):
            raise ValueError(f"unknown treatment mode {self.treatment_mode!r}")


@dataclass(frozen=True)
class DmlSpec:
    k_folds: int = 10
    learner: str = "forest"  # forest | linear | mean
    n_trees: int = 100
    min_leaf: int = 5
    max_depth: Optional[int] = None
    seed: int = 0
    outcome: str = "ln_price"

    def __post_init__(self):
        if self.k_folds < 2:
            raise ValueError("need at least 2 folds")
        if self.learner not in ("forest", "linear", "mean"):
            raise ValueError(f"unknown learner {self.learner!r}")


# ---------------------------------------------------------------------------
# panel plumbing
# ---------------------------------------------------------------------------

def _col(rows: Sequence[PanelRow], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in rows])


def _dummies(rows, name, drop_first=True):
    """Dummy-encode a categorical column; first level (sorted) dropped."""
    vals = [getattr(r, name) for r in rows]
    levels = sorted(set(vals))
    keep = levels[1:] if drop_first else levels
    cols = [np.array([1.0 if v == lev else 0.0 for v in vals]) for lev in keep]
    names = [f"{name}={lev}" for lev in keep]
    return cols, names


def _paired_by_hcp(rows: Sequence[PanelRow]) -> Dict[str, Dict[int, PanelRow]]:
    by: Dict[str, Dict[int, PanelRow]] = {}
    for r in rows:
        by.setdefault(r.hcp_id, {})[r.period] = r
    return by


def _group_shares(rows) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Period-1 treatment shares per provider, the time-invariant intensities."""
    z2, z2c = {}, {}
    for r in rows:
        if r.period == 1:
            z2[r.hcp_id] = r.s2
            z2c[r.hcp_id] = r.s2c
    return z2, z2c


# ---------------------------------------------------------------------------
# pooled OLS
# ---------------------------------------------------------------------------

def _row_program(r: PanelRow) -> str:
    if r.period == 0:
        return "P1"
    shares = {"P1": 1.0 - r.s2 - r.s2c, "P2": r.s2, "P2c": r.s2c}
    return max(shares, key=shares.get)


def pols_fit(rows: Sequence[PanelRow], outcome: str = "ln_price") -> EstimateResult:
    """Pooled OLS of the log outcome on three program dummies (no intercept),
    log speed, and period/state/type/service dummies.

    Rows are attributed to the program holding their largest bandwidth share.
    The contrast of interest (consortium vs plain ad valorem, beta3 - beta2)
    is attached under ``extra['contrast']``.
    """
    y = _col(rows, outcome)
    progs = [_row_program(r) for r in rows]
    cols = [np.array([1.0 if p == tag else 0.0 for p in progs])
            for tag in ("P1", "P2", "P2c")]
    names = ["P1", "P2", "P2c"]
    cols.append(_col(rows, "ln_speed"))
    names.append("ln_speed")
    cols.append(_col(rows, "period").astype(float))
    names.append("T")
    for cat in CATEGORICALS:
        c, nm = _dummies(rows, cat)
        cols += c
        names += nm
    design = DesignMatrix(np.column_stack(cols), names, cluster=_col(rows, "hcp_id"))
    res = ols_fit(design, y, cov="cluster", on_collinear="drop")
    w = np.zeros(len(res.names))
    if "P2c" in res.names and "P2" in res.names:
        w[res.names.index("P2c")] = 1.0
        w[res.names.index("P2")] = -1.0
        res.extra["contrast"] = linear_contrast(res, w)
    return res


# ---------------------------------------------------------------------------
# two-way fixed effects
# ---------------------------------------------------------------------------

def _binary_restrict(rows):
    """Keep only providers whose period-1 bandwidth sits fully on one program."""
    by = _paired_by_hcp(rows)
    kept, dropped = [], 0
    for hcp, periods in by.items():
        r1 = periods.get(1)
        pure = r1 is None or (r1.s2 in (0.0, 1.0) and r1.s2c in (0.0, 1.0))
        if pure:
            kept.append(hcp)
        else:
            dropped += 1
    kept_set = set(kept)
    return [r for r in rows if r.hcp_id in kept_set], dropped


def twfe_fit(rows: Sequence[PanelRow], spec: TwfeSpec = TwfeSpec()) -> EstimateResult:
    """Two-period difference-in-differences with two treatment intensities.

    Estimates the level equation with a period dummy, group intensities
    Z2/Z2c (period-1 shares; 0/1 indicators in binary mode), their period
    interactions, the named covariates, and dummy sets. The interaction
    coefficients tau_12 and tau_12c are the treatment effects; their
    difference ships under ``extra['contrast']``. SEs cluster by provider.

    A margin with no switchers is dropped from the design and listed in
    ``extra['absent_margins']``; if neither margin has switchers the effects
    are undefined and NoSwitchers is raised. In binary mode providers with
    mixed period-1 participation are removed (count in
    ``extra['n_dropped_mixed']``).
    """
    dropped_mixed = 0
    if spec.treatment_mode == "binary":
        rows, dropped_mixed = _binary_restrict(rows)
    z2, z2c = _group_shares(rows)
    Z2 = np.array([z2.get(r.hcp_id, 0.0) for r in rows])
    Z2c = np.array([z2c.get(r.hcp_id, 0.0) for r in rows])
    T = _col(rows, "period").astype(float)

    absent = []
    if not (Z2 > 0).any():
        absent.append("tau_12")
    if not (Z2c > 0).any():
        absent.append("tau_12c")
    if len(absent) == 2:
        raise NoSwitchers("no provider switched on either margin")

    cols = [np.ones(len(rows))]
    names = ["const"]
    if "tau_12" not in absent:
        cols += [Z2, Z2 * T]
        names += ["z2", "tau_12"]
    if "tau_12c" not in absent:
        cols += [Z2c, Z2c * T]
        names += ["z2c", "tau_12c"]
    cols.append(T)
    names.append("T")
    for cov in spec.covariates:
        cols.append(_col(rows, cov))
        names.append(cov)
    for cat in spec.fe_sets:
        c, nm = _dummies(rows, cat)
        cols += c
        names += nm
    design = DesignMatrix(
        np.column_stack(cols), names, cluster=_col(rows, spec.cluster)
    )
    y = _col(rows, spec.outcome)
    res = ols_fit(design, y, cov="cluster", on_collinear="drop")
    res.extra["absent_margins"] = absent
    res.extra["n_dropped_mixed"] = dropped_mixed
    res.extra["treatment_mode"] = spec.treatment_mode
    if "tau_12" in res.names and "tau_12c" in res.names:
        w = np.zeros(len(res.names))
        w[res.names.index("tau_12c")] = 1.0
        w[res.names.index("tau_12")] = -1.0
        res.extra["contrast"] = linear_contrast(res, w)

    # within R-squared: fit quality on the first-differenced equation
    try:
        fd = first_difference_fit(rows, spec)
        res.r_squared_within = fd.r_squared
    except (UnbalancedPanelForFD, NoSwitchers):
        pass
    return res


def first_difference_fit(
    rows: Sequence[PanelRow], spec: TwfeSpec = TwfeSpec()
) -> EstimateResult:
    """The first-difference form: outcome change on the group intensities.

    Requires a balanced two-period panel. With time-invariant covariates
    this reproduces the level equation's interaction coefficients exactly;
    the intercept is the common trend.
    """
    if spec.treatment_mode == "binary":
        rows, _ = _binary_restrict(rows)
    by = _paired_by_hcp(rows)
    for hcp, periods in by.items():
        if set(periods) != {0, 1}:
            raise UnbalancedPanelForFD(f"provider {hcp} lacks both periods")
    hcps = sorted(by)
    dy = np.array([
        getattr(by[h][1], spec.outcome) - getattr(by[h][0], spec.outcome)
        for h in hcps
    ])
    Z2 = np.array([by[h][1].s2 for h in hcps])
    Z2c = np.array([by[h][1].s2c for h in hcps])
    cols = [np.ones(len(hcps))]
    names = ["T"]  # the FD intercept is the common trend
    absent = []
    if (Z2 > 0).any():
        cols.append(Z2)
        names.append("tau_12")
    else:
        absent.append("tau_12")
    if (Z2c > 0).any():
        cols.append(Z2c)
        names.append("tau_12c")
    else:
        absent.append("tau_12c")
    if len(absent) == 2:
        raise NoSwitchers("no provider switched on either margin")
    design = DesignMatrix(np.column_stack(cols), names, cluster=np.array(hcps))
    res = ols_fit(design, dy, cov="hc1")
    res.extra["absent_margins"] = absent
    if "tau_12" in res.names and "tau_12c" in res.names:
        w = np.zeros(len(res.names))
        w[res.names.index("tau_12c")] = 1.0
        w[res.names.index("tau_12")] = -1.0
        res.extra["contrast"] = linear_contrast(res, w)
    return res


# ---------------------------------------------------------------------------
# double/debiased machine learning, partially linear form
# ---------------------------------------------------------------------------

def _fold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF01D]))
    perm = rng.permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for f in range(k):
        folds[perm[f::k]] = f
    return folds


def _fit_predict(X_train, y_train, X_test, spec: DmlSpec, sub_seed: int):
    if spec.learner == "mean":
        return np.full(X_test.shape[0], float(y_train.mean()))
    if spec.learner == "linear":
        A = np.column_stack([np.ones(X_train.shape[0]), X_train])
        beta, *_ = np.linalg.lstsq(A, y_train, rcond=None)
        return np.column_stack([np.ones(X_test.shape[0]), X_test]) @ beta
    model = forest_fit(
        X_train, y_train, n_trees=spec.n_trees, min_leaf=spec.min_leaf,
        max_depth=spec.max_depth, seed=sub_seed,
    )
    return forest_predict(model, X_test)


def dml_plr(
    Y: np.ndarray,
    S: np.ndarray,
    X: np.ndarray,
    spec: DmlSpec = DmlSpec(),
    treatment_names: Optional[List[str]] = None,
    cluster: Optional[np.ndarray] = None,
) -> EstimateResult:
    """Cross-fitted partially linear estimate of the treatment coefficients.

    The outcome and each treatment column are predicted from the controls by
    off-fold learners; the coefficient solves the normal equations of the
    residual-on-residual regression. The variance is the sandwich built from
    the per-observation scores, optionally aggregated within clusters.
    Cross-fit residuals are returned under ``extra`` for downstream probes.
    """
    Y = np.asarray(Y, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    X = np.asarray(X, dtype=float)
    n, d = S.shape
    if n < 2 * spec.k_folds:
        raise FoldTooSmall(f"{n} rows cannot fill {spec.k_folds} folds twice over")
    if treatment_names is None:
        treatment_names = [f"s{j}" for j in range(d)]

    folds = _fold_assignment(n, spec.k_folds, spec.seed)
    ell_hat = np.empty(n)
    m_hat = np.empty((n, d))
    for f in range(spec.k_folds):
        test = folds == f
        train = ~test
        try:
            ell_hat[test] = _fit_predict(
                X[train], Y[train], X[test], spec, sub_seed=spec.seed * 1000 + f)
            for j in range(d):
                m_hat[test, j] = _fit_predict(
                    X[train], S[train, j], X[test], spec,
                    sub_seed=spec.seed * 1000 + 100 * (j + 1) + f)
        except Exception as exc:  # noqa: BLE001 - refiled with fold context
            raise NuisanceFitFailure(f, exc) from exc

    y_t = Y - ell_hat
    s_t = S - m_hat
    J = s_t.T @ s_t / n
    theta = np.linalg.solve(J * n, s_t.T @ y_t)
    psi = s_t * (y_t - s_t @ theta)[:, None]
    if cluster is not None:
        ids, inv = np.unique(np.asarray(cluster), return_inverse=True)
        agg = np.zeros((ids.shape[0], d))
        np.add.at(agg, inv, psi)
        Sigma = agg.T @ agg / n
    else:
        Sigma = psi.T @ psi / n
    Jinv = np.linalg.inv(J)
    V = Jinv @ Sigma @ Jinv / n

    from .stats.linear import _inference

    res = _inference(treatment_names, theta, V, n, n - d, "dml-sandwich")
    res.extra["residual_outcome"] = y_t
    res.extra["residual_treatments"] = s_t
    res.extra["folds"] = folds
    res.extra["ell_hat"] = ell_hat
    res.extra["m_hat"] = m_hat
    return res


def panel_design_for_dml(
    rows: Sequence[PanelRow], outcome: str = "ln_price"
):
    """Build (Y, S, X, names, cluster) from the panel.

    Treatments are the group intensities and their period interactions;
    controls are the numeric covariates, integer-coded categoricals, and the
    period dummy.
    """
    z2, z2c = _group_shares(rows)
    Z2 = np.array([z2.get(r.hcp_id, 0.0) for r in rows])
    Z2c = np.array([z2c.get(r.hcp_id, 0.0) for r in rows])
    T = _col(rows, "period").astype(float)
    s_cols, s_names = [], []
    if (Z2 > 0).any():
        s_cols += [Z2, Z2 * T]
        s_names += ["z2", "tau_12"]
    if (Z2c > 0).any():
        s_cols += [Z2c, Z2c * T]
        s_names += ["z2c", "tau_12c"]
    if not s_cols:
        raise NoSwitchers("no provider switched on either margin")
    S = np.column_stack(s_cols)
    x_cols = [_col(rows, "ln_speed"), np.log(_col(rows, "n_requests").astype(float)), T]
    for cat in CATEGORICALS:
        levels = sorted({getattr(r, cat) for r in rows})
        code = {lev: i for i, lev in enumerate(levels)}
        x_cols.append(np.array([float(code[getattr(r, cat)]) for r in rows]))
    X = np.column_stack(x_cols)
    Y = _col(rows, outcome)
    return Y, S, X, s_names, _col(rows, "hcp_id")


def dml_plr_fit(rows: Sequence[PanelRow], spec: DmlSpec = DmlSpec()) -> EstimateResult:
    """DML on the panel with the interaction coefficients as the effects."""
    Y, S, X, s_names, cluster = panel_design_for_dml(rows, spec.outcome)
    res = dml_plr(Y, S, X, spec, treatment_names=s_names, cluster=cluster)
    res.extra["absent_margins"] = [
        t for t in ("tau_12", "tau_12c") if t not in s_names
    ]
    if "tau_12" in s_names and "tau_12c" in s_names:
        w = np.zeros(len(s_names))
        w[s_names.index("tau_12c")] = 1.0
        w[s_names.index("tau_12")] = -1.0
        res.extra["contrast"] = linear_contrast(res, w)
    return res


def orthogonality_probe(
    Y: np.ndarray,
    S: np.ndarray,
    X: np.ndarray,
    spec: DmlSpec = DmlSpec(),
    eps: float = 0.01,
    direction: Optional[np.ndarray] = None,
) -> dict:
    """Second-order sensitivity check on the cross-fitted estimate.

    Both nuisance predictions are shifted by eps times a direction that is
    first residualized (in sample) against the treatment residuals and the
    outcome residual, isolating the quadratic term of the estimator's
    expansion: halving eps should quarter the coefficient movement.
    """
    base = dml_plr(Y, S, X, spec)
    y_t = base.extra["residual_outcome"]
    s_t = base.extra["residual_treatments"]
    theta0 = base.coef

    if direction is None:
        x0 = X[:, 0].astype(float)
        sd = x0.std()
        direction = (x0 - x0.mean()) / (sd if sd > 0 else 1.0)
    basis = np.column_stack([s_t, y_t])
    coef, *_ = np.linalg.lstsq(basis, direction, rcond=None)
    h = direction - basis @ coef

    def theta_at(e):
        y_e = y_t - e * h
        s_e = s_t - e * h[:, None]
        return np.linalg.solve(s_e.T @ s_e, s_e.T @ y_e)

    d_full = np.linalg.norm(theta_at(eps) - theta0)
    d_half = np.linalg.norm(theta_at(eps / 2.0) - theta0)
    return {
        "delta_eps": d_full,
        "delta_half_eps": d_half,
        "ratio": d_full / d_half if d_half > 0 else float("inf"),
        "theta": theta0,
    }


# ---------------------------------------------------------------------------
# switching logit
# ---------------------------------------------------------------------------

def switching_logit(
    rows: Sequence[PanelRow],
    cost_ratio: Dict[str, float],
    switched: Dict[str, int],
) -> List[EstimateResult]:
    """The four nested descriptive models of the switching decision.

    The core regressor is the cost-ratio indicator H = 1[p/p_u > 1/0.35];
    successive specifications add period-0 log speed, log price, and log
    request count. Returns one result per specification, each carrying
    McFadden's pseudo R-squared.
    """
    base = [r for r in rows if r.period == 0 and r.hcp_id in cost_ratio]
    hcps = [r.hcp_id for r in base]
    y = np.array([float(switched.get(h, 0)) for h in hcps])
    H = np.array([1.0 if cost_ratio[h] > 1.0 / 0.35 else 0.0 for h in hcps])
    ln_speed = _col(base, "ln_speed")
    ln_price = _col(base, "ln_price")
    ln_req = np.log(_col(base, "n_requests").astype(float))
    const = np.ones(len(base))

    specs = [
        (["const", "H"], [const, H]),
        (["const", "H", "ln_speed"], [const, H, ln_speed]),
        (["const", "H", "ln_speed", "ln_price"], [const, H, ln_speed, ln_price]),
        (["const", "H", "ln_speed", "ln_price", "ln_requests"],
         [const, H, ln_speed, ln_price, ln_req]),
    ]
    out = []
    for names, cols in specs:
        res = logit_fit(DesignMatrix(np.column_stack(cols), names), y)
        out.append(res)
    return out

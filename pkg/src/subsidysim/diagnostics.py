"""Robustness battery for the panel estimates.

Covers trend-violation sensitivity, proportional-selection bounds, influence
trimming, common-support restriction, residualized hump detection, and a
functional-form horse race. Each diagnostic is a pure function of its inputs.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    EmptyAfterRestriction,
    NoControlGroup,
    NonpositiveValues,
    NoSwitchers,
)
from .estimators import TwfeSpec, _col, _group_shares, _paired_by_hcp, twfe_fit
from .simulate import PanelRow
from .stats import DesignMatrix, linear_contrast, loess_fit, ols_fit
from .stats.linear import Z975


# ---------------------------------------------------------------------------
# trend-violation sensitivity
# ---------------------------------------------------------------------------

@dataclass
class SensitivityCurve:
    """Robust estimate beta_did + (1-g) * beta0 over a grid of g.

    g is the ratio of the switchers' counterfactual trend to the control
    trend; g = 1 is parallel trends and reproduces the unadjusted estimate.
    """

    g_grid: np.ndarray
    beta: np.ndarray
    se: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    beta_did: float
    beta_did_se: float
    beta0: float
    zero_crossing: Optional[float]

    def at(self, g: float) -> Tuple[float, float]:
        """Robust estimate and SE at an arbitrary g (exact, curve is affine)."""
        var = (self._v_dd + (1.0 - g) ** 2 * self._v_00
               + 2.0 * (1.0 - g) * self._v_d0)
        return self.beta_did + (1.0 - g) * self.beta0, math.sqrt(max(var, 0.0))

    _v_dd: float = 0.0
    _v_00: float = 0.0
    _v_d0: float = 0.0


def _restrict_to_margin(rows: Sequence[PanelRow], margin: str):
    """Drop providers with any period-1 participation on the other margin."""
    other = "s2c" if margin == "P2" else "s2"
    z2, z2c = _group_shares(rows)
    shares = z2c if margin == "P2" else z2
    keep = {h for h in set(r.hcp_id for r in rows) if shares.get(h, 0.0) == 0.0}
    del other
    return [r for r in rows if r.hcp_id in keep]


def manski_sensitivity(
    rows: Sequence[PanelRow],
    margin: str = "P2",
    g_grid: Optional[np.ndarray] = None,
    outcome: str = "ln_price",
) -> SensitivityCurve:
    """Sensitivity of one margin's effect to a proportional trend violation.

    The panel is first restricted to the margin's switchers plus never-
    switchers; a canonical difference-in-differences with a stand-alone
    period term gives the unadjusted effect and the control trend beta0. The
    robust estimate is affine in g with slope -beta0; its variance follows
    from the joint covariance of the two coefficients.
    """
    if margin not in ("P2", "P2c"):
        raise ValueError("margin must be 'P2' or 'P2c'")
    if g_grid is None:
        g_grid = np.linspace(0.0, 2.0, 41)
    g_grid = np.asarray(g_grid, dtype=float)
    sub = _restrict_to_margin(rows, margin)
    share_name = "s2" if margin == "P2" else "s2c"
    z_by_hcp, zc_by_hcp = _group_shares(sub)
    zmap = z_by_hcp if margin == "P2" else zc_by_hcp
    Z = np.array([zmap.get(r.hcp_id, 0.0) for r in sub])
    if not (Z > 0).any():
        raise NoSwitchers(f"no {margin} switchers after restriction")
    if not (Z == 0).any():
        raise NoControlGroup("no never-switching provider remains")
    T = _col(sub, "period").astype(float)
    X = np.column_stack([np.ones(len(sub)), Z, T, Z * T])
    names = ["const", "z", "T", "zT"]
    res = ols_fit(
        DesignMatrix(X, names, cluster=_col(sub, "hcp_id")), _col(sub, outcome),
        cov="cluster",
    )
    del share_name
    i_dd, i_0 = names.index("zT"), names.index("T")
    b_dd, b_0 = float(res.coef[i_dd]), float(res.coef[i_0])
    v_dd = float(res.cov[i_dd, i_dd])
    v_00 = float(res.cov[i_0, i_0])
    v_d0 = float(res.cov[i_dd, i_0])

    beta = b_dd + (1.0 - g_grid) * b_0
    var = v_dd + (1.0 - g_grid) ** 2 * v_00 + 2.0 * (1.0 - g_grid) * v_d0
    se = np.sqrt(np.clip(var, 0.0, None))
    crossing = 1.0 + b_dd / b_0 if b_0 != 0.0 else None
    return SensitivityCurve(
        g_grid=g_grid, beta=beta, se=se,
        ci_low=beta - Z975 * se, ci_high=beta + Z975 * se,
        beta_did=b_dd, beta_did_se=math.sqrt(max(v_dd, 0.0)), beta0=b_0,
        zero_crossing=crossing,
        _v_dd=v_dd, _v_00=v_00, _v_d0=v_d0,
    )


# ---------------------------------------------------------------------------
# proportional-selection bounds
# ---------------------------------------------------------------------------

@dataclass
class OsterReport:
    beta_short: float
    beta_long: float
    r2_short: float
    r2_long: float
    r2_max: float
    delta: float
    beta_star: float
    verdict: str  # "Computed" | "Stable"


def oster_from_stats(
    beta_short: float,
    beta_long: float,
    r2_short: float,
    r2_long: float,
    r2_max: Optional[float] = None,
) -> OsterReport:
    """Selection ratio delta and the bias-adjusted coefficient at delta = 1.

    With no coefficient movement, or r2_max equal to the long R-squared, the
    ratio is undefined; the verdict is Stable with delta reported infinite
    and the adjusted coefficient equal to the long estimate.
    """
    if r2_short > r2_long:
        raise ValueError("short-model R-squared exceeds the long model's")
    if r2_max is None:
        r2_max = min(1.3 * r2_long, 1.0)
    move = beta_short - beta_long
    gap = r2_max - r2_long
    if move == 0.0 or gap == 0.0 or r2_long == r2_short:
        return OsterReport(
            beta_short=beta_short, beta_long=beta_long, r2_short=r2_short,
            r2_long=r2_long, r2_max=r2_max, delta=float("inf"),
            beta_star=beta_long, verdict="Stable",
        )
    delta = beta_long * (r2_long - r2_short) / (move * gap)
    beta_star = beta_long - move * gap / (r2_long - r2_short)
    return OsterReport(
        beta_short=beta_short, beta_long=beta_long, r2_short=r2_short,
        r2_long=r2_long, r2_max=r2_max, delta=delta, beta_star=beta_star,
        verdict="Computed",
    )


def oster_bounds(
    rows: Sequence[PanelRow],
    margin: str = "tau_12",
    outcome: str = "ln_price",
    short_spec: Optional[TwfeSpec] = None,
    long_spec: Optional[TwfeSpec] = None,
) -> OsterReport:
    """Run the short (no covariates) and long specifications and bound the
    selection on unobservables.

    Uses the level-equation R-squared of each fit: the panel covariates are
    time-invariant, so they only absorb cross-sectional variance and the
    within R-squared would not move between specifications.
    """
    if short_spec is None:
        short_spec = TwfeSpec(outcome=outcome, covariates=(), fe_sets=())
    if long_spec is None:
        long_spec = TwfeSpec(outcome=outcome)
    short = twfe_fit(rows, short_spec)
    long = twfe_fit(rows, long_spec)
    return oster_from_stats(
        beta_short=short[margin],
        beta_long=long[margin],
        r2_short=short.r_squared,
        r2_long=long.r_squared,
    )


# ---------------------------------------------------------------------------
# influence trimming
# ---------------------------------------------------------------------------

@dataclass
class CooksReport:
    flagged_hcps: List[str]
    threshold: float
    n_obs: int
    baseline: dict          # coefficient -> estimate
    trimmed: dict
    delta_pct: dict
    distances: Dict[str, float] = field(default_factory=dict)


def _within_transform(rows, outcome):
    """Provider-demean the outcome and the treatment-period design."""
    by = _paired_by_hcp(rows)
    z2, z2c = _group_shares(rows)
    ys, xs, ids = [], [], []
    for hcp in sorted(by):
        periods = by[hcp]
        ybar = np.mean([getattr(r, outcome) for r in periods.values()])
        tbar = np.mean([r.period for r in periods.values()])
        for t, r in sorted(periods.items()):
            td = t - tbar
            ys.append(getattr(r, outcome) - ybar)
            xs.append([td, z2.get(hcp, 0.0) * td, z2c.get(hcp, 0.0) * td])
            ids.append(hcp)
    return np.array(ys), np.array(xs), ids


def cooks_distances(rows: Sequence[PanelRow], outcome: str) -> Dict[int, float]:
    """Cook's distance per observation of the provider-demeaned regression."""
    y, X, _ = _within_transform(rows, outcome)
    n, k = X.shape
    XtX_inv = np.linalg.pinv(X.T @ X)
    H = X @ XtX_inv @ X.T
    h = np.diag(H)
    resid = y - H @ y
    dof = max(n - k, 1)
    s2 = float(resid @ resid) / dof
    if s2 == 0.0:
        return {i: 0.0 for i in range(n)}
    d = resid ** 2 * h / (k * s2 * np.clip(1.0 - h, 1e-12, None) ** 2)
    return {i: float(v) for i, v in enumerate(d)}


def cooks_trim(
    rows: Sequence[PanelRow],
    outcomes: Sequence[str] = ("ln_price", "ln_subsidy", "ln_netcost"),
    spec: TwfeSpec = TwfeSpec(),
) -> CooksReport:
    """Flag influential observations (distance above 4/N) on each outcome's
    demeaned regression, drop the union of their providers, and refit."""
    _, X, ids = _within_transform(rows, outcomes[0])
    n = X.shape[0]
    threshold = 4.0 / n
    flagged = set()
    max_d: Dict[str, float] = {}
    for outcome in outcomes:
        dists = cooks_distances(rows, outcome)
        for i, dist in dists.items():
            hcp = ids[i]
            max_d[hcp] = max(max_d.get(hcp, 0.0), dist)
            if dist > threshold:
                flagged.add(hcp)
    baseline = twfe_fit(rows, spec)
    kept = [r for r in rows if r.hcp_id not in flagged]
    trimmed = twfe_fit(kept, spec) if flagged else baseline
    keys = [nm for nm in ("tau_12", "tau_12c") if nm in baseline.names]
    base = {kk: baseline[kk] for kk in keys}
    trim = {kk: trimmed[kk] for kk in keys if kk in trimmed.names}
    delta = {
        kk: 100.0 * (trim[kk] - base[kk]) / abs(base[kk]) if base[kk] != 0 else 0.0
        for kk in trim
    }
    return CooksReport(
        flagged_hcps=sorted(flagged), threshold=threshold, n_obs=n,
        baseline=base, trimmed=trim, delta_pct=delta, distances=max_d,
    )


# ---------------------------------------------------------------------------
# common support
# ---------------------------------------------------------------------------

@dataclass
class SupportReport:
    speed_range: Tuple[float, float]
    n_dropped: int
    baseline: dict
    restricted: dict
    delta_pct: dict


def common_support(
    rows: Sequence[PanelRow],
    anchor_program: str = "P2c",
    spec: TwfeSpec = TwfeSpec(),
    speed_range: Optional[Tuple[float, float]] = None,
) -> SupportReport:
    """Restrict to providers whose pre-period speed falls inside the anchor
    program's pre-period speed range, then refit."""
    z2, z2c = _group_shares(rows)
    anchor_share = z2c if anchor_program == "P2c" else z2
    pre_speed = {r.hcp_id: r.speed_mbps for r in rows if r.period == 0}
    if speed_range is None:
        anchor_speeds = [
            s for h, s in pre_speed.items() if anchor_share.get(h, 0.0) > 0.0
        ]
        if not anchor_speeds:
            raise NoSwitchers(f"no provider on the anchor program {anchor_program}")
        speed_range = (min(anchor_speeds), max(anchor_speeds))
    lo, hi = speed_range
    keep = {h for h, s in pre_speed.items() if lo <= s <= hi}
    if not keep:
        raise EmptyAfterRestriction("speed restriction removed every provider")
    kept_rows = [r for r in rows if r.hcp_id in keep]
    baseline = twfe_fit(rows, spec)
    restricted = twfe_fit(kept_rows, spec)
    keys = [nm for nm in ("tau_12", "tau_12c") if nm in baseline.names]
    base = {kk: baseline[kk] for kk in keys}
    rest = {kk: restricted[kk] for kk in keys if kk in restricted.names}
    delta = {
        kk: 100.0 * (rest[kk] - base[kk]) / abs(base[kk]) if base[kk] != 0 else 0.0
        for kk in rest
    }
    return SupportReport(
        speed_range=speed_range, n_dropped=len(pre_speed) - len(keep),
        baseline=base, restricted=rest, delta_pct=delta,
    )


# ---------------------------------------------------------------------------
# residualized hump detection
# ---------------------------------------------------------------------------

@dataclass
class ConsortiumYearRow:
    """One consortium-year observation for the hump analysis."""

    consortium_id: str
    year: int
    ln_price: float
    frac_ineligible: float
    mean_bidders: float
    ln_mean_speed: float
    ln_total_speed: float


@dataclass
class HumpReport:
    frac_resid: np.ndarray      # residualized fraction, re-centered
    price_resid: np.ndarray     # residualized log price, re-centered
    grid: np.ndarray
    fitted: np.ndarray
    band: np.ndarray
    max_location: float
    max_value: float
    verdict: str                # InvertedU | Monotone | Flat
    fwl_slope: float
    full_coef: float
    degenerate_fraction: bool = False


def fwl_hump(
    rows: Sequence[ConsortiumYearRow],
    span: float = 0.75,
) -> HumpReport:
    """Partial out the controls, then smooth residualized log price on the
    residualized ineligible fraction and classify the shape.

    InvertedU needs an interior maximum with the rise and the fall each
    exceeding the pointwise band half-width; a significant end-to-end change
    without an interior peak is Monotone; anything else is Flat.
    """
    if len(rows) < 50:
        raise ValueError(f"need at least 50 consortium rows, got {len(rows)}")
    n = len(rows)
    price = np.array([r.ln_price for r in rows])
    frac = np.array([r.frac_ineligible for r in rows])
    if float(np.ptp(frac)) == 0.0:
        return HumpReport(
            frac_resid=frac, price_resid=price, grid=np.array([frac[0]]),
            fitted=np.array([price.mean()]), band=np.array([0.0]),
            max_location=frac[0], max_value=price.mean(), verdict="Flat",
            fwl_slope=0.0, full_coef=0.0, degenerate_fraction=True,
        )

    cols = [np.ones(n),
            np.array([r.mean_bidders for r in rows]),
            np.array([r.ln_mean_speed for r in rows]),
            np.array([r.ln_total_speed for r in rows])]
    names = ["const", "mean_bidders", "ln_mean_speed", "ln_total_speed"]
    for attr in ("year", "consortium_id"):
        vals = [getattr(r, attr) for r in rows]
        levels = sorted(set(vals))
        for lev in levels[1:]:
            cols.append(np.array([1.0 if v == lev else 0.0 for v in vals]))
            names.append(f"{attr}={lev}")
    C = DesignMatrix(np.column_stack(cols), names)
    res_p = ols_fit(C, price, on_collinear="drop")
    res_f = ols_fit(C, frac, on_collinear="drop")
    kept = res_p.names
    Ck = C.X[:, [names.index(nm) for nm in kept]]
    price_r = price - Ck @ res_p.coef
    frac_r = frac - Ck @ res_f.coef

    # FWL cross-check: residual-on-residual slope vs the joint regression
    slope = float(frac_r @ price_r / (frac_r @ frac_r))
    joint = DesignMatrix(
        np.column_stack([frac] + cols), ["frac"] + names
    )
    res_joint = ols_fit(joint, price, on_collinear="drop")
    full_coef = res_joint["frac"] if "frac" in res_joint.names else float("nan")

    # re-center at the original means before smoothing
    frac_c = frac_r + frac.mean()
    price_c = price_r + price.mean()
    fit = loess_fit(frac_c, price_c, span=span)

    # classify on a lightly trimmed grid: the outermost cells rest on a
    # handful of observations and their band understates the edge noise
    n_g = len(fit.grid)
    lo_i = max(int(0.05 * n_g), 1)
    hi_i = n_g - 1 - lo_i
    seg = slice(lo_i, hi_i + 1)
    i_max = lo_i + int(np.argmax(fit.fitted[seg]))
    interior = lo_i < i_max < hi_i

    def significant(i, j):
        gap = abs(fit.fitted[i] - fit.fitted[j])
        return gap > 3.0 * math.hypot(fit.band[i], fit.band[j])

    if interior and significant(i_max, lo_i) and significant(i_max, hi_i):
        verdict = "InvertedU"
    elif significant(lo_i, hi_i):
        verdict = "Monotone"
    else:
        verdict = "Flat"
    return HumpReport(
        frac_resid=frac_c, price_resid=price_c, grid=fit.grid,
        fitted=fit.fitted, band=fit.band,
        max_location=float(fit.grid[i_max]), max_value=float(fit.fitted[i_max]),
        verdict=verdict, fwl_slope=slope, full_coef=full_coef,
    )


# ---------------------------------------------------------------------------
# functional-form comparison
# ---------------------------------------------------------------------------

@dataclass
class FormFit:
    name: str
    formula: str
    log_outcome: bool
    adj_r2: float
    rmse: float
    coef: np.ndarray
    rank: int = 0


_FORMS = (
    ("quadratic", "P ~ S + S^2", False,
     lambda S: np.column_stack([np.ones_like(S), S, S ** 2])),
    ("lin-log", "P ~ ln S", False,
     lambda S: np.column_stack([np.ones_like(S), np.log(S)])),
    ("lin-sqrt", "P ~ sqrt S", False,
     lambda S: np.column_stack([np.ones_like(S), np.sqrt(S)])),
    ("log-quadratic", "ln P ~ ln S + (ln S)^2", True,
     lambda S: np.column_stack([np.ones_like(S), np.log(S), np.log(S) ** 2])),
    ("log-log", "ln P ~ ln S", True,
     lambda S: np.column_stack([np.ones_like(S), np.log(S)])),
    ("linear", "P ~ S", False,
     lambda S: np.column_stack([np.ones_like(S), S])),
    ("log-sqrt", "ln P ~ sqrt S", True,
     lambda S: np.column_stack([np.ones_like(S), np.sqrt(S)])),
    ("log-linear", "ln P ~ S", True,
     lambda S: np.column_stack([np.ones_like(S), S])),
)


def functional_form_comparison(price: np.ndarray, speed: np.ndarray) -> List[FormFit]:
    """Fit the eight price-on-speed forms and rank them by adjusted R-squared
    on the price scale.

    Log-outcome models are back-transformed by plain exponentiation (no
    smearing correction), so their price-scale fit can be negative.
    """
    price = np.asarray(price, dtype=float)
    speed = np.asarray(speed, dtype=float)
    if (price <= 0).any() or (speed <= 0).any():
        raise NonpositiveValues("price and speed must be strictly positive")
    n = price.shape[0]
    sst = float(((price - price.mean()) ** 2).sum())
    out = []
    for name, formula, log_y, build in _FORMS:
        X = build(speed)
        y = np.log(price) if log_y else price
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        pred = X @ beta
        if log_y:
            pred = np.exp(pred)
        sse = float(((price - pred) ** 2).sum())
        r2 = 1.0 - sse / sst
        k = X.shape[1]
        adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
        out.append(FormFit(
            name=name, formula=formula, log_outcome=log_y,
            adj_r2=adj, rmse=math.sqrt(sse / n), coef=beta,
        ))
    out.sort(key=lambda f: f.adj_r2, reverse=True)
    for i, f in enumerate(out):
        f.rank = i + 1
    return out

"""Monopoly equilibria under three subsidy mechanisms.

A monopolist serves a subsidized buyer. Three reimbursement designs are
solved here:

* no subsidy: the textbook monopoly price;
* price cap: the buyer pays at most ``pbar``, the government reimburses the
  gap, and overbilling is restrained only by an expected quadratic penalty;
* ad valorem: the government pays a share ``tau`` of the billed price, which
  is equivalent to a monopoly facing effective marginal cost ``c*(1-tau)``.

A consortium variant of the ad valorem design lets a group mix subsidized
and unsubsidized members and inflate the subsidized member's internal price
(distortion ratio ``kappa``) to extract extra reimbursement.

All solvers are pure functions: no shared mutable state, safe to call
concurrently, results independent of call order.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    CapNotBinding,
    NoBracket,
    NonpositiveQuantity,
    PreconditionUnmet,
    RevenueNeutralityViolation,
    ZeroDemand,
)
from .optimize import bisect_root, golden_section_max

PRICE_TOL = 1e-10


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemandSpec:
    """A strictly decreasing demand curve.

    Either linear ``D(p) = a - b*p`` (closed forms available) or a general
    callable with its derivative and a bracketing interval for numeric
    maximization. General demand is spot-checked for monotonicity on a grid
    at construction.
    """

    a: Optional[float] = None
    b: Optional[float] = None
    evaluator: Optional[Callable[[float], float]] = None
    derivative: Optional[Callable[[float], float]] = None
    support_hint: Optional[tuple] = None

    def __post_init__(self):
        if self.evaluator is None:
            if self.a is None or self.b is None:
                raise ValueError("linear demand needs both a and b")
            if not (self.a > 0 and self.b > 0):
                raise ValueError("linear demand requires a > 0 and b > 0")
        else:
            if self.derivative is None or self.support_hint is None:
                raise ValueError("general demand needs derivative and support_hint")
            lo, hi = self.support_hint
            if not lo < hi:
                raise ValueError("support_hint must be a nonempty interval")
            # monotonicity spot check wherever demand is positive
            grid = [lo + (hi - lo) * k / 16.0 for k in range(17)]
            vals = [self.evaluator(p) for p in grid]
            for (p1, q1), (p2, q2) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
                if q1 > 0 and q2 >= q1 + 1e-12 * max(1.0, abs(q1)):
                    raise ValueError(f"demand not decreasing between p={p1} and p={p2}")

    @property
    def is_linear(self) -> bool:
        return self.evaluator is None

    def quantity(self, p: float) -> float:
        if self.is_linear:
            return self.a - self.b * p
        return self.evaluator(p)

    def slope(self, p: float) -> float:
        if self.is_linear:
            return -self.b
        return self.derivative(p)


def linear_demand(a: float, b: float) -> DemandSpec:
    return DemandSpec(a=a, b=b)


@dataclass(frozen=True)
class MarketParams:
    """Mechanism environment: cost, cap, subsidy rate, enforcement."""

    c: float
    pbar: float
    tau: float
    alpha: float
    gamma: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("marginal cost must be >= 0")
        if self.pbar <= 0:
            raise ValueError("price cap must be > 0")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("subsidy rate must lie in (0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("audit probability must lie in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("penalty curvature must be > 0")


@dataclass(frozen=True)
class EquilibriumOutcome:
    """Solver output for any mechanism.

    ``p`` is the billed price, ``p_c`` the buyer's net price, ``Q`` quantity,
    ``E`` buyer expenditure, ``G`` government outlay, ``pi`` monopoly profit.
    """

    p: float
    p_c: float
    Q: float
    E: float
    G: float
    pi: float
    regime_tag: str  # NoSubsidy | CapBinding | CapSlack | AdValorem


@dataclass(frozen=True)
class ConsortiumParams:
    """Reduced-form consortium problem: subsidy base B, revenue ratio R."""

    B: float
    R: float
    alpha: float
    gamma: float

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("eligible subsidy base must be > 0")
        if self.R < 0:
            raise ValueError("revenue ratio must be >= 0")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("audit probability must lie in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("penalty curvature must be > 0")


@dataclass(frozen=True)
class ConsortiumOutcome:
    kappa_star: float
    regime: str  # FeasibilityBound | EnforcementInterior | NoDistortion
    delta_C: float
    delta_G: float
    tilde_p_E: Optional[float] = None
    tilde_p_I: Optional[float] = None
    B: Optional[float] = None
    R: Optional[float] = None


# ---------------------------------------------------------------------------
# elasticity and the unsubsidized benchmark
# ---------------------------------------------------------------------------

def elasticity(demand: DemandSpec, p: float) -> float:
    """Price elasticity of demand, -p*D'(p)/D(p), at price ``p``."""
    q = demand.quantity(p)
    if q <= 0:
        raise ZeroDemand(f"demand is {q} at p={p}")
    return -p * demand.slope(p) / q


def solve_monopoly_price(demand: DemandSpec, c: float) -> EquilibriumOutcome:
    """Unsubsidized monopoly equilibrium.

    Linear demand uses the closed form ``p = (a/b + c)/2``; general demand
    maximizes ``(p-c) D(p)`` by golden-section search on the support hint.
    """
    if demand.is_linear:
        if demand.a <= demand.b * c:
            raise NonpositiveQuantity(
                f"a={demand.a} <= b*c={demand.b * c}: no positive-quantity equilibrium"
            )
        p = 0.5 * (demand.a / demand.b + c)
    else:
        lo, hi = demand.support_hint
        lo = max(lo, c)
        profit = lambda p: (p - c) * demand.quantity(p)
        if hi <= lo:
            raise NoBracket(f"support hint [{lo}, {hi}] cannot bracket a maximizer above c={c}")
        p = golden_section_max(profit, lo, hi, tol=PRICE_TOL)
        edge = 1e-6 * (hi - lo)
        if p - lo < edge or hi - p < edge:
            raise NoBracket(f"maximizer p={p} pinned to the support hint edge [{lo}, {hi}]")
        # golden section localizes a smooth maximum only to ~sqrt(eps); polish
        # by bisecting the first-order condition D(p) + (p-c) D'(p) = 0 on a
        # window around the search result
        foc = lambda x: demand.quantity(x) + (x - c) * demand.slope(x)
        w = 1e-4 * max(1.0, abs(p))
        plo, phi = max(lo, p - w), min(hi, p + w)
        if foc(plo) > 0.0 > foc(phi):
            p = bisect_root(foc, plo, phi, tol=1e-13 * max(1.0, abs(p)))
    q = demand.quantity(p)
    if q <= 0:
        raise NonpositiveQuantity(f"quantity {q} at the candidate monopoly price {p}")
    return EquilibriumOutcome(
        p=p, p_c=p, Q=q, E=p * q, G=0.0, pi=(p - c) * q, regime_tag="NoSubsidy"
    )


# ---------------------------------------------------------------------------
# price cap
# ---------------------------------------------------------------------------

def _cap_regime_profit(demand: DemandSpec, params: MarketParams) -> float:
    """Maximized profit in the capped regime under the quadratic penalty."""
    qbar = demand.quantity(params.pbar)
    ag = params.alpha * params.gamma
    # p_cap = pbar + D(pbar)/(alpha*gamma); plug back in:
    # (pbar - c) D(pbar) + D(pbar)^2 / (2 alpha gamma)
    return (params.pbar - params.c) * qbar + qbar * qbar / (2.0 * ag)


def cap_binds(demand: DemandSpec, params: MarketParams) -> bool:
    """Whether the cap regime prevails.

    True when the cap sits below the monopoly price, and also when it sits
    above it but enforcement is so weak that the overbilling rent at the cap
    beats the unconstrained monopoly profit (global comparison).
    """
    no = solve_monopoly_price(demand, params.c)
    if params.pbar < no.p:
        return True
    qbar = demand.quantity(params.pbar)
    if qbar <= 0:
        return False
    return _cap_regime_profit(demand, params) > no.pi


def solve_price_cap(demand: DemandSpec, params: MarketParams) -> EquilibriumOutcome:
    """Equilibrium under the price cap with quadratic penalty.

    When the cap binds the billed price is ``pbar + D(pbar)/(alpha*gamma)``;
    the buyer pays ``pbar`` and the government covers the gap. If the cap
    does not bind the unconstrained outcome is returned, tagged CapSlack.
    """
    if not cap_binds(demand, params):
        no = solve_monopoly_price(demand, params.c)
        return EquilibriumOutcome(
            p=no.p, p_c=no.p_c, Q=no.Q, E=no.E, G=0.0, pi=no.pi, regime_tag="CapSlack"
        )
    qbar = demand.quantity(params.pbar)
    if qbar <= 0:
        raise NonpositiveQuantity(f"demand is {qbar} at the cap {params.pbar}")
    ag = params.alpha * params.gamma
    p = params.pbar + qbar / ag
    g = qbar * qbar / ag
    pi = (p - params.c) * qbar - 0.5 * ag * (p - params.pbar) ** 2
    return EquilibriumOutcome(
        p=p, p_c=params.pbar, Q=qbar, E=params.pbar * qbar, G=g, pi=pi,
        regime_tag="CapBinding",
    )


# ---------------------------------------------------------------------------
# ad valorem
# ---------------------------------------------------------------------------

def solve_ad_valorem(demand: DemandSpec, params: MarketParams) -> EquilibriumOutcome:
    """Ad valorem equilibrium via the effective-marginal-cost representation.

    The buyer price equals the monopoly price at cost ``c*(1-tau)``; the
    billed price grosses it up by ``1/(1-tau)``.
    """
    tau = params.tau
    eff = solve_monopoly_price(demand, params.c * (1.0 - tau))
    p_c = eff.p
    p = p_c / (1.0 - tau)
    q = demand.quantity(p_c)
    return EquilibriumOutcome(
        p=p, p_c=p_c, Q=q, E=p_c * q, G=tau * p * q, pi=(p - params.c) * q,
        regime_tag="AdValorem",
    )


def critical_tau(demand: DemandSpec, c: float, pbar: float) -> Optional[float]:
    """Smallest subsidy rate at which the ad valorem buyer price reaches the cap.

    Returns None when the market power is so extreme that no rate in (0,1)
    brings the buyer price down to ``pbar`` (zero-cost monopoly price already
    at or above the cap). Requires a binding cap, ``pbar <= p_no``.
    """
    no = solve_monopoly_price(demand, c)
    if pbar > no.p:
        raise CapNotBinding(f"pbar={pbar} exceeds the monopoly price {no.p}")
    if pbar == no.p:
        return 0.0
    zero_cost = solve_monopoly_price(demand, 0.0)
    if pbar <= zero_cost.p + PRICE_TOL:
        return None

    def gap(tau):
        return solve_monopoly_price(demand, c * (1.0 - tau)).p - pbar

    tau = bisect_root(gap, 0.0, 1.0 - 1e-9, tol=1e-10)
    if demand.is_linear:
        closed = 2.0 * (no.p - pbar) / c
        assert abs(tau - closed) < 1e-6, (tau, closed)
        tau = closed
    return tau


# ---------------------------------------------------------------------------
# consortium
# ---------------------------------------------------------------------------

def consortium_optimum(params: ConsortiumParams) -> ConsortiumOutcome:
    """Optimal internal price distortion for the reduced-form consortium.

    Maximizes reimbursement extraction net of the expected penalty over the
    distortion ratio kappa in [1, 1+R]. Under the quadratic penalty,
    ``kappa* = min(1+R, 1 + 1/(alpha*gamma*B*R))``, hump-shaped in R with
    peak at ``R* = 1/sqrt(alpha*gamma*B)``. Ties at R = R* are reported as
    EnforcementInterior (the branches coincide there).
    """
    B, R = params.B, params.R
    if R == 0.0:
        return ConsortiumOutcome(
            kappa_star=1.0, regime="NoDistortion", delta_C=0.0, delta_G=0.0, B=B, R=R
        )
    agb = params.alpha * params.gamma * B
    interior = 1.0 + 1.0 / (agb * R)
    feasible = 1.0 + R
    r_star = 1.0 / (agb ** 0.5)
    if R < r_star:
        kappa, regime = feasible, "FeasibilityBound"
    else:
        kappa, regime = min(interior, feasible), "EnforcementInterior"
    dc = B * (kappa - 1.0)
    return ConsortiumOutcome(
        kappa_star=kappa, regime=regime, delta_C=dc, delta_G=dc, B=B, R=R
    )


def consortium_from_markets(
    demand_E: DemandSpec,
    demand_I: DemandSpec,
    c: float,
    tau: float,
    alpha: float,
    gamma: float,
    tol: float = 1e-8,
) -> ConsortiumOutcome:
    """Consortium optimum built from the two member markets.

    Solves the eligible member's ad valorem equilibrium and the ineligible
    member's plain monopoly equilibrium, forms the subsidy base B and the
    revenue ratio R, and reallocates internal prices subject to revenue
    neutrality: total billed revenue is unchanged, the eligible bill is
    inflated by kappa*, and the ineligible bill absorbs the difference.
    """
    mp = MarketParams(c=c, pbar=1.0, tau=tau, alpha=alpha, gamma=gamma)
    elig = solve_ad_valorem(demand_E, mp)
    inel = solve_monopoly_price(demand_I, c)
    rev_e = elig.p * elig.Q
    rev_i = inel.p * inel.Q
    B = tau * rev_e
    R = rev_i / rev_e
    base = consortium_optimum(ConsortiumParams(B=B, R=R, alpha=alpha, gamma=gamma))
    tilde_p_e = base.kappa_star * elig.p
    tilde_p_i = (rev_e + rev_i - tilde_p_e * elig.Q) / inel.Q
    if tilde_p_i < -tol * max(1.0, inel.p):
        raise RevenueNeutralityViolation(
            f"reallocated ineligible price {tilde_p_i} is negative"
        )
    tilde_p_i = max(tilde_p_i, 0.0)
    total_before = rev_e + rev_i
    total_after = tilde_p_e * elig.Q + tilde_p_i * inel.Q
    if abs(total_after - total_before) > tol * max(1.0, total_before):
        raise RevenueNeutralityViolation(
            f"revenue changed from {total_before} to {total_after}"
        )
    return ConsortiumOutcome(
        kappa_star=base.kappa_star,
        regime=base.regime,
        delta_C=base.delta_C,
        delta_G=base.delta_G,
        tilde_p_E=tilde_p_e,
        tilde_p_I=tilde_p_i,
        B=B,
        R=R,
    )


# ---------------------------------------------------------------------------
# mechanism comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DominanceReport:
    """The four cap-vs-ad-valorem comparisons, each with its pass flag.

    The expenditure comparison applies only when demand is inelastic between
    the two buyer prices; outside that condition it is skipped, not failed.
    The outlay comparison is a weak-enforcement statement: it passes when a
    positive enforcement threshold exists below which the ad valorem outlay
    is smaller. ``outlay_lower_current`` reports the comparison at the
    supplied enforcement level for reference.
    """

    consumer_price_lower: bool
    quantity_higher: bool
    expenditure_lower: Optional[bool]  # None when the elasticity condition fails
    expenditure_condition_met: bool
    outlay_small_enforcement_verified: bool
    outlay_lower_current: bool
    alpha_gamma_threshold: float
    cap: EquilibriumOutcome = field(repr=False, default=None)
    adv: EquilibriumOutcome = field(repr=False, default=None)

    @property
    def all_applicable_pass(self) -> bool:
        parts = [
            self.consumer_price_lower,
            self.quantity_higher,
            self.outlay_small_enforcement_verified,
        ]
        if self.expenditure_condition_met:
            parts.append(self.expenditure_lower)
        return all(parts)


def dominance_report(demand: DemandSpec, params: MarketParams) -> DominanceReport:
    """Compare the binding cap against the ad valorem mechanism.

    Requires the cap to bind and ``tau >= tau*``. The expenditure comparison
    is evaluated only when demand is inelastic on the price interval between
    the two buyer prices. The outlay comparison additionally reports the
    enforcement level below which the ad valorem outlay is the smaller one,
    found by bisection on ``alpha*gamma``.
    """
    if not cap_binds(demand, params):
        raise PreconditionUnmet("price cap does not bind")
    tstar = critical_tau(demand, params.c, params.pbar)
    if tstar is None or params.tau < tstar - 1e-12:
        raise PreconditionUnmet(f"tau={params.tau} below the critical rate {tstar}")
    cap = solve_price_cap(demand, params)
    adv = solve_ad_valorem(demand, params)
    tol = 1e-9 * max(1.0, params.pbar)

    part_i = adv.p_c <= cap.p_c + tol
    part_ii = adv.Q >= cap.Q - 1e-9 * max(1.0, cap.Q)

    grid = [adv.p_c + (params.pbar - adv.p_c) * k / 32.0 for k in range(33)]
    cond = all(elasticity(demand, p) <= 1.0 + 1e-12 for p in grid if demand.quantity(p) > 0)
    part_iii = (adv.E <= cap.E + 1e-9 * max(1.0, cap.E)) if cond else None

    # G_cap = D(pbar)^2 / (alpha*gamma) is decreasing in alpha*gamma while
    # G_adv does not depend on it; bisect for the crossing on a log bracket.
    qbar = demand.quantity(params.pbar)

    def outlay_gap(log_ag):
        return qbar * qbar / (10.0 ** log_ag) - adv.G

    threshold = 10.0 ** bisect_root(outlay_gap, -12.0, 12.0, tol=1e-12)
    half = 0.5 * threshold
    part_iv = threshold > 0.0 and qbar * qbar / half > adv.G

    return DominanceReport(
        consumer_price_lower=part_i,
        quantity_higher=part_ii,
        expenditure_lower=part_iii,
        expenditure_condition_met=cond,
        outlay_small_enforcement_verified=part_iv,
        outlay_lower_current=adv.G < cap.G,
        alpha_gamma_threshold=threshold,
        cap=cap,
        adv=adv,
    )

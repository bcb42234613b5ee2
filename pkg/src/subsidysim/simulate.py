"""Synthetic two-period provider panels with known switching effects.

Every facility starts period 0 under a binding price cap. Between periods a
common trend scales all monetary primitives, and facilities whose cost ratio
favors it switch to the ad valorem mechanism (a configured fraction through a
consortium that inflates the eligible bill by its optimal distortion ratio).
Because the linear-demand equilibria are homogeneous of degree one in
(a, c, pbar), the trend moves every log price by exactly the trend parameter
and the true switching effects are scale-free and known by construction.

Randomness: the population is drawn from a generator seeded by the scenario
seed; all per-facility draws (urban benchmark, switching noise, outcome
noise) come from substreams keyed by (seed, replication, facility id), so
results cannot depend on execution order or thread count.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import CapNotBinding, EmptyHcp, RejectionLimit
from .mechanisms import (
    ConsortiumParams,
    MarketParams,
    consortium_optimum,
    critical_tau,
    linear_demand,
    solve_ad_valorem,
    solve_price_cap,
)

HCP_TYPES = ("clinic", "hospital", "mental_health", "rural_clinic")
SERVICE_TYPES = ("dsl", "fiber", "fixed_wireless")
STATES = ("AK", "KS", "MN", "MT", "NM", "OK", "TX", "WV")

P1, P2, P2C = "P1", "P2", "P2c"


@dataclass(frozen=True)
class Facility:
    facility_id: int
    hcp_id: str
    a: float
    b: float
    c: float
    pbar: float
    p_u: float          # urban benchmark price
    Q: float            # bandwidth weight, Mbps
    hcp_type: str
    service_type: str
    state: str
    n_requests: int

    @property
    def ln_speed(self) -> float:
        return math.log(self.Q)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything the generator needs; the seed is mandatory."""

    seed: int
    n_hcps: int = 970
    facilities_per_hcp_mean: float = 2.0
    a_range: Tuple[float, float] = (90.0, 110.0)
    b: float = 1.0
    c_range: Tuple[float, float] = (18.0, 22.0)
    speed_coef: float = 2.0           # demand intercept shift per unit ln speed
    tau: float = 0.65
    alpha: float = 0.5
    gamma: float = 0.2
    consortium_alpha: float = 0.5
    # enforcement pressure alpha*gamma*B held constant across consortia
    # (penalty curvature scales inversely with the subsidy base), so the
    # optimal distortion ratio is comparable across providers of any size
    consortium_agb: float = 0.4
    consortium_r_spread: float = 0.9  # R drawn log-uniformly in [0.9 R*, R*/0.9]
    pbar_ratio_range: Tuple[float, float] = (0.92, 0.96)
    urban_ratio_center: float = 3.5   # median of p0 / p_u
    urban_ratio_sigma: float = 0.5
    switch_noise_scale: float = 1.0
    p2c_fraction: float = 0.10
    trend_lambda: float = 0.05
    trend_violation_g: float = 1.0
    outcome_noise_scale: float = 0.10
    speed_log_mean: float = math.log(25.0)
    speed_log_sigma: float = 0.8
    rejection_limit: int = 1_000_000

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("seed is mandatory")
        if self.n_hcps < 0:
            raise ValueError("n_hcps must be >= 0")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        lo, hi = self.pbar_ratio_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("pbar ratios must lie in (0, 1) with lo <= hi")
        if self.switch_noise_scale < 0 or self.outcome_noise_scale < 0:
            raise ValueError("noise scales must be >= 0")
        if not 0.0 <= self.p2c_fraction <= 1.0:
            raise ValueError("p2c_fraction must lie in [0, 1]")
        if self.consortium_agb <= 0:
            raise ValueError("consortium enforcement pressure must be > 0")
        if not 0.0 < self.consortium_r_spread <= 1.0:
            raise ValueError("consortium_r_spread must lie in (0, 1]")


@dataclass
class PanelRow:
    """One provider-period observation, the estimators' unit of analysis."""

    hcp_id: str
    period: int
    ln_price: float
    ln_subsidy: float
    ln_netcost: float
    s2: float
    s2c: float
    ln_speed: float
    hcp_type: str
    service_type: str
    state: str
    n_requests: int
    speed_mbps: float
    # level-aggregation variant: bandwidth-weighted mean of the level
    # outcomes (the within-provider sum is this times speed_mbps)
    price_level: float = float("nan")
    subsidy_level: float = float("nan")
    netcost_level: float = float("nan")


@dataclass
class FacilityOutcome:
    """Per-facility per-period realized outcome plus bookkeeping."""

    facility_id: int
    hcp_id: str
    period: int
    program: str
    Q: float
    price: float        # billed price per unit, with outcome noise
    subsidy: float      # government share per unit
    netcost: float      # buyer share per unit
    ln_speed: float
    hcp_type: str
    service_type: str
    state: str
    n_requests: int


@dataclass
class GroundTruth:
    """Scenario truth, recomputable from the per-facility records."""

    tau_12: Optional[float]
    tau_12c: Optional[float]
    switch_rate_p2: float
    switch_rate_p2c: float
    n_facilities: int
    trend_lambda: float
    trend_violation_g: float
    # per facility: (facility_id, hcp_id, program, Q, effect, cost_ratio, kappa, R)
    facility_records: List[dict] = field(default_factory=list)
    hcp_cost_ratio: Dict[str, float] = field(default_factory=dict)
    hcp_switched: Dict[str, int] = field(default_factory=dict)

    @property
    def no_switchers(self) -> bool:
        return self.tau_12 is None and self.tau_12c is None


def _substream(config: ScenarioConfig, replication: int, facility_id: int):
    return np.random.default_rng(
        np.random.SeedSequence([int(config.seed), int(replication), int(facility_id)])
    )


def generate_population(config: ScenarioConfig) -> List[Facility]:
    """Draw the facility population; deterministic in the scenario seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0xFACE]))
    facilities = []
    fid = 0
    attempts = 0
    type_shift = {t: s for t, s in zip(HCP_TYPES, (0.0, 6.0, -3.0, -6.0))}
    for j in range(config.n_hcps):
        hcp_id = f"hcp{j:05d}"
        n_fac = 1 + rng.poisson(max(config.facilities_per_hcp_mean - 1.0, 0.0))
        hcp_type = HCP_TYPES[rng.integers(len(HCP_TYPES))]
        service = SERVICE_TYPES[rng.integers(len(SERVICE_TYPES))]
        state = STATES[rng.integers(len(STATES))]
        n_req = int(1 + rng.poisson(2.0))
        for _ in range(n_fac):
            while True:
                attempts += 1
                if attempts > config.rejection_limit:
                    raise RejectionLimit(
                        f"no admissible facility draw in {config.rejection_limit} attempts"
                    )
                Q = float(np.clip(rng.lognormal(config.speed_log_mean,
                                                config.speed_log_sigma), 1.5, 500.0))
                a = (rng.uniform(*config.a_range)
                     + config.speed_coef * (math.log(Q) - config.speed_log_mean)
                     + type_shift[hcp_type])
                c = rng.uniform(*config.c_range)
                if a <= config.b * c + 1.0:
                    continue
                break
            rho = rng.uniform(*config.pbar_ratio_range)
            p_no = 0.5 * (a / config.b + c)
            pbar = rho * p_no
            facilities.append(Facility(
                facility_id=fid, hcp_id=hcp_id, a=a, b=config.b, c=c, pbar=pbar,
                p_u=1.0, Q=Q, hcp_type=hcp_type, service_type=service,
                state=state, n_requests=n_req,
            ))
            fid += 1
    return facilities


def _can_switch(f: Facility, config: ScenarioConfig) -> bool:
    """Switching is beneficial only when the ad valorem buyer price can reach
    the cap, i.e. the configured rate is at least the facility's critical rate."""
    d = linear_demand(f.a, f.b)
    try:
        tstar = critical_tau(d, f.c, f.pbar)
    except CapNotBinding:
        return False
    return tstar is not None and config.tau >= tstar


def assign_switching(
    facilities: List[Facility],
    p0: Dict[int, float],
    config: ScenarioConfig,
    replication: int = 0,
) -> Dict[int, str]:
    """Assign each facility a period-1 program.

    The latent index is the log cost ratio ln(0.35 * p0 / p_u): positive when
    the discounted billed price exceeds the urban benchmark. With zero noise
    the rule is deterministic (switch iff index > 0); otherwise switching is
    logistic in index / noise_scale. Facilities whose critical subsidy rate
    exceeds the configured rate never switch. Switchers go to the consortium
    arm with the configured probability.
    """
    out = {}
    for f in facilities:
        rng = _substream(config, replication, f.facility_id)
        u_switch = rng.uniform()
        u_arm = rng.uniform()
        index = math.log(0.35 * p0[f.facility_id] / f.p_u)
        if not _can_switch(f, config):
            out[f.facility_id] = P1
            continue
        if config.switch_noise_scale == 0.0:
            switched = index > 0.0
        else:
            prob = 1.0 / (1.0 + math.exp(-index / config.switch_noise_scale))
            switched = u_switch < prob
        if not switched:
            out[f.facility_id] = P1
        else:
            out[f.facility_id] = P2C if u_arm < config.p2c_fraction else P2
    return out


def _draw_urban_benchmarks(facilities, p0, config, replication):
    """p_u is set so the cost ratio p0/p_u is log-normal around the configured
    center; drawn per facility from its substream."""
    out = []
    for f in facilities:
        rng = np.random.default_rng(
            np.random.SeedSequence([int(config.seed), int(replication),
                                    int(f.facility_id), 0x0B5E]))
        ratio = math.exp(math.log(config.urban_ratio_center)
                         + config.urban_ratio_sigma * rng.standard_normal())
        out.append(replace(f, p_u=p0[f.facility_id] / ratio))
    return out


def _period1_price(f: Facility, program: str, scale: float, config: ScenarioConfig):
    """Noiseless period-1 billed price and per-unit split for one facility.

    Returns (billed, subsidy, netcost, kappa, R). Linear-demand equilibria
    are homogeneous of degree one in (a, c, pbar), so scaling those three by
    the trend factor scales every price by it too.
    """
    d = linear_demand(f.a * scale, f.b)
    mp = MarketParams(c=f.c * scale, pbar=f.pbar * scale, tau=config.tau,
                      alpha=config.alpha, gamma=config.gamma)
    if program == P1:
        eq = solve_price_cap(d, mp)
        return eq.p, eq.p - eq.p_c, eq.p_c, None, None
    adv = solve_ad_valorem(d, mp)
    if program == P2:
        return adv.p, config.tau * adv.p, (1.0 - config.tau) * adv.p, None, None
    # consortium arm: the eligible bill is inflated by the optimal distortion
    B = adv.p * adv.Q * config.tau
    gamma_c = config.consortium_agb / (config.consortium_alpha * B)
    r_star = 1.0 / math.sqrt(config.consortium_agb)
    rng = np.random.default_rng(
        np.random.SeedSequence([int(config.seed), int(f.facility_id), 0xC0]))
    lo = config.consortium_r_spread
    R = math.exp(rng.uniform(math.log(lo * r_star), math.log(r_star / lo)))
    kappa = consortium_optimum(ConsortiumParams(
        B=B, R=R, alpha=config.consortium_alpha, gamma=gamma_c,
    )).kappa_star
    billed = kappa * adv.p
    return billed, config.tau * billed, (1.0 - config.tau) * billed, kappa, R


def simulate_panel(
    config: ScenarioConfig,
    replication: int = 0,
) -> Tuple[List[PanelRow], GroundTruth]:
    """Simulate one two-period panel and its ground truth."""
    facilities = generate_population(config)
    lam = config.trend_lambda
    g = config.trend_violation_g

    # period-0 cap equilibria
    p0 = {}
    split0 = {}
    for f in facilities:
        eq = solve_price_cap(
            linear_demand(f.a, f.b),
            MarketParams(c=f.c, pbar=f.pbar, tau=config.tau,
                         alpha=config.alpha, gamma=config.gamma),
        )
        p0[f.facility_id] = eq.p
        split0[f.facility_id] = (eq.p - eq.p_c, eq.p_c)

    facilities = _draw_urban_benchmarks(facilities, p0, config, replication)
    programs = assign_switching(facilities, p0, config, replication)

    records = []
    rows_fac: List[FacilityOutcome] = []
    w_p2 = w_p2c = 0.0
    eff_p2 = eff_p2c = 0.0
    n_p2 = n_p2c = 0
    hcp_ratio_num: Dict[str, float] = {}
    hcp_ratio_den: Dict[str, float] = {}
    hcp_switched: Dict[str, int] = {}

    for f in facilities:
        program = programs[f.facility_id]
        scale = math.exp(lam if program == P1 else g * lam)
        price1, sub1, net1, kappa, R = _period1_price(f, program, scale, config)
        # counterfactual: stay capped at the same scaled primitives
        cf_price, _, _, _, _ = _period1_price(f, P1, scale, config)
        effect = math.log(price1) - math.log(cf_price)

        rng = np.random.default_rng(
            np.random.SeedSequence([int(config.seed), int(replication),
                                    int(f.facility_id), 0x401]))
        e0, e1 = config.outcome_noise_scale * rng.standard_normal(2)
        sub0, net0 = split0[f.facility_id]
        common = dict(
            facility_id=f.facility_id, hcp_id=f.hcp_id, Q=f.Q,
            ln_speed=f.ln_speed, hcp_type=f.hcp_type,
            service_type=f.service_type, state=f.state, n_requests=f.n_requests,
        )
        rows_fac.append(FacilityOutcome(
            period=0, program=P1,
            price=p0[f.facility_id] * math.exp(e0),
            subsidy=sub0 * math.exp(e0), netcost=net0 * math.exp(e0), **common))
        rows_fac.append(FacilityOutcome(
            period=1, program=program,
            price=price1 * math.exp(e1),
            subsidy=sub1 * math.exp(e1), netcost=net1 * math.exp(e1), **common))

        ratio = p0[f.facility_id] / f.p_u
        hcp_ratio_num[f.hcp_id] = hcp_ratio_num.get(f.hcp_id, 0.0) + f.Q * ratio
        hcp_ratio_den[f.hcp_id] = hcp_ratio_den.get(f.hcp_id, 0.0) + f.Q
        if program != P1:
            hcp_switched[f.hcp_id] = 1
        hcp_switched.setdefault(f.hcp_id, 0)

        records.append(dict(
            facility_id=f.facility_id, hcp_id=f.hcp_id, program=program,
            Q=f.Q, effect=effect, cost_ratio=ratio, kappa=kappa, R=R,
        ))
        if program == P2:
            w_p2 += f.Q
            eff_p2 += f.Q * effect
            n_p2 += 1
        elif program == P2C:
            w_p2c += f.Q
            eff_p2c += f.Q * effect
            n_p2c += 1

    n = len(facilities)
    truth = GroundTruth(
        tau_12=eff_p2 / w_p2 if w_p2 > 0 else None,
        tau_12c=eff_p2c / w_p2c if w_p2c > 0 else None,
        switch_rate_p2=n_p2 / n if n else 0.0,
        switch_rate_p2c=n_p2c / n if n else 0.0,
        n_facilities=n,
        trend_lambda=lam,
        trend_violation_g=g,
        facility_records=records,
        hcp_cost_ratio={k: hcp_ratio_num[k] / hcp_ratio_den[k] for k in hcp_ratio_num},
        hcp_switched=hcp_switched,
    )
    return aggregate_to_hcp(rows_fac), truth


def aggregate_to_hcp(rows: List[FacilityOutcome]) -> List[PanelRow]:
    """Collapse facility rows to provider-period rows.

    The default outcome is the bandwidth-weighted mean of facility log
    outcomes; bandwidth-weighted level means are carried alongside as the
    level-aggregation variant. Treatment shares are bandwidth fractions.
    """
    groups: Dict[Tuple[str, int], List[FacilityOutcome]] = {}
    for r in rows:
        groups.setdefault((r.hcp_id, r.period), []).append(r)

    out = []
    for (hcp_id, period), grp in sorted(groups.items()):
        if not grp:
            raise EmptyHcp(f"no facility rows for {hcp_id} period {period}")
        w = np.array([r.Q for r in grp])
        wsum = float(w.sum())
        wm = lambda vals: float(np.dot(w, vals) / wsum)
        prices = np.array([r.price for r in grp])
        subs = np.array([r.subsidy for r in grp])
        nets = np.array([r.netcost for r in grp])
        s2 = float(w[[r.program == P2 for r in grp]].sum() / wsum)
        s2c = float(w[[r.program == P2C for r in grp]].sum() / wsum)
        first = grp[0]
        out.append(PanelRow(
            hcp_id=hcp_id, period=period,
            ln_price=wm(np.log(prices)),
            ln_subsidy=wm(np.log(subs)),
            ln_netcost=wm(np.log(nets)),
            s2=s2, s2c=s2c,
            ln_speed=wm([r.ln_speed for r in grp]),
            hcp_type=first.hcp_type, service_type=first.service_type,
            state=first.state, n_requests=first.n_requests,
            speed_mbps=wsum,
            price_level=wm(prices),
            subsidy_level=wm(subs),
            netcost_level=wm(nets),
        ))
    return out

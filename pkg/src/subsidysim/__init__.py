"""Subsidy-mechanism equilibria, synthetic provider panels, and estimators."""

__version__ = "0.1.0"

from .mechanisms import (
    ConsortiumOutcome,
    ConsortiumParams,
    DemandSpec,
    DominanceReport,
    EquilibriumOutcome,
    MarketParams,
    cap_binds,
    consortium_from_markets,
    consortium_optimum,
    critical_tau,
    dominance_report,
    elasticity,
    linear_demand,
    solve_ad_valorem,
    solve_monopoly_price,
    solve_price_cap,
)

from .simulate import (
    Facility,
    GroundTruth,
    PanelRow,
    ScenarioConfig,
    aggregate_to_hcp,
    generate_population,
    simulate_panel,
)
from .estimators import (
    DmlSpec,
    TwfeSpec,
    dml_plr,
    dml_plr_fit,
    first_difference_fit,
    orthogonality_probe,
    pols_fit,
    switching_logit,
    twfe_fit,
)
from .diagnostics import (
    common_support,
    cooks_trim,
    functional_form_comparison,
    fwl_hump,
    manski_sensitivity,
    oster_bounds,
    oster_from_stats,
)

__all__ = [
    "ConsortiumOutcome",
    "ConsortiumParams",
    "DemandSpec",
    "DominanceReport",
    "EquilibriumOutcome",
    "MarketParams",
    "cap_binds",
    "consortium_from_markets",
    "consortium_optimum",
    "critical_tau",
    "dominance_report",
    "elasticity",
    "linear_demand",
    "solve_ad_valorem",
    "solve_monopoly_price",
    "solve_price_cap",
    "Facility",
    "GroundTruth",
    "PanelRow",
    "ScenarioConfig",
    "aggregate_to_hcp",
    "generate_population",
    "simulate_panel",
    "DmlSpec",
    "TwfeSpec",
    "dml_plr",
    "dml_plr_fit",
    "first_difference_fit",
    "orthogonality_probe",
    "pols_fit",
    "switching_logit",
    "twfe_fit",
    "common_support",
    "cooks_trim",
    "functional_form_comparison",
    "fwl_hump",
    "manski_sensitivity",
    "oster_bounds",
    "oster_from_stats",
    "__version__",
]

"""Exception hierarchy shared across the package."""


class SubsidySimError(Exception):
    """Base class for all package errors."""


# ---- mechanism solvers ----

class NonpositiveQuantity(SubsidySimError):
    """Demand is non-positive at the relevant cost (e.g. a <= b*c for linear demand)."""


class NoBracket(SubsidySimError):
    """Profit maximizer could not be bracketed on the demand support hint."""


class ZeroDemand(SubsidySimError):
    """Elasticity requested at a price with zero demand."""


class CapNotBinding(SubsidySimError):
    """Operation requires a binding price cap (pbar < monopoly price)."""


class RevenueNeutralityViolation(SubsidySimError):
    """Consortium price reallocation broke the revenue constraint beyond tolerance."""


class PreconditionUnmet(SubsidySimError):
    """A proposition hypothesis failed; message lists which one."""


# ---- simulation ----

class RejectionLimit(SubsidySimError):
    """Could not draw admissible facility parameters within the attempt budget."""


class EmptyHcp(SubsidySimError):
    """Aggregation received no facility rows for a provider-period."""


# ---- statistics ----

class RankDeficient(SubsidySimError):
    def __init__(self, dropped):
        self.dropped = list(dropped)
        super().__init__(f"design matrix is rank deficient; aliased columns: {self.dropped}")


class SingleCluster(SubsidySimError):
    """Cluster-robust covariance undefined with a single cluster."""


class DimensionMismatch(SubsidySimError):
    """Contrast weight vector length does not match the coefficient vector."""


class Separation(SubsidySimError):
    """Logit likelihood has no finite maximizer (perfect separation)."""


class NoVariation(SubsidySimError):
    """Binary response takes a single value."""


class SpanTooSmall(SubsidySimError):
    """LOESS neighborhood too small for the local polynomial degree."""


class NonpositiveP(SubsidySimError):
    """Box-Cox transform requires a strictly positive response."""


class NonpositiveValues(SubsidySimError):
    """Functional-form comparison requires positive price and speed."""


class DegenerateTarget(SubsidySimError):
    """Zero-variance regression target (flagged, not normally raised)."""


# ---- estimators ----

class NoSwitchers(SubsidySimError):
    """A treatment margin has no switchers; its effect is undefined."""


class UnbalancedPanelForFD(SubsidySimError):
    """First-difference shortcut requires a balanced two-period panel."""


class FoldTooSmall(SubsidySimError):
    """Cross-fitting folds would be smaller than the minimum usable size."""


class NuisanceFitFailure(SubsidySimError):
    def __init__(self, fold, cause):
        self.fold = fold
        super().__init__(f"nuisance fit failed on fold {fold}: {cause}")


# ---- diagnostics ----

class NoControlGroup(SubsidySimError):
    """Sensitivity analysis needs at least one never-switching provider."""


class EmptyAfterRestriction(SubsidySimError):
    """Common-support restriction removed every provider."""


# ---- io / cli ----

class ConfigError(SubsidySimError):
    """Scenario config file could not be parsed or validated."""


class SchemaViolation(SubsidySimError):
    """Panel CSV violates the documented schema."""


class IoFailure(SubsidySimError):
    """Filesystem write failed."""


class UnknownScenario(SubsidySimError):
    """cmd_replicate called with an unregistered scenario name."""

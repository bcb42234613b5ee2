from .linear import DesignMatrix, EstimateResult, linear_contrast, ols_fit
from .logit import logit_fit
from .loess import loess_fit
from .forest import forest_fit, forest_predict
from .boxcox import boxcox_profile

__all__ = [
    "DesignMatrix",
    "EstimateResult",
    "linear_contrast",
    "ols_fit",
    "logit_fit",
    "loess_fit",
    "forest_fit",
    "forest_predict",
    "boxcox_profile",
]

"""Aggregated-correlation screening for interaction models.

Screen variables by their strongest main or pairwise-product correlation
with the response, then select a strong-hierarchy quadratic model on the
screened set with GRESH or SHIM tuned by GIC.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .core import (  # noqa: F401
    BINOMIAL, GAUSSIAN, Dataset, EffectIndex, interaction_column, pearson, standardize,
)
from .screening import (  # noqa: F401
    AcorScores, EffectSet, ShrunkSet, acor, acor_all, aggregated_lrt, all_pairs_sis,
    binary_acor_all, binary_cor, shrunk_variable_set,
)
from .penalize import (  # noqa: F401
    CoefficientSet, GicResult, PenaltyConfig, check_sh, gresh_fit, gresh_objective,
    lambda_path_gic, logistic_select, prediction_deviance, shim_fit, update_interaction,
    update_main,
)
from ._backend import NAME as backend  # noqa: F401

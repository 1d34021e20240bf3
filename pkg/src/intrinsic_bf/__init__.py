"""Objective Bayes factors for nested normal linear models whose dimension
grows with the sample size."""

from .asymptotics import (
    ConsistencyVerdict,
    GrowthRegime,
    Verdict,
    berger_bound_R,
    bip_limit,
    classify,
    delta_r,
    delta_rs,
    in_region_C,
)
from .bayes import (
    BayesFactorResult,
    QuadratureConfig,
    berger_log_bf,
    intrinsic_prior_log_density,
    log_bf_large_p_approx,
    log_intrinsic_bf,
    log_schwarz,
)
from .errors import (
    ConfigError,
    DegenerateFit,
    DimensionError,
    DomainError,
    EmptyInput,
    IntrinsicBFError,
    MissingColumn,
    NotConverged,
    ParseError,
    RankDeficient,
    SchemaError,
)
from .linear import (
    DesignMatrix,
    ModelFit,
    NestedModelPair,
    TrueModelSpec,
    bip_statistic,
    build_nested_pair,
    factorial_design,
    model_distance,
    oneway_anova_design,
    oneway_distance,
    residual_sum_squares,
)

__version__ = "0.1.0"

"""Bootstrap tests of equal group means against tree-ordered alternatives
in one-way ANOVA with unequal group variances."""

from .distributions import (
    DistributionSpec,
    Exponential,
    Laplace,
    Normal,
    NormalMixture,
    Seed,
    SkewNormal,
    StudentT,
    sample,
    sample_standardized_shifted,
    theoretical_moments,
)
from .errors import (
    BootstrapInstabilityError,
    ConfigError,
    ConvergenceError,
    DegenerateLikelihoodError,
    DegenerateVarianceError,
    IngestionError,
    InsufficientDataError,
    ParameterDomainError,
    TreeAnovaError,
    UnsupportedMomentsError,
)
from .estimation import (
    ConvergenceConfig,
    GroupedData,
    RestrictedMleResult,
    SummaryStats,
    check_condition1,
    mle_null,
    mle_tree,
    summarize,
)
from .isotonic import TreeProjection, brute_force_projection, tree_isotonic
from .procedures import (
    BootstrapConfig,
    TestReport,
    d_statistics,
    lrt_statistic,
    run_lrt,
    run_maxd,
    run_mind,
    run_tests,
    simultaneous_ci,
)
from .simulation import SimulationResult, SimulationSpec, estimate_power, estimate_size, run_grid

__all__ = [
    "BootstrapConfig",
    "BootstrapInstabilityError",
    "ConfigError",
    "ConvergenceConfig",
    "ConvergenceError",
    "DegenerateLikelihoodError",
    "DegenerateVarianceError",
    "DistributionSpec",
    "Exponential",
    "GroupedData",
    "IngestionError",
    "InsufficientDataError",
    "Laplace",
    "Normal",
    "NormalMixture",
    "ParameterDomainError",
    "RestrictedMleResult",
    "Seed",
    "SimulationResult",
    "SimulationSpec",
    "SkewNormal",
    "StudentT",
    "SummaryStats",
    "TestReport",
    "TreeAnovaError",
    "TreeProjection",
    "UnsupportedMomentsError",
    "brute_force_projection",
    "check_condition1",
    "d_statistics",
    "estimate_power",
    "estimate_size",
    "lrt_statistic",
    "mle_null",
    "mle_tree",
    "run_grid",
    "run_lrt",
    "run_maxd",
    "run_mind",
    "run_tests",
    "sample",
    "sample_standardized_shifted",
    "simultaneous_ci",
    "summarize",
    "theoretical_moments",
    "tree_isotonic",
]

__version__ = "0.1.0"

"""Randomized gradient tracking: simulation and rate analysis."""

from ._core import (
    ConfigError,
    GradientOracle,
    LogisticOracle,
    MixingMatrix,
    NonConvergenceError,
    ParseError,
    QuadraticOracle,
    alpha_grid,
    beta_of,
    build_A_general,
    build_A_method,
    build_topology,
    complexity_point,
    config_roundtrip,
    consensus_apply,
    generate_quadratic,
    logistic_from_libsvm,
    mixing_matrix,
    parse_libsvm,
    partition_sizes,
    rate_upper_bound,
    run,
    run_experiment,
    spectral_radius,
    step_bound_general,
    step_bound_method,
)

__all__ = [
    "ConfigError",
    "GradientOracle",
    "LogisticOracle",
    "MixingMatrix",
    "NonConvergenceError",
    "ParseError",
    "QuadraticOracle",
    "alpha_grid",
    "beta_of",
    "build_A_general",
    "build_A_method",
    "build_topology",
    "complexity_point",
    "config_roundtrip",
    "consensus_apply",
    "generate_quadratic",
    "logistic_from_libsvm",
    "mixing_matrix",
    "parse_libsvm",
    "partition_sizes",
    "rate_upper_bound",
    "run",
    "run_experiment",
    "spectral_radius",
    "step_bound_general",
    "step_bound_method",
]

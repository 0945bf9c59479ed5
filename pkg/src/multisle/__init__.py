"""Simulation and numerical verification toolkit for multichordal SLE and
Dyson Brownian motion: driving-function SDE ensembles, partition and Green's
functions, Loewner curve tracing, transition-density formulas, and
reproduction experiments with pass/fail reports.
"""

from .core import (
    BoundaryConfig,
    Exponents,
    LinkPattern,
    ModelParams,
    arm_exponent,
    derived_parameters,
    enumerate_link_patterns,
    exponents,
    lambda_exponent,
)
from .density import (
    ConstantEstimate,
    DensityEstimate,
    dyson_density_asymptotic,
    empirical_compare,
    gap_cdf_from_origin,
    j_constant,
    mehta_constant,
    multichordal_density,
    survival_prediction,
)
from .errors import (
    InvalidConfigError,
    InvalidInputError,
    InvalidParameterError,
    MultiSLEError,
    StepTooLargeError,
)
from .experiments import ExperimentConfig, Report, emit_report, run_experiment
from .loewner import (
    Curve,
    chord_transport,
    hsiz,
    hsiz_hcap_check,
    recover_driving,
    trace_curve,
)
from .partition import (
    GreenFunction,
    PartitionFunction,
    bpz_residual,
    f_v,
    gff_partition,
    green,
    product_partition,
    pure_pair_partition,
    shuffle_partition,
    z_gff,
    z_pure_pair,
    z_shuffle,
)
from .sde import (
    DriftSpec,
    PathEnsemble,
    SimConfig,
    drift,
    dyson_spec,
    gff_spec,
    pure_spec,
    simulate,
    sle_rho_spec,
)

__version__ = "0.1.0"

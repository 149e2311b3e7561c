"""Plug-in estimators of density functionals on the unit cube.

Mirrored (boundary-reflected) kernel density estimates are plugged into
integral functionals, and the package reports finite-sample confidence
intervals from a bounded-difference deviation bound.  It also covers
conditional functionals, Renyi-alpha conditional mutual information and a
conditional-independence test.
"""

__version__ = "0.1.0"
SCHEMA_VERSION = "1.0"

from .bounds import (  # noqa: E402
    BoundConstants,
    HolderParams,
    bandwidth,
    bias_bound,
    ci_halfwidth,
    deviation_probability,
    mse_bound,
    variance_bound,
    variance_constant,
)
from .citest import TestResult, conditional_independence_test  # noqa: E402
from .conditional import (  # noqa: E402
    ConditionalSpec,
    cmi_variance_constant,
    estimate_conditional,
    make_cmi_spec,
    renyi_cmi,
    split_data,
)
from .errors import ConfigError, NonFiniteIntegrand  # noqa: E402
from .functionals import BUILTINS, EstimateReport, FunctionalSpec, estimate, make_builtin  # noqa: E402
from .kde import MirroredKde, Sample, evaluate_clipped, fit, replace_point  # noqa: E402
from .kernels import Kernel, make_kernel  # noqa: E402
from .quadrature import Grid, default_grid, integrate, mc_grid, midpoint_grid  # noqa: E402
from .synth import (  # noqa: E402
    TrigDensity,
    concentration_experiment,
    oracle_functional,
    rate_experiment,
    sample_density,
)

__all__ = [
    "__version__", "SCHEMA_VERSION",
    "BoundConstants", "HolderParams", "bandwidth", "bias_bound", "ci_halfwidth", "deviation_probability",
    "mse_bound", "variance_bound", "variance_constant",
    "TestResult", "conditional_independence_test",
    "ConditionalSpec", "cmi_variance_constant", "estimate_conditional", "make_cmi_spec", "renyi_cmi", "split_data",
    "ConfigError", "NonFiniteIntegrand",
    "BUILTINS", "EstimateReport", "FunctionalSpec", "estimate", "make_builtin",
    "MirroredKde", "Sample", "evaluate_clipped", "fit", "replace_point",
    "Kernel", "make_kernel",
    "Grid", "default_grid", "integrate", "mc_grid", "midpoint_grid",
    "TrigDensity", "concentration_experiment", "oracle_functional", "rate_experiment", "sample_density",
]

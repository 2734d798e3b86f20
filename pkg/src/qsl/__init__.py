"""Reference-based quantum speed limit bounds for driven quantum systems."""

__version__ = "0.1.0"

from qsl.bounds import (
    BoundTrace,
    CumulativeIntegral,
    cumulative_variance_integral,
    first_crossing_time,
    speed_limit_bounds,
    standard_qsl,
)
from qsl.core import (
    HermitianOperator,
    StateVector,
    expectation,
    fidelity_angle,
    rms_bound,
    variance,
)
from qsl.errors import (
    ConfigError,
    ConvergenceError,
    DegeneracyError,
    DimensionError,
    NonHermitianError,
    NormalizationError,
    NumericalError,
    QSLError,
)
from qsl.optimizer import OptimizedBoundTrace, optimize_bounds
from qsl.propagation import (
    Spectrum,
    TimeDependentGenerator,
    TimeGrid,
    Trajectory,
    adiabatic_state,
    counterdiabatic_term,
    eigensystem,
    propagate,
)

__all__ = [
    "BoundTrace",
    "ConfigError",
    "ConvergenceError",
    "CumulativeIntegral",
    "DegeneracyError",
    "DimensionError",
    "HermitianOperator",
    "NonHermitianError",
    "NormalizationError",
    "NumericalError",
    "OptimizedBoundTrace",
    "QSLError",
    "Spectrum",
    "StateVector",
    "TimeDependentGenerator",
    "TimeGrid",
    "Trajectory",
    "adiabatic_state",
    "counterdiabatic_term",
    "cumulative_variance_integral",
    "eigensystem",
    "expectation",
    "fidelity_angle",
    "first_crossing_time",
    "optimize_bounds",
    "propagate",
    "rms_bound",
    "speed_limit_bounds",
    "standard_qsl",
    "variance",
]

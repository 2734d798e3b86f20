"""The three scenario families: twisted Landau-Zener, Grover search, periodic drive."""

from qsl.models.grover import (
    GroverParams,
    grover_analytic_bounds,
    grover_cd_term,
    grover_generator,
    grover_min_time,
    grover_theta,
    grover_theta_of_t,
    grover_theta_rate,
    s_protocol,
)
from qsl.models.periodic import (
    Y_TARGET,
    FloquetMagnusReference,
    PeriodicParams,
    constant_reference_generator,
    constant_reference_trajectory,
    floquet_magnus_reference,
    periodic_generator,
)
from qsl.models.twisted_lz import (
    TwistedLZParams,
    lz_overlap,
    lz_reference_generator,
    phi_protocol,
    twist_variance_majorant,
    twisted_lz_generator,
)

__all__ = [
    "GroverParams",
    "grover_analytic_bounds",
    "grover_cd_term",
    "grover_generator",
    "grover_min_time",
    "grover_theta",
    "grover_theta_of_t",
    "grover_theta_rate",
    "s_protocol",
    "Y_TARGET",
    "FloquetMagnusReference",
    "PeriodicParams",
    "constant_reference_generator",
    "constant_reference_trajectory",
    "floquet_magnus_reference",
    "periodic_generator",
    "TwistedLZParams",
    "lz_overlap",
    "lz_reference_generator",
    "phi_protocol",
    "twist_variance_majorant",
    "twisted_lz_generator",
]

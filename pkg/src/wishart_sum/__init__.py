"""Eigenvalue density and ergodic capacity of weighted sums of complex Wishart matrices.

The main entry points are :func:`build_evaluator` / :func:`density` for the
exact marginal eigenvalue density, :func:`capacity_determinantal` for the
closed-form ergodic capacity, :func:`capacity_approx` for the single-Wishart
approximation and :mod:`wishart_sum.montecarlo` for simulation.
"""

__version__ = "0.1.0"

from .capacity import (CapacityResult, approximation_error, capacity_approx, capacity_determinantal,
                       capacity_distinct, capacity_quadrature, relay_upper_bound)
from .density import (DensityEvaluator, DistinctSpec, build_evaluator, cdf, density, density_distinct,
                      density_grid, entry_f, entry_g, entry_h, perturbed_distinct)
from .errors import (ConditioningError, DimensionError, DomainError, NumericalFailure, ValidationError,
                     WishartSumError)
from .model import (AntennaConfig, SumSpec, WishartTerm, compute_ps, db_to_linear, equivalent_spec,
                    from_antennas, moment_summary)
from .montecarlo import (EmpiricalDensity, McConfig, empirical_capacity, empirical_density, sample_wbar,
                         sweep_error, sweep_relay)
from .numeric import SignedLogValue, hermitian_eigenvalues, lu_logdet, sample_complex_gaussian

__all__ = [
    "AntennaConfig", "CapacityResult", "ConditioningError", "DensityEvaluator", "DimensionError",
    "DistinctSpec", "DomainError", "EmpiricalDensity", "McConfig", "NumericalFailure", "SignedLogValue",
    "SumSpec", "ValidationError", "WishartSumError", "WishartTerm", "approximation_error",
    "build_evaluator", "capacity_approx", "capacity_determinantal", "capacity_distinct",
    "capacity_quadrature", "cdf", "compute_ps", "db_to_linear", "density", "density_distinct",
    "density_grid", "empirical_capacity", "empirical_density", "entry_f", "entry_g", "entry_h",
    "equivalent_spec", "from_antennas", "hermitian_eigenvalues", "lu_logdet", "moment_summary",
    "perturbed_distinct", "relay_upper_bound", "sample_complex_gaussian", "sample_wbar", "sweep_error",
    "sweep_relay",
]

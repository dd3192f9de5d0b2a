"""Simulation and verification toolkit for weakly interacting mean-field
particle systems: explicit contraction rates for a reflection/synchronous
coupling under a concave distance transform, and Monte Carlo verification
of the uniform-in-time N^{-1/2} closeness between the particle system and
the nonlinear flow."""

from .config import ExperimentConfig, load_config, parse_config, render_config
from .coupling import LawSpec, SimConfig, SimRecords, coupled_noise, run_coupled
from .errors import AdmissibilityError, NumericalError
from .potentials import (PotentialModel, builtin_double_well, builtin_quadratic,
                         derive_quadratic_lower_bound, gronwall_moment_bound,
                         validate_assumptions)
from .rates import (RateProfile, compute_R0, compute_R1, empirical_constant,
                    omega, tabulate_profile, theorem_bound, verify_f_inequality)
from .rng import NoiseStreams, job_index
from .transport import (coupled_distance, second_moment, w1_upper_from_f,
                        wasserstein_1d_exact, wasserstein_assignment)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "NumericalError",
    "ExperimentConfig", "load_config", "parse_config", "render_config",
    "LawSpec", "SimConfig", "SimRecords", "coupled_noise", "run_coupled",
    "PotentialModel", "builtin_double_well", "builtin_quadratic",
    "derive_quadratic_lower_bound", "gronwall_moment_bound",
    "validate_assumptions",
    "RateProfile", "compute_R0", "compute_R1", "empirical_constant", "omega",
    "tabulate_profile", "theorem_bound", "verify_f_inequality",
    "NoiseStreams", "job_index",
    "coupled_distance", "second_moment", "w1_upper_from_f",
    "wasserstein_1d_exact", "wasserstein_assignment",
    "__version__",
]

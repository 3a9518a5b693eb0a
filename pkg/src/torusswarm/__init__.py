"""torusswarm: a numerical laboratory for density-feedback swarm control.

The package co-simulates an interacting agent ensemble and its continuum
density on the periodic box [-pi, pi)^d (d = 1 or 2). A proportional
density-tracking controller is synthesized spectrally and applied to both
levels on a shared clock, so microscopic and macroscopic predictions can be
compared step by step. Stability gain thresholds and disturbance error
ceilings are evaluated alongside each run.
"""

__version__ = "0.1.0"

from ._accel import HAVE_COMPILED, active_backend_name, resolve as resolve_backend
from .bounds import (BoundsReport, DisturbanceBound, SensingConstants,
                     bounds_report, default_initial_error, disturbance_bound,
                     disturbance_sups, format_report, sensing_gap_constants,
                     write_bounds_csv)
from .config import TrialConfig, load_config, parse_config_text
from .control import (ControlGains, FluxSolution, control_velocity,
                      curl_spectral, divergence_spectral,
                      macroscopic_control, sample_agent_inputs, solve_flux)
from .errors import (CflWarning, ConfigError, InvalidParameter,
                     MassMismatchError, NoGuarantee, NumericalFault,
                     StepRejected, TorusSwarmError, ZeroMeanProjection)
from .experiments import (TrialResult, percentage_error, preflight_cfl,
                          run_sweep, run_trial)
from .grid import (GridSpec, ScalarField, VectorField, circular_convolve,
                   circular_convolve_direct, constant_field, curl2d,
                   divergence, export_field_csv, field_from_function,
                   gradient, integrate, laplacian, lp_norm, scalar_field,
                   vector_field, wrap_angle)
from .kernels import (KdeSpec, KernelSpec, TargetDensitySpec, eval_kernel,
                      is_unlimited, kde_density, kernel_difference_fields,
                      kernel_field, mass_match_check, register_kernel_family,
                      von_mises_target, wrapped_displacement)
from .macro import (MacroState, StepAudit, cfl_number, interaction_velocity,
                    lax_friedrichs_step, max_stable_dt, reference_step,
                    velocity_sup)
from .micro import (AgentState, DisturbanceSpec, disturbance_field,
                    euler_step, eval_disturbance, initial_positions,
                    mean_nearest_neighbor_distance, pairwise_velocity)

__all__ = [
    "AgentState", "BoundsReport", "CflWarning", "ConfigError", "ControlGains",
    "DisturbanceBound", "DisturbanceSpec", "FluxSolution", "GridSpec",
    "HAVE_COMPILED", "InvalidParameter", "KdeSpec", "KernelSpec",
    "MacroState", "MassMismatchError", "NoGuarantee", "NumericalFault",
    "ScalarField", "SensingConstants", "StepAudit", "StepRejected",
    "TargetDensitySpec", "TorusSwarmError", "TrialConfig", "TrialResult",
    "VectorField", "ZeroMeanProjection", "active_backend_name",
    "bounds_report", "cfl_number", "circular_convolve",
    "circular_convolve_direct", "constant_field", "control_velocity",
    "curl2d", "curl_spectral", "default_initial_error", "disturbance_bound",
    "disturbance_field", "disturbance_sups", "divergence",
    "divergence_spectral", "euler_step", "eval_disturbance", "eval_kernel",
    "export_field_csv", "field_from_function", "format_report", "gradient",
    "initial_positions", "integrate", "interaction_velocity", "is_unlimited",
    "kde_density", "kernel_difference_fields", "kernel_field", "laplacian",
    "lax_friedrichs_step", "load_config", "lp_norm", "macroscopic_control",
    "mass_match_check", "max_stable_dt", "mean_nearest_neighbor_distance",
    "pairwise_velocity", "parse_config_text", "percentage_error",
    "preflight_cfl", "reference_step", "register_kernel_family",
    "resolve_backend", "run_sweep", "run_trial", "sample_agent_inputs",
    "scalar_field", "sensing_gap_constants", "solve_flux", "vector_field",
    "velocity_sup", "von_mises_target", "wrap_angle", "wrapped_displacement",
    "write_bounds_csv",
]

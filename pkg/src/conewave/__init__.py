"""Finite-difference laboratory for a damped semilinear wave equation on a
stretched cone: discrete operators, variational constants, a splitting
integrator, trajectory diagnostics and a configuration-driven harness."""
from .grid import GridSpec, ConeGrid, build_grid, weighted_inner, cone_norm
from .operators import (
    apply_laplacian,
    apply_gradient,
    potential_value,
    smallest_eigenpair,
    second_eigenmode,
)
from .variational import (
    ModelParams,
    make_model,
    WellConstants,
    WellLabel,
    functional_J,
    functional_I,
    total_energy,
    lambda_star,
    estimate_embedding_constant,
    estimate_hardy_constant,
    well_constants,
    classify_state,
    depth_d,
    theta_coefficient,
    gn_theta,
)
from .series import EnergySeries
from .integrator import (
    SimState,
    SchemeParams,
    NumericalBlowup,
    damping_solve,
    step,
    simulate,
    energy_balance_residual,
    continuous_dependence_probe,
)
from .diagnostics import (
    fit_decay,
    nakao_bound,
    detect_blowup,
    subcritical_eta_range,
    subcritical_time_bound,
    high_energy_constants,
    high_energy_blowup_check,
    construct_high_energy_data,
    blowup_time_upper_bound,
    invariant_set_monitor,
)

__version__ = "0.1.0"

__all__ = [
    "apply_laplacian",
    "apply_gradient",
    "potential_value",
    "smallest_eigenpair",
    "second_eigenmode",
    "ModelParams",
    "make_model",
    "WellConstants",
    "WellLabel",
    "functional_J",
    "functional_I",
    "total_energy",
    "lambda_star",
    "estimate_embedding_constant",
    "estimate_hardy_constant",
    "well_constants",
    "classify_state",
    "depth_d",
    "theta_coefficient",
    "gn_theta",
    "SimState",
    "SchemeParams",
    "NumericalBlowup",
    "damping_solve",
    "step",
    "simulate",
    "energy_balance_residual",
    "continuous_dependence_probe",
    "fit_decay",
    "nakao_bound",
    "detect_blowup",
    "subcritical_eta_range",
    "subcritical_time_bound",
    "high_energy_constants",
    "high_energy_blowup_check",
    "construct_high_energy_data",
    "blowup_time_upper_bound",
    "invariant_set_monitor",
    "GridSpec",
    "ConeGrid",
    "build_grid",
    "weighted_inner",
    "cone_norm",
    "EnergySeries",
]

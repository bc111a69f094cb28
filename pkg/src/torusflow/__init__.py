"""torusflow: a pseudo-spectral laboratory for stochastic incompressible
fluids on the periodic torus.

The package builds five stochastic fluid model families around one Ito
skeleton du + P f dt + sum_k P sigma_k dW_k = 0 and verifies their
theorem-level structure numerically: pathwise circulation conservation
along stochastic flows, circulation-transport decompositions, volume
preservation and exact Jacobian formulas, Weber/Cauchy representations,
conditional-expectation circulation statements for the viscous model, and
pathwise energy conservation/dissipation ledgers.
"""

from .errors import (
    GridMismatchError,
    LoopResolutionError,
    PreconditionError,
    StabilityError,
    SteepeningError,
    TorusflowError,
    ValidationError,
)
from .grid import (
    PointEvaluator,
    SpectralField,
    TorusGrid,
    evaluate_at_points,
    field_from_function,
    l2_inner,
    l2_norm,
    leray_project,
    linf_norm,
    poisson_solve,
    random_scalar_field,
    random_vector_field,
    spectral_differentiate,
    taylor_green,
)
from .lie import (
    OperatorReport,
    adjoint_pairing_residual,
    double_lie_transpose,
    identity_suite,
    lie_bracket,
    lie_transpose,
)
from .noise import BrownianDriver, NoiseBasis, build_basis
from .models import FAMILIES, ModelSpec, drift_eval, noise_eval
from .integrators import FieldTrajectory, advance, run
from .lagrangian import (
    DisplacementTrajectory,
    FlowEnsemble,
    LoopTrajectory,
    MaterialLoop,
    advect,
    advect_loop,
    evolve_deformation,
    jacobian_formula_check,
    make_loop,
    solve_back_to_labels,
)
from .diagnostics import (
    EnergyLedger,
    TimeSeries,
    cauchy_residual,
    circulation,
    circulation_transport_decomposition,
    energy_ledger,
    helicity,
    kelvin_residual,
    label_grid_points,
    loglog_slope,
    magnetic_helicity,
    vector_potential_from_field,
    vorticity_flux,
    weber_label_reconstruction,
    weber_pullback_residual,
)
from .ensemble import (
    ConditionalEstimate,
    conditional_kelvin,
    conditional_weber,
    run_sweep,
    stderr_scaling,
)
from .config import RunConfig, parse_config, resolve_config

__version__ = "0.1.0"

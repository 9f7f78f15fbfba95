"""1D viscous compressible multifluid solver in parallel spatial and mass
coordinates, with an invariant-based verification harness."""

__version__ = "0.1.0"

from .grid import Field, Grid, d2dx2, ddx, integrate, l2_norm, upwind_advect, upwind_flux_divergence
from .model import (
    DerivedCoefficients,
    FluidParams,
    InadmissibleMatrixError,
    ViscosityMatrix,
    average_velocity,
    coercivity_constant,
    derived_coefficients,
    is_positive_definite,
    pressure,
    validate_initial_data,
)
from .states import EulerState, LagrangeState, SourceTerms, StepRecord, TimeControls, Trajectory
from .block_tridiag import block_thomas
from .solver_euler import (
    TimestepRejected,
    cfl_dt,
    continuity_step,
    simulate,
    step,
    total_density,
    viscous_momentum_solve,
)
from .solver_lagrange import (
    MassConsistencyError,
    density_update,
    momentum_solve_lagrange,
    simulate_lagrange,
    step_lagrange,
    to_eulerian,
    to_lagrangian,
    total_mass_coordinate,
)
from .diagnostics import (
    EnergyReport,
    InvariantEntry,
    InvariantReport,
    Tolerances,
    effective_flux_series,
    energy,
    h1_velocity_series,
    lograd_norm,
    run_invariant_suite,
    stability_gap,
)
from .config import ConfigError, RunConfig, load_config
from .workflows import (
    cmd_convergence,
    cmd_simulate,
    cmd_stability,
    cmd_verify,
    equilibrium_config,
    reference_config,
    run_euler,
    run_lagrange,
    run_paired,
)

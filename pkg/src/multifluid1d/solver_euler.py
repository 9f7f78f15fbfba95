"""Time integration of the multifluid system in spatial coordinates.

The scheme splits each step into an explicit conservative upwind transport
of the densities, an explicit upwind advection of the velocities together
with the pressure gradient evaluated from the freshly transported
densities, and a backward-Euler treatment of the viscous coupling.  The
implicit stage is a block-tridiagonal solve (one N x N block per node,
coupling the components through the viscosity matrix) handled by block
Thomas elimination.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import diagnostics
from .block_tridiag import block_thomas
from .grid import Field, ddx, upwind_advect, upwind_flux_divergence
from .model import FluidParams, ViscosityMatrix, average_velocity, pressure
from .states import EulerState, SourceTerms, TimeControls, Trajectory


class TimestepRejected(RuntimeError):
    """The explicit transport produced a nonpositive density; halve dt and retry."""


def total_density(state: EulerState) -> Field:
    return Field(state.grid, sum(f.values for f in state.rho))


def cfl_dt(state: EulerState, cfl: float, dt_max: float) -> float:
    """Transport-limited step: cfl * h / max|v|, capped by dt_max."""
    v = average_velocity(state.u)
    vmax = float(np.max(np.abs(v.values)))
    return min(cfl * state.grid.spacing / max(vmax, 1e-12), dt_max)


def continuity_step(state: EulerState, dt: float) -> tuple[Field, ...]:
    """Explicit conservative upwind update of every component density.

    All components are transported by the same average velocity, and the
    flux through both domain ends is zero, so each component's trapezoid
    mass is conserved exactly.  A nonpositive updated density raises
    TimestepRejected.
    """
    v = average_velocity(state.u)
    out = []
    for f in state.rho:
        div = upwind_flux_divergence(f, v)
        new = f.values - dt * div.values
        if np.any(new <= 0.0):
            raise TimestepRejected(
                f"density became nonpositive at t={state.time:.6g} with dt={dt:.3e}"
            )
        out.append(Field(state.grid, new))
    return tuple(out)


def viscous_momentum_solve(
    state: EulerState,
    dt: float,
    params: FluidParams,
    viscosity: ViscosityMatrix,
    forcing: Optional[SourceTerms] = None,
) -> tuple[Field, ...]:
    """Backward-Euler viscous solve after explicit advection and pressure.

    Builds u*_i = u_i - dt * (v du_i/dx + (dp/dx - f_i) / rho_i) with upwind
    advection, then solves rho_i (u_i' - u*_i)/dt = sum_j mu_ij d2u_j'/dx2
    with Dirichlet zero rows at both ends.  The densities of the given state
    are the post-transport ones, so the pressure gradient is explicit in the
    new densities while the system stays linear.
    """
    grid = state.grid
    h = grid.spacing
    n = state.n_components
    m = grid.n_nodes
    mu = viscosity.entries

    v = average_velocity(state.u)
    p = Field(grid, pressure(total_density(state).values, params))
    pgrad = ddx(p).values
    rho_stack = np.stack([f.values for f in state.rho])
    u_stack = np.stack([f.values for f in state.u])
    f_stack = (forcing or SourceTerms()).stack(n, m)
    adv = np.stack([upwind_advect(u, v).values for u in state.u])
    u_star = u_stack - dt * (v.values * adv + (pgrad - f_stack) / rho_stack)

    s = dt / (h * h)
    diag = np.zeros((m, n, n))
    idx = np.arange(n)
    diag[:, idx, idx] = rho_stack.T
    diag[1:-1] += 2.0 * s * mu
    sub = np.zeros((m, n, n))
    sup = np.zeros((m, n, n))
    sub[1:-1] = -s * mu
    sup[1:-1] = -s * mu
    rhs = (rho_stack * u_star).T
    diag[0] = np.eye(n)
    diag[-1] = np.eye(n)
    rhs[0] = 0.0
    rhs[-1] = 0.0

    try:
        x = block_thomas(sub, diag, sup, rhs)
    except np.linalg.LinAlgError as exc:  # impossible for admissible inputs
        raise RuntimeError(
            "singular pivot in the viscous block solve; the system is "
            "nonsingular for positive densities, dt > 0 and an admissible "
            "viscosity matrix, so this indicates an internal error"
        ) from exc
    return tuple(Field(grid, x[:, i]) for i in range(n))


def step(
    state: EulerState,
    dt: float,
    params: FluidParams,
    viscosity: ViscosityMatrix,
    forcing: Optional[SourceTerms] = None,
) -> EulerState:
    """One full splitting step: transport the densities, then solve momentum."""
    rho_new = continuity_step(state, dt)
    mid = EulerState(state.time, rho_new, state.u)
    u_new = viscous_momentum_solve(mid, dt, params, viscosity, forcing)
    return EulerState(state.time + dt, rho_new, u_new)


def simulate(
    initial: EulerState,
    params: FluidParams,
    viscosity: ViscosityMatrix,
    controls: TimeControls,
    forcing: Optional[Callable[[float], SourceTerms]] = None,
    dt_schedule: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Advance to the final time with adaptive dt, recording snapshots every
    snapshot_stride accepted steps (the final state is always included) and
    per-step diagnostics.

    A prescribed dt_schedule replaces the CFL choice (used for lockstep
    comparisons); timestep rejection then aborts instead of halving.  An
    unrecoverable timestep collapse returns a trajectory flagged as aborted
    with the partial output retained.
    """
    controls = controls.resolved(initial.grid.spacing)
    state = initial
    records = [diagnostics.initial_record(state, params, viscosity)]
    snapshots = [state]
    snapshot_steps = [0]
    schedule = iter(dt_schedule) if dt_schedule is not None else None
    t_eps = 1e-12 * max(controls.t_final, 1.0)
    step_index = 0
    aborted = False
    reason = ""
    while state.time < controls.t_final - t_eps:
        if schedule is not None:
            try:
                dt = next(schedule)
            except StopIteration:
                aborted = True
                reason = "prescribed dt schedule exhausted before the final time"
                break
        else:
            dt = min(cfl_dt(state, controls.cfl, controls.dt_max), controls.t_final - state.time)
        while True:
            terms = forcing(state.time + dt) if forcing is not None else None
            try:
                new_state = step(state, dt, params, viscosity, terms)
                break
            except TimestepRejected as exc:
                if schedule is not None:
                    aborted = True
                    reason = f"prescribed dt rejected: {exc}"
                    break
                dt *= 0.5
                if dt < controls.dt_min:
                    aborted = True
                    reason = f"timestep collapse below dt_min={controls.dt_min:.3e}: {exc}"
                    break
        if aborted:
            break
        step_index += 1
        records.append(
            diagnostics.record_step(state, new_state, dt, params, viscosity, step_index)
        )
        state = new_state
        if step_index % controls.snapshot_stride == 0:
            snapshots.append(state)
            snapshot_steps.append(step_index)
    if snapshot_steps[-1] != step_index:
        snapshots.append(state)
        snapshot_steps.append(step_index)
    return Trajectory(
        "euler", params, viscosity, snapshots, snapshot_steps, records, aborted, reason
    )

"""Time integration in mass coordinates, plus the coordinate transforms.

In the mass coordinate y (cumulative density integral), transport drops out
of the equations: the densities obey d(rho_i)/dt = -rho * rho_i * dv/dy and
the momentum balance carries a density-weighted diffusion d/dy(rho du/dy).
The density update here is multiplicative (an integrating factor), which
keeps every component positive unconditionally and transports all
components with one shared factor, so the concentration fields are
constants of the discrete motion, exactly.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import diagnostics
from .block_tridiag import block_thomas
from .grid import Field, Grid, ddx, ddx_compatible
from .model import FluidParams, ViscosityMatrix, average_velocity, pressure
from .states import EulerState, LagrangeState, TimeControls, Trajectory


class MassConsistencyError(RuntimeError):
    """The specific volume of a mass-coordinate state does not integrate to 1."""


def total_mass_coordinate(rho0: Sequence[Field]) -> float:
    """Total mass d of the initial data: the trapezoid integral of the total
    density over the unit interval."""
    fields = tuple(rho0)
    grid = fields[0].grid
    total = sum(f.values for f in fields)
    h = grid.spacing
    return float(h * (0.5 * total[0] + total[1:-1].sum() + 0.5 * total[-1]))


def _prefix_trapezoid(values: np.ndarray, h: float) -> np.ndarray:
    out = np.empty(values.shape[0])
    out[0] = 0.0
    np.cumsum(0.5 * h * (values[:-1] + values[1:]), out=out[1:])
    return out


def to_lagrangian(state: EulerState) -> LagrangeState:
    """Map a spatial-coordinate state onto the uniform mass grid.

    The mass coordinate of each node is the trapezoid prefix integral of the
    total density; fields are resampled at the uniform mass nodes by
    monotone piecewise-linear interpolation.  Concentration fields are
    computed here once and carried unchanged by the mass-coordinate solver.
    """
    grid = state.grid
    rho_tot = sum(f.values for f in state.rho)
    y = _prefix_trapezoid(rho_tot, grid.spacing)
    d = float(y[-1])
    mass_grid = Grid(grid.n_cells, d)
    targets = mass_grid.nodes
    rho_samples = [np.interp(targets, y, f.values) for f in state.rho]
    total = sum(rho_samples)
    concentrations = tuple(Field(mass_grid, r / total) for r in rho_samples)
    # interpolation alone leaves an O(h^2) residual in the discrete volume
    # identity int(1/rho) dy == 1; rescale it away here so the identity holds
    # at construction and the solver only has to preserve it
    h = mass_grid.spacing
    inv = 1.0 / total
    volume = h * (0.5 * inv[0] + inv[1:-1].sum() + 0.5 * inv[-1])
    total = total * volume
    velocities = tuple(Field(mass_grid, np.interp(targets, y, f.values)) for f in state.u)
    return LagrangeState(state.time, d, Field(mass_grid, total), concentrations, velocities)


def _resample_uniform_cubic(values: np.ndarray, spacing: float, targets: np.ndarray) -> np.ndarray:
    """Catmull-Rom interpolation of uniform-grid samples at arbitrary points.

    Third-order accurate and exact at the nodes; end cells use quadratic
    ghost extrapolation.  Not monotonicity-preserving, so callers guarding a
    sign constraint should fall back to linear interpolation on overshoot.
    """
    last = len(values) - 1
    ext = np.empty(len(values) + 2)
    ext[1:-1] = values
    ext[0] = 3.0 * values[0] - 3.0 * values[1] + values[2]
    ext[-1] = 3.0 * values[-1] - 3.0 * values[-2] + values[-3]
    pos = np.clip(targets / spacing, 0.0, float(last))
    idx = np.minimum(pos.astype(int), last - 1)
    th = pos - idx
    f0, f1, f2, f3 = ext[idx], ext[idx + 1], ext[idx + 2], ext[idx + 3]
    return 0.5 * (
        2.0 * f1
        + (f2 - f0) * th
        + (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) * th**2
        + (3.0 * f1 - f0 - 3.0 * f2 + f3) * th**3
    )


def to_eulerian(state: LagrangeState, consistency_tol: float = 1e-6) -> EulerState:
    """Map a mass-coordinate state back onto the uniform unit spatial grid.

    The spatial position of each mass node is the trapezoid prefix integral
    of the specific volume 1/rho; it must reach 1 at y = d within
    consistency_tol (healthy runs stay well inside 1e-8), otherwise the
    state is rejected.  The tiny residual is scaled out before resampling so
    the last node maps exactly to x = 1.  Fields are resampled with cubic
    interpolation (the inverse map serves as a cross-solver oracle, so its
    own error should sit below the solvers'), falling back to linear for any
    density the cubic would push nonpositive.
    """
    grid = state.grid
    r = state.rho_total.values
    x = _prefix_trapezoid(1.0 / r, grid.spacing)
    x_end = float(x[-1])
    if abs(x_end - 1.0) > consistency_tol:
        raise MassConsistencyError(
            f"specific volume integrates to {x_end!r}, expected 1 within {consistency_tol:g}"
        )
    x = x / x_end
    unit_grid = Grid(grid.n_cells, 1.0)
    y_at = np.interp(unit_grid.nodes, x, grid.nodes)
    rho_fields = []
    for c in state.concentrations:
        src = c.values * r
        out = _resample_uniform_cubic(src, grid.spacing, y_at)
        if np.any(out <= 0.0):
            out = np.interp(y_at, grid.nodes, src)
        rho_fields.append(Field(unit_grid, out))
    u_fields = []
    for f in state.u:
        out = _resample_uniform_cubic(f.values, grid.spacing, y_at)
        # endpoints map to endpoints, where velocities vanish by the boundary
        # condition; snap away the interpolation roundoff
        out[0] = 0.0
        out[-1] = 0.0
        u_fields.append(Field(unit_grid, out))
    return EulerState(state.time, tuple(rho_fields), tuple(u_fields))


def density_decay_factor(rho_total: np.ndarray, dyv: np.ndarray, dt: float) -> np.ndarray:
    """Nodewise integrating factor exp(-dt * rho * dv/dy); always positive."""
    return np.exp(-dt * rho_total * dyv)


def density_update(state: LagrangeState, dt: float) -> Field:
    """Multiplicative density update; returns the new total density field.

    Every component density is the (frozen) concentration times this total,
    so all components shrink or grow by the same nodewise factor and the
    concentration ratios are untouched for any dt and any velocity field.
    The velocity divergence uses the integral-compatible stencil so the
    dt-linear part of the specific-volume drift cancels exactly.
    """
    dyv = ddx_compatible(average_velocity(state.u)).values
    r = state.rho_total.values
    return Field(state.grid, r * density_decay_factor(r, dyv, dt))


def momentum_solve_lagrange(
    state: LagrangeState, dt: float, params: FluidParams, viscosity: ViscosityMatrix
) -> tuple[Field, ...]:
    """Backward-Euler solve of the mass-coordinate momentum balance.

    c_i (u_i' - u_i)/dt + dp/dy = sum_j mu_ij d/dy(rho du_j'/dy), with the
    time-independent concentration weights c_i as the mass matrix, arithmetic
    face means of rho in the diffusion flux, the pressure gradient explicit
    in the already-updated density, and Dirichlet zero rows at both ends.
    """
    grid = state.grid
    h = grid.spacing
    n = state.n_components
    m = grid.n_nodes
    mu = viscosity.entries
    r = state.rho_total.values

    conc = np.stack([c.values for c in state.concentrations])
    u_stack = np.stack([f.values for f in state.u])
    pgrad = ddx(Field(grid, pressure(r, params))).values
    faces = 0.5 * (r[:-1] + r[1:])

    s = dt / (h * h)
    diag = np.zeros((m, n, n))
    idx = np.arange(n)
    diag[:, idx, idx] = conc.T
    diag[1:-1] += s * (faces[:-1] + faces[1:])[:, None, None] * mu
    sub = np.zeros((m, n, n))
    sup = np.zeros((m, n, n))
    sub[1:-1] = -s * faces[:-1][:, None, None] * mu
    sup[1:-1] = -s * faces[1:][:, None, None] * mu
    rhs = (conc * u_stack).T - dt * pgrad[:, None]
    diag[0] = np.eye(n)
    diag[-1] = np.eye(n)
    rhs[0] = 0.0
    rhs[-1] = 0.0

    try:
        x = block_thomas(sub, diag, sup, rhs)
    except np.linalg.LinAlgError as exc:  # impossible for admissible inputs
        raise RuntimeError(
            "singular pivot in the mass-coordinate momentum solve; the system "
            "is nonsingular for positive concentrations and densities, so this "
            "indicates an internal error"
        ) from exc
    return tuple(Field(grid, x[:, i]) for i in range(n))


def step_lagrange(
    state: LagrangeState, dt: float, params: FluidParams, viscosity: ViscosityMatrix
) -> LagrangeState:
    """One splitting step: density update, then the implicit momentum solve."""
    rho_new = density_update(state, dt)
    mid = LagrangeState(
        state.time, state.total_mass, rho_new, state.concentrations, state.u
    )
    u_new = momentum_solve_lagrange(mid, dt, params, viscosity)
    return LagrangeState(
        state.time + dt, state.total_mass, rho_new, state.concentrations, u_new
    )


def lagrange_dt(state: LagrangeState, cfl: float, dt_max: float) -> float:
    """Accuracy throttle for the explicit density update: limit the relative
    density change per step to about cfl."""
    dyv = ddx_compatible(average_velocity(state.u)).values
    rate = float(np.max(np.abs(state.rho_total.values * dyv)))
    return min(cfl / max(rate, 1e-12), dt_max)


def simulate_lagrange(
    initial: LagrangeState,
    params: FluidParams,
    viscosity: ViscosityMatrix,
    controls: TimeControls,
    dt_schedule: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Advance the mass-coordinate solver to the final time.

    The density update is unconditionally positive, so there is no rejection
    loop; dt comes from the prescribed schedule when given (lockstep
    comparisons against the spatial solver), otherwise from the accuracy
    throttle capped by dt_max.
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
            dt = min(
                lagrange_dt(state, controls.cfl, controls.dt_max),
                controls.t_final - state.time,
            )
        new_state = step_lagrange(state, dt, params, viscosity)
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
        "lagrange", params, viscosity, snapshots, snapshot_steps, records, aborted, reason
    )

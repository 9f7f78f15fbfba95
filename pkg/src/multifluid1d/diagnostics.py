"""Runtime verification: energy budgets, bound checks, and the invariant suite.

Every a priori property the solvers are expected to satisfy (mass
conservation, concentration transport, energy decay and its dissipation
balance, two-sided density bounds, gradient budgets, monotone effective
flux) is computed here as a quantitative check over a trajectory, with
explicit tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields
from typing import Optional

import numpy as np

from .grid import Field, ddx, integrate, l2_norm
from .model import (
    DerivedCoefficients,
    FluidParams,
    ViscosityMatrix,
    average_velocity,
    coercivity_constant,
    derived_coefficients,
)
from .states import EulerState, LagrangeState, StepRecord, Trajectory


@dataclass(frozen=True)
class Tolerances:
    """Explicit tolerances used by the invariant suite.

    energy_step_coeff: per-step energy increase allowance is coeff * dt * h.
    flux_step_coeff: per-step effective-flux increase allowance is coeff * dt.
    refinement_rel_change: allowed relative change of empirical suprema when
    the grid resolution doubles (used by the refinement workflows).
    """

    energy_step_coeff: float = 10.0
    concentration_delta: float = 1e-3
    mass_rel: float = 1e-10
    dissipation_slack: float = 0.1
    density_floor: float = 1e-3
    density_cap: float = 10.0
    refinement_rel_change: float = 0.1
    flux_step_coeff: float = 5.0
    volume_consistency: float = 1e-6
    alpha_quadrature: float = 5e-2

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


@dataclass(frozen=True)
class EnergyReport:
    """Energy bookkeeping for one state.

    kinetic: per-component 0.5 * integral(rho_i u_i^2).
    potential: K/(gamma-1) * integral(rho^gamma) (one copy).
    total: sum of the kinetic entries plus the potential.
    dissipation_rate: sum_i integral(|du_i/dx|^2).
    """

    kinetic: np.ndarray
    potential: float
    total: float
    dissipation_rate: float
    component_mass: np.ndarray

    @property
    def lyapunov(self) -> float:
        """Kinetic energy plus N copies of the potential.  This is the
        combination that is non-increasing along solutions: the N momentum
        equations share one pressure, so the pressure work counts once per
        component."""
        return float(self.kinetic.sum() + len(self.kinetic) * self.potential)


def energy(state, params: FluidParams) -> EnergyReport:
    """Energy report for a state in either coordinate system.

    In mass coordinates the same physical integrals are evaluated with the
    change of variables dx = dy / rho, so the two solvers report comparable
    numbers: kinetic uses the concentration weights, the potential integrand
    becomes rho^(gamma-1), and the dissipation integrand rho * |du/dy|^2.
    """
    gamma = params.polytropic_index
    coeff = params.pressure_const / (gamma - 1.0)
    if isinstance(state, EulerState):
        g = state.grid
        rho_tot = sum(f.values for f in state.rho)
        kinetic = np.array(
            [0.5 * integrate(Field(g, r.values * u.values**2)) for r, u in zip(state.rho, state.u)]
        )
        potential = coeff * integrate(Field(g, rho_tot**gamma))
        dissipation = sum(integrate(Field(g, ddx(u).values ** 2)) for u in state.u)
        mass = np.array([integrate(f) for f in state.rho])
    elif isinstance(state, LagrangeState):
        g = state.grid
        r = state.rho_total.values
        kinetic = np.array(
            [
                0.5 * integrate(Field(g, c.values * u.values**2))
                for c, u in zip(state.concentrations, state.u)
            ]
        )
        potential = coeff * integrate(Field(g, r ** (gamma - 1.0)))
        dissipation = sum(integrate(Field(g, r * ddx(u).values ** 2)) for u in state.u)
        mass = np.array([integrate(c) for c in state.concentrations])
    else:
        raise TypeError(f"unsupported state type {type(state)!r}")
    total = float(kinetic.sum() + potential)
    return EnergyReport(kinetic, float(potential), total, float(dissipation), mass)


def lograd_norm(state) -> float:
    """L2 norm of d(ln rho)/dy for the total density, on the state's own grid."""
    if isinstance(state, LagrangeState):
        r = state.rho_total
    else:
        r = Field(state.grid, sum(f.values for f in state.rho))
    return l2_norm(ddx(Field(r.grid, np.log(r.values))))


def _gradient_form(state, mu: np.ndarray) -> float:
    """Quadratic form sum_ij mu_ij integral(du_i du_j), with the mass-grid
    weighting rho du_i du_j when the state lives in mass coordinates."""
    g = state.grid
    grads = [ddx(u).values for u in state.u]
    weight = state.rho_total.values if isinstance(state, LagrangeState) else 1.0
    total = 0.0
    n = len(grads)
    for i in range(n):
        for j in range(n):
            total += mu[i, j] * integrate(Field(g, weight * grads[i] * grads[j]))
    return float(total)


def initial_record(state, params: FluidParams, viscosity: ViscosityMatrix) -> StepRecord:
    rep = energy(state, params)
    rho_fields = state.rho
    return StepRecord(
        step=0,
        t=state.time,
        dt=0.0,
        kinetic=rep.kinetic,
        potential=rep.potential,
        dissipation_rate=rep.dissipation_rate,
        component_mass=rep.component_mass,
        mu_gradform=_gradient_form(state, viscosity.entries),
        dudt_weighted_l2sq=0.0,
        drhodt_l2=np.zeros(state.n_components),
        lograd=lograd_norm(state),
        rho_min=np.array([f.values.min() for f in rho_fields]),
        rho_max=np.array([f.values.max() for f in rho_fields]),
    )


def record_step(
    prev, new, dt: float, params: FluidParams, viscosity: ViscosityMatrix, step_index: int
) -> StepRecord:
    """Diagnostics for one accepted step from prev to new (dt > 0)."""
    rep = energy(new, params)
    g = new.grid
    if isinstance(new, LagrangeState):
        weights = [c.values for c in new.concentrations]
    else:
        weights = [f.values for f in new.rho]
    dudt_sq = 0.0
    for w, u_new, u_prev in zip(weights, new.u, prev.u):
        quot = (u_new.values - u_prev.values) / dt
        dudt_sq += integrate(Field(g, w * quot * quot))
    rho_new = new.rho
    rho_prev = prev.rho
    drhodt = np.array(
        [l2_norm(Field(g, (a.values - b.values) / dt)) for a, b in zip(rho_new, rho_prev)]
    )
    return StepRecord(
        step=step_index,
        t=new.time,
        dt=dt,
        kinetic=rep.kinetic,
        potential=rep.potential,
        dissipation_rate=rep.dissipation_rate,
        component_mass=rep.component_mass,
        mu_gradform=_gradient_form(new, viscosity.entries),
        dudt_weighted_l2sq=float(dudt_sq),
        drhodt_l2=drhodt,
        lograd=lograd_norm(new),
        rho_min=np.array([f.values.min() for f in rho_new]),
        rho_max=np.array([f.values.max() for f in rho_new]),
    )


# ---------------------------------------------------------------------------
# invariant entries


@dataclass
class InvariantEntry:
    name: str
    violation: float
    tolerance: float
    passed: bool
    note: str = ""
    skipped: bool = False
    error: str = ""

    def line(self) -> str:
        if self.error:
            return f"ERROR {self.name}: {self.error}"
        if self.skipped:
            return f"SKIP  {self.name}: {self.note}"
        status = "PASS" if self.passed else "FAIL"
        out = f"{status}  {self.name}: violation {self.violation:.3e} vs tolerance {self.tolerance:.3e}"
        if self.note:
            out += f" ({self.note})"
        return out


@dataclass
class InvariantReport:
    scope: str
    entries: list[InvariantEntry]

    @property
    def passed(self) -> bool:
        return all(e.passed or e.skipped for e in self.entries)

    def entry(self, name: str) -> InvariantEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = [f"invariant suite ({self.scope} scope): {'PASS' if self.passed else 'FAIL'}"]
        out.extend(e.line() for e in self.entries)
        return out

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "passed": self.passed,
            "entries": [
                {
                    "name": e.name,
                    "violation": e.violation,
                    "tolerance": e.tolerance,
                    "passed": e.passed,
                    "note": e.note,
                    "skipped": e.skipped,
                    "error": e.error,
                }
                for e in self.entries
            ],
        }


def mass_conservation(traj: Trajectory, tol: float) -> InvariantEntry:
    """Relative drift of every component mass along the run."""
    base = traj.records[0].component_mass
    drift = 0.0
    for rec in traj.records[1:]:
        rel = np.abs(rec.component_mass - base) / np.maximum(np.abs(base), 1e-300)
        drift = max(drift, float(rel.max()))
    return InvariantEntry("mass_conservation", drift, tol, drift <= tol)


def concentration_bounds(traj: Trajectory, delta: float) -> InvariantEntry:
    """Concentrations must stay inside the initial min/max envelope.

    For mass-coordinate trajectories the concentrations are constants of the
    scheme and the violation is identically zero; for spatial-coordinate
    trajectories the envelope may be exceeded by at most delta.
    """
    if traj.coords == "lagrange":
        base = [c.values for c in traj.initial_state.concentrations]
        worst = 0.0
        for s in traj.states:
            for c0, c in zip(base, s.concentrations):
                worst = max(worst, float(np.max(np.abs(c.values - c0))))
        return InvariantEntry(
            "concentration_exactness",
            worst,
            0.0,
            worst <= 0.0,
            note="constant by construction in mass coordinates",
        )
    s0 = traj.initial_state
    rho0 = sum(f.values for f in s0.rho)
    lo = [float((f.values / rho0).min()) for f in s0.rho]
    hi = [float((f.values / rho0).max()) for f in s0.rho]
    worst = 0.0
    for s in traj.states:
        rho = sum(f.values for f in s.rho)
        for i, f in enumerate(s.rho):
            c = f.values / rho
            worst = max(worst, float(max(c.max() - hi[i], lo[i] - c.min(), 0.0)))
    return InvariantEntry("concentration_bounds", worst, delta, worst <= delta)


def energy_monotonicity(traj: Trajectory, coeff: float) -> InvariantEntry:
    """Per-step increase of the decaying energy budget, normalized by the
    allowance coeff * dt * h.  Passes when the normalized maximum is <= 1."""
    h = traj.initial_state.grid.spacing
    worst = 0.0
    recs = traj.records
    for prev, cur in zip(recs[:-1], recs[1:]):
        allowed = coeff * cur.dt * h
        if allowed <= 0.0:
            continue
        rise = cur.energy_lyapunov - prev.energy_lyapunov
        worst = max(worst, rise / allowed)
    worst = max(worst, 0.0)
    return InvariantEntry(
        "energy_monotonicity",
        worst,
        1.0,
        worst <= 1.0,
        note=f"allowance {coeff:g}*dt*h per step",
    )


def energy_dissipation_balance(traj: Trajectory, slack: float) -> InvariantEntry:
    """The total energy drop must cover (1 - slack) * C0 times the
    time-integrated velocity-gradient dissipation."""
    c0 = coercivity_constant(traj.viscosity)
    recs = traj.records
    drop = recs[0].energy_lyapunov - recs[-1].energy_lyapunov
    dissipated = sum(r.dt * r.dissipation_rate for r in recs[1:])
    required = (1.0 - slack) * c0 * dissipated
    violation = max(0.0, required - drop)
    return InvariantEntry(
        "energy_dissipation_balance",
        violation,
        0.0,
        violation <= 0.0,
        note=f"drop {drop:.6e}, required {required:.6e}",
    )


def density_bounds(traj: Trajectory, floor: float, cap: float) -> InvariantEntry:
    lo = min(float(r.rho_min.min()) for r in traj.records)
    hi = max(float(r.rho_max.max()) for r in traj.records)
    violation = max(floor - lo, hi - cap, 0.0)
    return InvariantEntry(
        "density_bounds",
        violation,
        0.0,
        violation <= 0.0,
        note=f"min {lo:.6e}, max {hi:.6e}, window [{floor:g}, {cap:g}]",
    )


def boundary_velocities(traj: Trajectory) -> InvariantEntry:
    worst = 0.0
    for s in traj.states:
        for u in s.u:
            worst = max(worst, abs(float(u.values[0])), abs(float(u.values[-1])))
    return InvariantEntry("boundary_velocities", worst, 0.0, worst <= 0.0)


def volume_consistency(traj: Trajectory, tol: float) -> InvariantEntry:
    """In mass coordinates the specific volume must integrate to the length
    of the spatial domain (1) at all times."""
    worst = 0.0
    for s in traj.states:
        vol = integrate(Field(s.grid, 1.0 / s.rho_total.values))
        worst = max(worst, abs(vol - 1.0))
    return InvariantEntry("volume_consistency", worst, tol, worst <= tol)


def log_density_gradient(traj: Trajectory) -> InvariantEntry:
    sup = max(r.lograd for r in traj.records)
    ok = math.isfinite(sup)
    return InvariantEntry(
        "log_density_gradient",
        sup,
        math.inf,
        ok,
        note="supremum over the run; refinement stability is checked across paired resolutions",
    )


def velocity_h1_budget(traj: Trajectory) -> InvariantEntry:
    _, beta = h1_velocity_series(traj)
    val = float(beta[-1])
    ok = math.isfinite(val)
    return InvariantEntry("velocity_h1_budget", val, math.inf, ok, note="budget at final time")


def h1_velocity_series(traj: Trajectory):
    """Velocity-gradient quadratic form per step plus the accumulated
    density-weighted acceleration integral (the discrete H1 budget)."""
    times = np.array([r.t for r in traj.records])
    cumulative = 0.0
    beta = np.empty(len(traj.records))
    for k, rec in enumerate(traj.records):
        cumulative += rec.dt * rec.dudt_weighted_l2sq
        beta[k] = rec.mu_gradform + cumulative
    return times, beta


def density_time_derivative_norm(traj: Trajectory):
    """Per-component L2 norms of the discrete time derivative of density."""
    times = np.array([r.t for r in traj.records[1:]])
    values = np.stack([r.drhodt_l2 for r in traj.records[1:]]) if len(traj.records) > 1 else np.zeros((0, traj.params.n_components))
    return times, values


# ---------------------------------------------------------------------------
# effective viscous flux


@dataclass
class EffectiveFluxSeries:
    """Flux potential series and density samples along traced particle paths.

    v_flux holds the weighted momentum field V at every stored step, alpha
    the accumulated flux potential (alpha at t=0 is the prefix integral of
    the initial V), path_positions the traced particle locations, and
    path_values the samples of rho * exp(alpha) along each path.
    """

    times: np.ndarray
    v_flux: list
    alpha: list
    path_positions: np.ndarray
    path_values: np.ndarray
    quadrature_estimate: float


def effective_flux_series(
    traj: Trajectory, coeffs: Optional[DerivedCoefficients] = None, n_paths: int = 16
) -> EffectiveFluxSeries:
    """Trace the monotone effective-flux quantity along particle paths.

    Requires a spatial-coordinate trajectory stored at every step; the time
    quadrature of the flux potential is the trapezoid rule over the stored
    states, and paths are advanced with the solver's own explicit steps and
    linear interpolation of the average velocity.
    """
    if traj.coords != "euler":
        raise ValueError("effective flux series is defined on the spatial-coordinate solver")
    if coeffs is None:
        coeffs = derived_coefficients(traj.viscosity, traj.params)
    states = traj.states
    params = traj.params
    n = params.n_components
    colsum = coeffs.inverse_entries.sum(axis=0)
    k_eff = coeffs.effective_pressure_coeff
    xs = states[0].grid.nodes
    h = states[0].grid.spacing

    def v_weighted(s) -> np.ndarray:
        total = np.zeros_like(s.rho[0].values)
        for j in range(n):
            total += colsum[j] * s.rho[j].values * s.u[j].values
        return total / n

    def integrand(s, vw: np.ndarray) -> np.ndarray:
        v = average_velocity(s.u)
        rho = sum(f.values for f in s.rho)
        return ddx(v).values - k_eff * rho**params.polytropic_index - v.values * vw

    times = np.array([s.time for s in states])
    v_series = [v_weighted(s) for s in states]
    g_series = [integrand(s, vw) for s, vw in zip(states, v_series)]

    alpha0 = np.concatenate(
        [[0.0], np.cumsum(0.5 * h * (v_series[0][:-1] + v_series[0][1:]))]
    )
    alpha = [alpha0]
    quad_est = 0.0
    for k in range(1, len(states)):
        dt = times[k] - times[k - 1]
        alpha.append(alpha[-1] + 0.5 * dt * (g_series[k - 1] + g_series[k]))
        quad_est += dt * float(np.max(np.abs(g_series[k] - g_series[k - 1]))) / 12.0

    positions = np.empty((len(states), n_paths))
    values = np.empty((len(states), n_paths))
    positions[0] = (np.arange(n_paths) + 0.5) / n_paths
    for k, s in enumerate(states):
        rho = sum(f.values for f in s.rho)
        values[k] = np.interp(positions[k], xs, rho) * np.exp(
            np.interp(positions[k], xs, alpha[k])
        )
        if k + 1 < len(states):
            dt = times[k + 1] - times[k]
            v = average_velocity(s.u).values
            moved = positions[k] + dt * np.interp(positions[k], xs, v)
            positions[k + 1] = np.clip(moved, 0.0, 1.0)

    return EffectiveFluxSeries(times, v_series, alpha, positions, values, quad_est)


def effective_flux_monotonicity(
    traj: Trajectory, tolerances: Tolerances, coeffs: Optional[DerivedCoefficients] = None
) -> InvariantEntry:
    """rho * exp(alpha) along every traced path may rise between consecutive
    steps by at most flux_step_coeff * dt (normalized to 1)."""
    name = "effective_flux_monotonicity"
    if traj.coords != "euler":
        return InvariantEntry(name, 0.0, 1.0, True, note="spatial solver only", skipped=True)
    if not traj.per_step_snapshots or len(traj.states) < 2:
        return InvariantEntry(
            name, 0.0, 1.0, True, note="needs per-step snapshots (stride 1)", skipped=True
        )
    series = effective_flux_series(traj, coeffs)
    if series.quadrature_estimate > tolerances.alpha_quadrature:
        return InvariantEntry(
            name,
            series.quadrature_estimate,
            tolerances.alpha_quadrature,
            False,
            note="flux-potential quadrature estimate exceeds tolerance; snapshots too sparse",
        )
    worst = 0.0
    for k in range(1, len(series.times)):
        dt = series.times[k] - series.times[k - 1]
        allowed = tolerances.flux_step_coeff * dt
        rise = float(np.max(series.path_values[k] - series.path_values[k - 1]))
        worst = max(worst, rise / allowed)
    worst = max(worst, 0.0)
    return InvariantEntry(
        name, worst, 1.0, worst <= 1.0, note=f"allowance {tolerances.flux_step_coeff:g}*dt per step"
    )


# ---------------------------------------------------------------------------
# stability gap (empirical well-posedness surrogate)


@dataclass(frozen=True)
class StabilityGap:
    delta: float
    gap: float
    ratio: float


def stability_gap(config, delta: float) -> StabilityGap:
    """Largest L2 distance over time between a base run and a run whose
    initial velocity is perturbed by an L2-size delta, on the same grid and
    the same dt schedule.  Reported as (gap, gap/delta)."""
    from . import workflows  # runtime import keeps the module graph acyclic

    base = workflows.run_euler(config)
    if delta == 0.0:
        other = workflows.run_euler(config, dt_schedule=base.dt_sequence)
    else:
        other = workflows.run_euler(
            config, dt_schedule=base.dt_sequence, velocity_perturbation=delta
        )
    gap = 0.0
    for a, b in zip(base.states, other.states):
        gap = max(gap, state_distance(a, b))
    ratio = gap / delta if delta > 0.0 else 0.0
    return StabilityGap(delta, gap, ratio)


def state_distance(a: EulerState, b: EulerState) -> float:
    """Combined L2 distance over all density and velocity fields."""
    g = a.grid
    if b.grid != g:
        raise ValueError("states live on different grids")
    total = 0.0
    for fa, fb in zip(a.rho, b.rho):
        d = fa.values - fb.values
        total += integrate(Field(g, d * d))
    for fa, fb in zip(a.u, b.u):
        d = fa.values - fb.values
        total += integrate(Field(g, d * d))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# the consolidated suite


def run_invariant_suite(traj: Trajectory, tolerances: Optional[Tolerances] = None) -> InvariantReport:
    """Run every invariant check applicable to the trajectory's coordinate
    system.  Individual failures are recorded per entry; the suite itself
    never aborts."""
    tol = tolerances or Tolerances()
    scope = (
        "full"
        if traj.params.in_guarantee_scope
        else "single-component sanity (guarantees assume 2 or more components)"
    )
    checks = [
        ("mass_conservation", lambda: mass_conservation(traj, tol.mass_rel)),
        ("concentration", lambda: concentration_bounds(traj, tol.concentration_delta)),
        ("energy_monotonicity", lambda: energy_monotonicity(traj, tol.energy_step_coeff)),
        ("energy_dissipation_balance", lambda: energy_dissipation_balance(traj, tol.dissipation_slack)),
        ("density_bounds", lambda: density_bounds(traj, tol.density_floor, tol.density_cap)),
        ("boundary_velocities", lambda: boundary_velocities(traj)),
        ("log_density_gradient", lambda: log_density_gradient(traj)),
        ("velocity_h1_budget", lambda: velocity_h1_budget(traj)),
    ]
    if traj.coords == "lagrange":
        checks.append(("volume_consistency", lambda: volume_consistency(traj, tol.volume_consistency)))
    else:
        checks.append(("effective_flux_monotonicity", lambda: effective_flux_monotonicity(traj, tol)))
    entries = []
    for name, check in checks:
        try:
            entries.append(check())
        except Exception as exc:  # diagnostics must never take the suite down
            entries.append(
                InvariantEntry(
                    name=name,
                    violation=math.nan,
                    tolerance=math.nan,
                    passed=False,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return InvariantReport(scope, entries)

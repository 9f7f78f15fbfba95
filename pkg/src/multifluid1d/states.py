"""State containers, per-step records, and trajectory bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grid import Field, Grid, require_same_grid
from .model import FluidParams, ViscosityMatrix


@dataclass(frozen=True)
class EulerState:
    """Densities and velocities of every component on the spatial grid.

    Invariants enforced at construction: all fields share one grid, every
    density is strictly positive, and velocities vanish exactly at both
    boundary nodes.
    """

    time: float
    rho: tuple[Field, ...]
    u: tuple[Field, ...]

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(self.rho))
        object.__setattr__(self, "u", tuple(self.u))
        if len(self.rho) != len(self.u) or not self.rho:
            raise ValueError("need matching, nonempty density and velocity tuples")
        require_same_grid(*self.rho, *self.u)
        for i, f in enumerate(self.rho):
            if not np.all(f.values > 0.0):
                raise ValueError(f"rho[{i}] must be strictly positive")
        for i, f in enumerate(self.u):
            if f.values[0] != 0.0 or f.values[-1] != 0.0:
                raise ValueError(f"u[{i}] must vanish exactly at the boundary nodes")

    @property
    def grid(self) -> Grid:
        return self.rho[0].grid

    @property
    def n_components(self) -> int:
        return len(self.rho)


@dataclass(frozen=True)
class SourceTerms:
    """Optional momentum forcing fields, one per component (zero if omitted)."""

    fields: Optional[tuple[Field, ...]] = None

    def __post_init__(self):
        if self.fields is not None:
            object.__setattr__(self, "fields", tuple(self.fields))

    def stack(self, n_components: int, n_nodes: int) -> np.ndarray:
        if self.fields is None:
            return np.zeros((n_components, n_nodes))
        if len(self.fields) != n_components:
            raise ValueError("forcing component count mismatch")
        return np.stack([f.values for f in self.fields])


@dataclass(frozen=True)
class LagrangeState:
    """Mixture state on the uniform mass-coordinate grid over [0, d].

    The state stores the total density and the per-component concentration
    fields.  Concentrations are set once, when the state is first built from
    initial data, and every later state reuses the same arrays: the mass-form
    continuity equations transport all components with one shared factor, so
    the concentrations are constants of the motion and the representation
    makes that exact at the bit level.  Component densities are derived as
    concentration * total density.
    """

    time: float
    total_mass: float
    rho_total: Field
    concentrations: tuple[Field, ...]
    u: tuple[Field, ...]

    def __post_init__(self):
        object.__setattr__(self, "concentrations", tuple(self.concentrations))
        object.__setattr__(self, "u", tuple(self.u))
        if len(self.concentrations) != len(self.u) or not self.u:
            raise ValueError("need matching, nonempty concentration and velocity tuples")
        require_same_grid(self.rho_total, *self.concentrations, *self.u)
        if not self.total_mass > 0.0:
            raise ValueError("total mass must be positive")
        if abs(self.grid.length - self.total_mass) > 1e-12 * self.total_mass:
            raise ValueError("mass grid length must equal the total mass")
        if not np.all(self.rho_total.values > 0.0):
            raise ValueError("total density must be strictly positive")
        csum = sum(c.values for c in self.concentrations)
        if np.max(np.abs(csum - 1.0)) > 1e-12:
            raise ValueError("concentrations must sum to one at every node")
        for i, c in enumerate(self.concentrations):
            if not np.all(c.values > 0.0):
                raise ValueError(f"concentrations[{i}] must be strictly positive")
        for i, f in enumerate(self.u):
            if f.values[0] != 0.0 or f.values[-1] != 0.0:
                raise ValueError(f"u[{i}] must vanish exactly at the boundary nodes")

    @property
    def grid(self) -> Grid:
        return self.rho_total.grid

    @property
    def n_components(self) -> int:
        return len(self.concentrations)

    @property
    def rho(self) -> tuple[Field, ...]:
        """Component densities, derived as concentration times total density."""
        r = self.rho_total.values
        return tuple(Field(self.grid, c.values * r) for c in self.concentrations)


@dataclass(frozen=True)
class StepRecord:
    """Scalar diagnostics captured after one accepted time step.

    The record at step 0 describes the initial state (dt and all time
    differences are zero).
    """

    step: int
    t: float
    dt: float
    kinetic: np.ndarray
    potential: float
    dissipation_rate: float
    component_mass: np.ndarray
    mu_gradform: float
    dudt_weighted_l2sq: float
    drhodt_l2: np.ndarray
    lograd: float
    rho_min: np.ndarray
    rho_max: np.ndarray

    @property
    def energy_total(self) -> float:
        return float(self.kinetic.sum() + self.potential)

    @property
    def energy_lyapunov(self) -> float:
        """Kinetic energy plus the N-weighted potential; this is the budget
        that decays along solutions of the coupled system."""
        return float(self.kinetic.sum() + len(self.kinetic) * self.potential)


@dataclass
class Trajectory:
    """Snapshots plus per-step diagnostic records from one solver run."""

    coords: str
    params: FluidParams
    viscosity: ViscosityMatrix
    states: list
    snapshot_steps: list[int]
    records: list[StepRecord]
    aborted: bool = False
    abort_reason: str = ""

    @property
    def initial_state(self):
        return self.states[0]

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def n_steps(self) -> int:
        return self.records[-1].step

    @property
    def dt_sequence(self) -> list[float]:
        return [r.dt for r in self.records[1:]]

    @property
    def snapshot_times(self) -> list[float]:
        return [s.time for s in self.states]

    @property
    def per_step_snapshots(self) -> bool:
        steps = self.snapshot_steps
        return all(b - a == 1 for a, b in zip(steps[:-1], steps[1:]))


@dataclass(frozen=True)
class TimeControls:
    """Time-integration settings for a run."""

    t_final: float
    cfl: float = 0.5
    dt_max: Optional[float] = None
    dt_min: Optional[float] = None
    snapshot_stride: int = 10

    def __post_init__(self):
        if self.t_final < 0.0:
            raise ValueError("t_final must be nonnegative")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be at least 1")

    def resolved(self, grid_spacing: float) -> "TimeControls":
        """Fill in the defaults that depend on the run: dt_max falls back to
        half the grid spacing, dt_min to 1e-10 of the final time."""
        dt_max = self.dt_max if self.dt_max is not None else 0.5 * grid_spacing
        dt_min = self.dt_min if self.dt_min is not None else 1e-10 * max(self.t_final, 1e-300)
        return replace(self, dt_max=dt_max, dt_min=dt_min)

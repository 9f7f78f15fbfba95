"""Uniform 1D grids and the discrete calculus shared by both solvers.

Conventions: fields are sampled at the n_cells + 1 equispaced nodes of a
closed interval [0, L].  Derivatives are second-order central at interior
nodes with one-sided stencils at the ends, integration is the composite
trapezoid rule, and transport terms use first-order upwind differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Equispaced nodes on [0, length] with n_cells intervals."""

    n_cells: int
    length: float = 1.0

    def __post_init__(self):
        if self.n_cells < 8:
            raise ValueError(f"n_cells must be at least 8, got {self.n_cells}")
        if not self.length > 0.0:
            raise ValueError(f"grid length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        # arange/n evaluates to exactly 1.0 at the last node, so nodes[-1] == length.
        x = self.length * (np.arange(self.n_cells + 1) / self.n_cells)
        x.setflags(write=False)
        return x


@dataclass(frozen=True)
class Field:
    """Nodal samples of a scalar field on a Grid.  Values are copied and read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field needs {self.grid.n_nodes} nodal values, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls.full(grid, 0.0)


def require_same_grid(*fields: Field) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields live on different grids")
    return g


def ddx(f: Field) -> Field:
    """First derivative: central interior stencil, second-order one-sided ends."""
    h = f.grid.spacing
    v = f.values
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return Field(f.grid, out)


def ddx_compatible(f: Field) -> Field:
    """First derivative whose trapezoid integral telescopes exactly.

    Same central interior stencil as ddx, but first-order one-sided end
    stencils, chosen so that integrate(ddx_compatible(f)) equals
    f[-1] - f[0] to roundoff.  Used where a discrete divergence must have
    an exactly vanishing integral for fields that vanish at the ends.
    """
    h = f.grid.spacing
    v = f.values
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (v[1] - v[0]) / h
    out[-1] = (v[-1] - v[-2]) / h
    return Field(f.grid, out)


def d2dx2(f: Field) -> Field:
    """Second derivative: 3-point interior stencil, one-sided 4-point ends.

    The end values are provided for completeness only; the solvers impose
    Dirichlet velocity rows and never read them.
    """
    h = f.grid.spacing
    v = f.values
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return Field(f.grid, out)


def integrate(f: Field) -> float:
    """Composite trapezoid rule over the grid interval."""
    v = f.values
    h = f.grid.spacing
    return float(h * (0.5 * v[0] + v[1:-1].sum() + 0.5 * v[-1]))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(integrate(Field(f.grid, f.values * f.values))))


def upwind_advect(f: Field, v: Field) -> Field:
    """Upwind one-sided derivative of f, donor side picked by sign(v) nodewise.

    Exact for linear f under constant v; returns 0 where v == 0.  End nodes
    fall back to the only available one-sided difference.
    """
    g = require_same_grid(f, v)
    h = g.spacing
    fv = f.values
    vv = v.values
    diff = (fv[1:] - fv[:-1]) / h
    fwd = np.empty_like(fv)
    bwd = np.empty_like(fv)
    fwd[:-1] = diff
    fwd[-1] = diff[-1]
    bwd[1:] = diff
    bwd[0] = diff[0]
    out = np.where(vv > 0.0, bwd, np.where(vv < 0.0, fwd, 0.0))
    return Field(g, out)


def upwind_flux_divergence(rho: Field, v: Field) -> Field:
    """Discrete d(rho v)/dx in conservative upwind form with zero end fluxes.

    Vertex-centred control volumes: interior nodes own a full cell, the two
    boundary nodes own half cells.  Fluxes live on cell faces, use the
    arithmetic face velocity and the upwind donor density, and the flux
    through x = 0 and x = L is zero, so the trapezoid mass of rho is
    conserved exactly by an update rho - dt * upwind_flux_divergence.
    """
    g = require_same_grid(rho, v)
    h = g.spacing
    r = rho.values
    w = v.values
    vf = 0.5 * (w[:-1] + w[1:])
    donor = np.where(vf > 0.0, r[:-1], r[1:])
    flux = vf * donor
    out = np.empty_like(r)
    out[1:-1] = (flux[1:] - flux[:-1]) / h
    out[0] = flux[0] / (0.5 * h)
    out[-1] = -flux[-1] / (0.5 * h)
    return Field(g, out)

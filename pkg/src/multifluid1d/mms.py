"""Manufactured solutions for convergence verification of the spatial solver.

The continuity equations admit no forcing, so manufactured fields must
satisfy them exactly: the total density profile is chosen analytically and
the average velocity is defined as v = -(1/rho) * d/dt(prefix mass), which
closes mass transport identically.  Component velocities add an equal and
opposite shear on top of v, and the momentum forcing that makes the pair an
exact solution is derived symbolically and compiled to numpy callables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import Field, Grid
from .model import FluidParams, ViscosityMatrix
from .states import EulerState, SourceTerms


@dataclass(frozen=True)
class ManufacturedCase:
    """An exact solution plus the momentum forcing that sustains it."""

    name: str
    n_components: int
    rho_funcs: tuple[Callable, ...]
    u_funcs: tuple[Callable, ...]
    forcing_funcs: tuple[Callable, ...]
    continuity_residual: Callable

    def exact_state(self, grid: Grid, t: float) -> EulerState:
        x = grid.nodes
        rho = tuple(Field(grid, f(x, t)) for f in self.rho_funcs)
        u_values = []
        for f in self.u_funcs:
            vals = np.array(f(x, t), dtype=float)
            # boundary velocities are analytically zero; snap away the sin/cos roundoff
            if max(abs(vals[0]), abs(vals[-1])) > 1e-10:
                raise ValueError("manufactured velocity does not vanish at the boundary")
            vals[0] = 0.0
            vals[-1] = 0.0
            u_values.append(Field(grid, vals))
        return EulerState(t, rho, tuple(u_values))

    def initial_state(self, grid: Grid) -> EulerState:
        return self.exact_state(grid, 0.0)

    def source(self, grid: Grid, t: float) -> SourceTerms:
        x = grid.nodes
        return SourceTerms(tuple(Field(grid, f(x, t)) for f in self.forcing_funcs))

    def errors(self, state: EulerState) -> dict[str, float]:
        """L2 errors of every field against the exact solution at state.time."""
        from .grid import integrate

        exact = self.exact_state(state.grid, state.time)
        out = {}
        for i, (a, b) in enumerate(zip(state.rho, exact.rho)):
            d = a.values - b.values
            out[f"rho_{i + 1}"] = float(np.sqrt(integrate(Field(state.grid, d * d))))
        for i, (a, b) in enumerate(zip(state.u, exact.u)):
            d = a.values - b.values
            out[f"u_{i + 1}"] = float(np.sqrt(integrate(Field(state.grid, d * d))))
        return out


def _broadcast(fn: Callable) -> Callable:
    def wrapped(x: np.ndarray, t: float) -> np.ndarray:
        out = np.asarray(fn(x, t), dtype=float)
        return np.broadcast_to(out, np.shape(x)).copy()

    return wrapped


def steady_case(params: FluidParams, rho_values: Sequence[float] | None = None) -> ManufacturedCase:
    """Uniform densities at rest: an exact steady solution with zero forcing."""
    n = params.n_components
    values = tuple(rho_values) if rho_values is not None else tuple(0.5 + 0.25 * i for i in range(n))
    rho_funcs = tuple(_broadcast(lambda x, t, v=v: np.full_like(x, v)) for v in values)
    zero = _broadcast(lambda x, t: np.zeros_like(x))
    return ManufacturedCase(
        name="steady-uniform",
        n_components=n,
        rho_funcs=rho_funcs,
        u_funcs=(zero,) * n,
        forcing_funcs=(zero,) * n,
        continuity_residual=zero,
    )


def decaying_wave_case(
    params: FluidParams,
    viscosity: ViscosityMatrix,
    density_amp: float = 0.05,
    shear_amp: float = 0.08,
    decay_rate: float = 1.0,
    shear_rate: float = 2.0,
    concentrations: tuple[float, float] = (0.4, 0.6),
) -> ManufacturedCase:
    """Two-component case: a decaying density wave with counter-shearing
    velocities.  Requires exactly two components."""
    if params.n_components != 2:
        raise ValueError("the decaying-wave manufactured case needs exactly 2 components")
    import sympy as sp

    x, t = sp.symbols("x t", real=True)
    xi = sp.Symbol("xi", real=True)

    envelope = sp.exp(-decay_rate * t)
    rho = 1 + density_amp * envelope * sp.sin(2 * sp.pi * x)
    # ensures d(rho)/dt + d(rho v)/dx == 0 identically, with v(0) = v(1) = 0
    mass_rate = sp.integrate(sp.diff(rho, t).subs(x, xi), (xi, 0, x))
    v = -mass_rate / rho
    shear = shear_amp * sp.cos(shear_rate * t) * sp.sin(sp.pi * x)
    u = [v + shear, v - shear]

    c1, c2 = concentrations
    if abs(c1 + c2 - 1.0) > 1e-15:
        raise ValueError("concentrations must sum to 1")
    rho_i = [c1 * rho, c2 * rho]

    gamma = params.polytropic_index
    k_const = params.pressure_const
    mu = viscosity.entries
    forcing = []
    for i in range(2):
        visc = sum(mu[i, j] * sp.diff(u[j], x, 2) for j in range(2))
        f_i = (
            rho_i[i] * (sp.diff(u[i], t) + v * sp.diff(u[i], x))
            + k_const * sp.diff(rho**gamma, x)
            - visc
        )
        forcing.append(f_i)

    residual = sp.diff(rho, t) + sp.diff(rho * v, x)

    def compile_expr(expr):
        return _broadcast(sp.lambdify((x, t), expr, modules="numpy"))

    return ManufacturedCase(
        name="decaying-wave",
        n_components=2,
        rho_funcs=tuple(compile_expr(e) for e in rho_i),
        u_funcs=tuple(compile_expr(e) for e in u),
        forcing_funcs=tuple(compile_expr(e) for e in forcing),
        continuity_residual=compile_expr(residual),
    )

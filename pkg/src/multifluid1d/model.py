"""Physical parameters, the pressure closure, and viscosity-matrix algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, ddx, integrate, require_same_grid


class InadmissibleMatrixError(ValueError):
    """Raised when a viscosity matrix is singular or not positive definite."""


@dataclass(frozen=True)
class FluidParams:
    """Component count and pressure-law constants for the mixture.

    The density and energy guarantees this package checks at runtime assume
    two or more components; single-component runs are allowed but tagged as
    sanity-only in reports.
    """

    n_components: int
    pressure_const: float
    polytropic_index: float

    def __post_init__(self):
        if int(self.n_components) != self.n_components or self.n_components < 1:
            raise ValueError(f"n_components must be a positive integer, got {self.n_components}")
        if not self.pressure_const > 0.0:
            raise ValueError(f"pressure_const must be positive, got {self.pressure_const}")
        if not self.polytropic_index > 1.0:
            raise ValueError(f"polytropic_index must exceed 1, got {self.polytropic_index}")

    @property
    def in_guarantee_scope(self) -> bool:
        return self.n_components >= 2


@dataclass(frozen=True)
class ViscosityMatrix:
    """Symmetric matrix of viscous coupling coefficients.

    Construction requires exact (bitwise) symmetry; positive definiteness is
    a separate admissibility gate so that indefinite matrices can still be
    inspected and reported.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"viscosity matrix must be square, got shape {arr.shape}")
        if not np.array_equal(arr, arr.T):
            raise ValueError("viscosity matrix must be exactly symmetric")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class DerivedCoefficients:
    """Inverse viscosity matrix and the derived effective pressure coefficient."""

    inverse_entries: np.ndarray
    effective_pressure_coeff: float

    def __post_init__(self):
        arr = np.array(self.inverse_entries, dtype=float, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "inverse_entries", arr)


def is_positive_definite(matrix: ViscosityMatrix) -> bool:
    """Cheap admissibility gate via an attempted Cholesky factorization."""
    try:
        np.linalg.cholesky(matrix.entries)
    except np.linalg.LinAlgError:
        return False
    return True


def coercivity_constant(matrix: ViscosityMatrix) -> float:
    """Smallest eigenvalue of the viscosity matrix (symmetric QR).

    Positive iff the matrix is admissible; a nonpositive return value is the
    caller's signal that the matrix must be rejected.
    """
    return float(np.linalg.eigvalsh(matrix.entries)[0])


def derived_coefficients(matrix: ViscosityMatrix, params: FluidParams) -> DerivedCoefficients:
    """Invert the viscosity matrix by a dense LU solve and derive the
    effective pressure coefficient (K/N times the sum of inverse entries)."""
    if not is_positive_definite(matrix):
        raise InadmissibleMatrixError(
            f"viscosity matrix is not positive definite (smallest eigenvalue "
            f"{coercivity_constant(matrix):.6g})"
        )
    n = matrix.n
    inverse = np.linalg.solve(matrix.entries, np.eye(n))
    coeff = params.pressure_const / params.n_components * float(inverse.sum())
    if not coeff > 0.0:
        raise InadmissibleMatrixError(
            f"effective pressure coefficient must be positive, got {coeff:.6g}"
        )
    return DerivedCoefficients(inverse, coeff)


def pressure(rho_total, params: FluidParams):
    """Polytropic pressure K * rho**gamma; accepts scalars or arrays."""
    rho = np.asarray(rho_total, dtype=float)
    if np.any(rho < 0.0):
        raise ValueError("pressure is undefined for negative density")
    out = params.pressure_const * rho**params.polytropic_index
    return float(out) if np.isscalar(rho_total) else out


def average_velocity(u) -> Field:
    """Pointwise arithmetic mean of the component velocity fields."""
    fields = tuple(u)
    if not fields:
        raise ValueError("need at least one velocity field")
    g = require_same_grid(*fields)
    mean = sum(f.values for f in fields) / len(fields)
    return Field(g, mean)


@dataclass(frozen=True)
class InitialDataReport:
    """Result of validating initial data against the well-posedness hypotheses."""

    issues: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_initial_data(rho0, u0) -> InitialDataReport:
    """Check initial fields: strictly positive densities, velocities vanishing
    at both end nodes, and finite discrete H1 norms.  Every violated
    hypothesis is reported individually."""
    rho0 = tuple(rho0)
    u0 = tuple(u0)
    issues = []
    if len(rho0) != len(u0):
        issues.append(
            f"component count mismatch: {len(rho0)} density fields vs {len(u0)} velocity fields"
        )
    try:
        require_same_grid(*rho0, *u0)
    except ValueError:
        issues.append("initial fields are not all sampled on the same grid")
        return InitialDataReport(tuple(issues))
    for i, f in enumerate(rho0):
        if not np.all(f.values > 0.0):
            issues.append(f"rho0[{i}] must be strictly positive everywhere")
        if not _finite_h1(f):
            issues.append(f"rho0[{i}] has a non-finite discrete H1 norm")
    for i, f in enumerate(u0):
        if f.values[0] != 0.0 or f.values[-1] != 0.0:
            issues.append(f"u0[{i}] must vanish exactly at both boundary nodes")
        if not _finite_h1(f):
            issues.append(f"u0[{i}] has a non-finite discrete H1 norm")
    return InitialDataReport(tuple(issues))


def _finite_h1(f: Field) -> bool:
    if not np.all(np.isfinite(f.values)):
        return False
    df = ddx(f)
    return np.isfinite(integrate(Field(f.grid, f.values**2))) and np.isfinite(
        integrate(Field(f.grid, df.values**2))
    )

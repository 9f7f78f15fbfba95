"""Run configuration: JSON schema, validation, and named initial-data profiles.

Config documents are strict JSON with a fixed key set (unknown keys are
errors).  Top-level keys:

    label       optional run name (string)
    params      {"n_components", "pressure_const", "polytropic_index"}
    viscosity   N x N symmetric positive-definite matrix (list of rows)
    grid        {"n": cells}
    time        {"T", "cfl", "dt_max", "dt_min", "snapshot_stride"}
    coords      "euler" | "lagrange" | "both"
    initial     {"rho": [profile, ...], "u": [profile, ...]} or {"path": csv}
    tolerances  optional overrides of the invariant-suite tolerances

Profiles: {"profile": "uniform", "value": v},
          {"profile": "sine", "offset": o, "amplitude": a, "frequency": q}
          evaluating to o + a*sin(pi*q*x) with exact zeros where q*x is an
          integer, and
          {"profile": "bump", "offset": o, "amplitude": a, "center": c,
           "width": w} evaluating to o + a*exp(-((x-c)/w)^2).
A CSV initial-data file has a header "x,rho_1..rho_N,u_1..u_N" and one row
per grid node.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import Tolerances
from .grid import Field, Grid
from .model import (
    FluidParams,
    ViscosityMatrix,
    coercivity_constant,
    is_positive_definite,
    validate_initial_data,
)
from .states import TimeControls


class ConfigError(ValueError):
    """A configuration document failed to parse or validate."""


def sin_pi(z: np.ndarray) -> np.ndarray:
    """sin(pi * z) with exact zeros wherever z is an integer."""
    z = np.asarray(z, dtype=float)
    out = np.sin(np.pi * z)
    return np.where(z % 1.0 == 0.0, 0.0, out)


_PROFILE_KEYS = {
    "uniform": {"profile", "value"},
    "sine": {"profile", "offset", "amplitude", "frequency"},
    "bump": {"profile", "offset", "amplitude", "center", "width"},
}


def evaluate_profile(profile: dict, x: np.ndarray, where: str) -> np.ndarray:
    if not isinstance(profile, dict) or "profile" not in profile:
        raise ConfigError(f"{where}: expected a profile object with a 'profile' key")
    kind = profile["profile"]
    if kind not in _PROFILE_KEYS:
        raise ConfigError(f"{where}.profile: unknown profile {kind!r}")
    unknown = set(profile) - _PROFILE_KEYS[kind]
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)} for profile {kind!r}")
    missing = _PROFILE_KEYS[kind] - set(profile)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)} for profile {kind!r}")
    if kind == "uniform":
        return np.full_like(x, float(profile["value"]))
    if kind == "sine":
        return float(profile["offset"]) + float(profile["amplitude"]) * sin_pi(
            float(profile["frequency"]) * x
        )
    return float(profile["offset"]) + float(profile["amplitude"]) * np.exp(
        -(((x - float(profile["center"])) / float(profile["width"])) ** 2)
    )


@dataclass(frozen=True)
class InitialData:
    """Either named analytic profiles per component or a CSV of node samples."""

    rho_profiles: Optional[tuple[dict, ...]] = None
    u_profiles: Optional[tuple[dict, ...]] = None
    csv_path: Optional[str] = None

    def build(self, grid: Grid, n_components: int) -> tuple[tuple[Field, ...], tuple[Field, ...]]:
        if self.csv_path is not None:
            return _load_initial_csv(Path(self.csv_path), grid, n_components)
        x = grid.nodes
        if len(self.rho_profiles) != n_components or len(self.u_profiles) != n_components:
            raise ConfigError(
                f"initial: need {n_components} rho and u profiles, got "
                f"{len(self.rho_profiles)} and {len(self.u_profiles)}"
            )
        rho = tuple(
            Field(grid, evaluate_profile(s, x, f"initial.rho[{i}]"))
            for i, s in enumerate(self.rho_profiles)
        )
        u = tuple(
            Field(grid, evaluate_profile(s, x, f"initial.u[{i}]"))
            for i, s in enumerate(self.u_profiles)
        )
        return rho, u

    def to_dict(self) -> dict:
        if self.csv_path is not None:
            return {"path": self.csv_path}
        return {"rho": [dict(s) for s in self.rho_profiles], "u": [dict(s) for s in self.u_profiles]}


def _load_initial_csv(path: Path, grid: Grid, n_components: int):
    if not path.exists():
        raise ConfigError(f"initial.path: file not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    expected = ["x"] + [f"rho_{i + 1}" for i in range(n_components)] + [
        f"u_{i + 1}" for i in range(n_components)
    ]
    if header != expected:
        raise ConfigError(f"initial.path: header must be {','.join(expected)}")
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    if data.shape[0] != grid.n_nodes:
        raise ConfigError(
            f"initial.path: need {grid.n_nodes} sample rows, got {data.shape[0]}"
        )
    if np.max(np.abs(data[:, 0] - grid.nodes)) > 1e-12:
        raise ConfigError("initial.path: x column does not match the grid nodes")
    rho = tuple(Field(grid, data[:, 1 + i]) for i in range(n_components))
    u = tuple(Field(grid, data[:, 1 + n_components + i]) for i in range(n_components))
    return rho, u


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings; the single source of truth for a workflow."""

    params: FluidParams
    viscosity: ViscosityMatrix
    n: int
    t_final: float
    initial: InitialData
    cfl: float = 0.5
    dt_max: Optional[float] = None
    dt_min: Optional[float] = None
    snapshot_stride: int = 10
    coords: str = "euler"
    tolerances: Tolerances = field(default_factory=Tolerances)
    label: str = "run"

    def grid(self) -> Grid:
        return Grid(self.n, 1.0)

    def initial_fields(self):
        return self.initial.build(self.grid(), self.params.n_components)

    def time_controls(self) -> TimeControls:
        return TimeControls(
            t_final=self.t_final,
            cfl=self.cfl,
            dt_max=self.dt_max,
            dt_min=self.dt_min,
            snapshot_stride=self.snapshot_stride,
        ).resolved(self.grid().spacing)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "params": {
                "n_components": self.params.n_components,
                "pressure_const": self.params.pressure_const,
                "polytropic_index": self.params.polytropic_index,
            },
            "viscosity": self.viscosity.entries.tolist(),
            "grid": {"n": self.n},
            "time": {
                "T": self.t_final,
                "cfl": self.cfl,
                "dt_max": self.dt_max,
                "dt_min": self.dt_min,
                "snapshot_stride": self.snapshot_stride,
            },
            "coords": self.coords,
            "initial": self.initial.to_dict(),
            "tolerances": self.tolerances.to_dict(),
        }


_TOP_KEYS = {"label", "params", "viscosity", "grid", "time", "coords", "initial", "tolerances"}
_PARAM_KEYS = {"n_components", "pressure_const", "polytropic_index"}
_GRID_KEYS = {"n"}
_TIME_KEYS = {"T", "cfl", "dt_max", "dt_min", "snapshot_stride"}
_INITIAL_KEYS = {"rho", "u", "path"}


def _reject_unknown(doc: dict, allowed: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def config_from_dict(doc: dict) -> RunConfig:
    """Build and fully validate a RunConfig from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "top level")
    for key in ("params", "viscosity", "grid", "time", "initial"):
        if key not in doc:
            raise ConfigError(f"top level: missing required key {key!r}")

    pd = doc["params"]
    _reject_unknown(pd, _PARAM_KEYS, "params")
    for key in _PARAM_KEYS:
        if key not in pd:
            raise ConfigError(f"params: missing required key {key!r}")
    if not float(pd["polytropic_index"]) > 1.0:
        raise ConfigError("params.polytropic_index: polytropic_index must exceed 1")
    if not float(pd["pressure_const"]) > 0.0:
        raise ConfigError("params.pressure_const: must be positive")
    try:
        params = FluidParams(
            int(pd["n_components"]), float(pd["pressure_const"]), float(pd["polytropic_index"])
        )
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc

    try:
        viscosity = ViscosityMatrix(np.array(doc["viscosity"], dtype=float))
    except ValueError as exc:
        raise ConfigError(f"viscosity: {exc}") from exc
    if viscosity.n != params.n_components:
        raise ConfigError(
            f"viscosity: matrix is {viscosity.n}x{viscosity.n} but n_components is "
            f"{params.n_components}"
        )
    if not is_positive_definite(viscosity):
        raise ConfigError(
            f"viscosity: matrix must be positive definite (smallest eigenvalue "
            f"{coercivity_constant(viscosity):.6g})"
        )

    gd = doc["grid"]
    _reject_unknown(gd, _GRID_KEYS, "grid")
    if "n" not in gd:
        raise ConfigError("grid: missing required key 'n'")
    try:
        grid = Grid(int(gd["n"]), 1.0)
    except ValueError as exc:
        raise ConfigError(f"grid.n: {exc}") from exc

    td = doc["time"]
    _reject_unknown(td, _TIME_KEYS, "time")
    if "T" not in td:
        raise ConfigError("time: missing required key 'T'")
    t_final = float(td["T"])
    if t_final < 0.0:
        raise ConfigError("time.T: must be nonnegative")
    cfl = float(td.get("cfl", 0.5))
    if not 0.0 < cfl <= 1.0:
        raise ConfigError("time.cfl: must lie in (0, 1]")
    dt_max = td.get("dt_max")
    dt_min = td.get("dt_min")
    stride = int(td.get("snapshot_stride", 10))
    if stride < 1:
        raise ConfigError("time.snapshot_stride: must be at least 1")

    coords = doc.get("coords", "euler")
    if coords not in ("euler", "lagrange", "both"):
        raise ConfigError(f"coords: must be euler, lagrange, or both, got {coords!r}")

    idoc = doc["initial"]
    _reject_unknown(idoc, _INITIAL_KEYS, "initial")
    if "path" in idoc:
        if "rho" in idoc or "u" in idoc:
            raise ConfigError("initial: give either profiles or a CSV path, not both")
        initial = InitialData(csv_path=str(idoc["path"]))
    else:
        if "rho" not in idoc or "u" not in idoc:
            raise ConfigError("initial: need 'rho' and 'u' profile lists (or a 'path')")
        initial = InitialData(
            rho_profiles=tuple(idoc["rho"]), u_profiles=tuple(idoc["u"])
        )

    tdoc = doc.get("tolerances", {})
    allowed_tols = set(Tolerances().to_dict())
    _reject_unknown(tdoc, allowed_tols, "tolerances")
    tolerances = Tolerances(**{k: float(v) for k, v in tdoc.items()})

    config = RunConfig(
        params=params,
        viscosity=viscosity,
        n=grid.n_cells,
        t_final=t_final,
        initial=initial,
        cfl=cfl,
        dt_max=None if dt_max is None else float(dt_max),
        dt_min=None if dt_min is None else float(dt_min),
        snapshot_stride=stride,
        coords=coords,
        tolerances=tolerances,
        label=str(doc.get("label", "run")),
    )

    rho0, u0 = config.initial_fields()
    report = validate_initial_data(rho0, u0)
    if not report.ok:
        raise ConfigError("initial: " + "; ".join(report.issues))
    return config


def load_config(path) -> RunConfig:
    """Parse, validate, and default a JSON config document."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error: {exc}") from exc
    return config_from_dict(doc)

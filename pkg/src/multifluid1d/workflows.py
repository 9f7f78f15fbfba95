"""End-to-end workflows behind the CLI: simulate, verify, convergence, stability."""

from __future__ import annotations

import json
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import solver_euler, solver_lagrange
from .archive import ArchiveError, read_archive, read_manifest, write_archive
from .config import ConfigError, InitialData, RunConfig, sin_pi
from .diagnostics import (
    InvariantEntry,
    InvariantReport,
    StabilityGap,
    Tolerances,
    run_invariant_suite,
    state_distance,
)
from .grid import Field, Grid
from .model import FluidParams, ViscosityMatrix
from .states import EulerState, Trajectory

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_ABORTED = 2
EXIT_CONFIG = 3


def worker_count(n_jobs: int) -> int:
    """Worker-thread cap: min(jobs, cpus, MULTIFLUID_THREADS if set)."""
    cap = os.cpu_count() or 1
    env = os.environ.get("MULTIFLUID_THREADS")
    if env:
        cap = min(cap, max(1, int(env)))
    return max(1, min(n_jobs, cap))


def build_initial_euler_state(config: RunConfig, velocity_perturbation: float = 0.0) -> EulerState:
    grid = config.grid()
    rho0, u0 = config.initial_fields()
    if velocity_perturbation != 0.0:
        # L2-unit profile sqrt(2) sin(pi x), scaled to the requested size
        bump = velocity_perturbation * np.sqrt(2.0) * sin_pi(grid.nodes)
        u0 = (Field(grid, u0[0].values + bump),) + tuple(u0[1:])
    return EulerState(0.0, rho0, u0)


def run_euler(
    config: RunConfig,
    dt_schedule: Optional[Sequence[float]] = None,
    velocity_perturbation: float = 0.0,
) -> Trajectory:
    initial = build_initial_euler_state(config, velocity_perturbation)
    return solver_euler.simulate(
        initial, config.params, config.viscosity, config.time_controls(), dt_schedule=dt_schedule
    )


def run_lagrange(config: RunConfig, dt_schedule: Optional[Sequence[float]] = None) -> Trajectory:
    initial = solver_lagrange.to_lagrangian(build_initial_euler_state(config))
    return solver_lagrange.simulate_lagrange(
        initial, config.params, config.viscosity, config.time_controls(), dt_schedule=dt_schedule
    )


def run_paired(config: RunConfig) -> tuple[Trajectory, Trajectory]:
    """Run both solvers from the same initial data with the spatial solver's
    dt schedule forced onto the mass-coordinate solver, so snapshots align in
    time exactly."""
    traj_e = run_euler(config)
    traj_l = run_lagrange(config, dt_schedule=traj_e.dt_sequence)
    return traj_e, traj_l


def cross_differences(traj_e: Trajectory, traj_l: Trajectory):
    """Per-snapshot L2 distance between the spatial solution and the
    transformed mass-coordinate solution; returns (times, distances, sup)."""
    times = []
    dists = []
    for s_e, s_l in zip(traj_e.states, traj_l.states):
        if abs(s_e.time - s_l.time) > 1e-9 * max(1.0, abs(s_e.time)):
            raise ValueError("snapshot times of the two solvers do not align")
        mapped = solver_lagrange.to_eulerian(s_l)
        times.append(s_e.time)
        dists.append(state_distance(s_e, mapped))
    return np.array(times), np.array(dists), float(max(dists))


def cmd_simulate(config: RunConfig, out_dir, coords: Optional[str] = None) -> int:
    """Run the selected solver(s) and write archives; 0 on completion, 2 if
    any run aborted."""
    out = Path(out_dir)
    selected = coords or config.coords
    echo = config.to_dict()
    echo["coords"] = selected
    code = EXIT_OK
    if selected == "both":
        t0 = _time.perf_counter()
        traj_e, traj_l = run_paired(config)
        elapsed = _time.perf_counter() - t0
        write_archive(traj_e, out / "euler", echo, {"seconds": elapsed})
        write_archive(traj_l, out / "lagrange", echo, {"seconds": elapsed})
        times, dists, sup = cross_differences(traj_e, traj_l)
        summary = {
            "times": list(times),
            "l2_distance": list(dists),
            "sup_l2_distance": sup,
        }
        (out / "comparison.json").write_text(json.dumps(summary, indent=2) + "\n")
        if traj_e.aborted or traj_l.aborted:
            code = EXIT_ABORTED
    else:
        t0 = _time.perf_counter()
        traj = run_euler(config) if selected == "euler" else run_lagrange(config)
        elapsed = _time.perf_counter() - t0
        write_archive(traj, out / selected, echo, {"seconds": elapsed})
        if traj.aborted:
            code = EXIT_ABORTED
    return code


_PHYSICS_KEYS = ("params", "viscosity", "grid", "initial")


def cmd_verify(archive_dir, config: RunConfig) -> tuple[int, InvariantReport]:
    """Re-run the invariant suite on an archived trajectory.

    Exit code 0 iff every applicable invariant passes; archive corruption is
    reported as a failing archive_integrity entry.
    """
    manifest = read_manifest(archive_dir)  # ArchiveError -> config-level failure
    echo = manifest.get("config", {})
    mine = config.to_dict()
    for key in _PHYSICS_KEYS:
        if echo.get(key) != mine.get(key):
            raise ConfigError(
                f"archive was produced with a different '{key}' section than the given config"
            )
    try:
        traj = read_archive(archive_dir)
    except ArchiveError as exc:
        report = InvariantReport(
            scope="unknown",
            entries=[
                InvariantEntry(
                    "archive_integrity", float("nan"), 0.0, False, error=str(exc)
                )
            ],
        )
        _write_verification(archive_dir, report)
        return EXIT_INVARIANT, report

    report = run_invariant_suite(traj, config.tolerances)
    if traj.coords == "lagrange":
        report.entries.insert(0, _concentration_representation(traj))
    _write_verification(archive_dir, report)
    return (EXIT_OK if report.passed else EXIT_INVARIANT), report


def _concentration_representation(traj: Trajectory) -> InvariantEntry:
    """Archived component densities must match the stored concentration
    fields: max |rho_i/rho - conc_i| stays within the rounding of the stored
    products."""
    worst = 0.0
    base = traj.initial_state.concentrations
    for s in traj.states:
        rho = sum(f.values for f in s.rho)
        for c, f in zip(base, s.rho):
            worst = max(worst, float(np.max(np.abs(f.values / rho - c.values))))
    return InvariantEntry(
        "concentration_representation", worst, 1e-13, worst <= 1e-13
    )


def _write_verification(archive_dir, report: InvariantReport) -> None:
    path = Path(archive_dir) / "verification.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class ConvergenceTable:
    mode: str
    levels: list[int]
    rows: list[dict]
    orders: dict[str, float]
    monotone: bool

    def lines(self) -> list[str]:
        out = [f"convergence study ({self.mode})"]
        for level, row in zip(self.levels, self.rows):
            cells = ", ".join(f"{k}={v:.6e}" for k, v in sorted(row.items()))
            out.append(f"  n={level}: {cells}")
        for k, v in sorted(self.orders.items()):
            out.append(f"  observed order {k}: {v:.3f}")
        if not self.monotone:
            out.append("  WARNING: error decay is not monotone across levels")
        return out

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "levels": self.levels,
            "rows": self.rows,
            "orders": self.orders,
            "monotone": self.monotone,
        }


def _fit_order(h_values: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    e = np.asarray(errors)
    if np.any(e <= 0.0):
        return float("inf")
    slope = np.polyfit(np.log(np.asarray(h_values)), np.log(e), 1)[0]
    return float(slope)


def mms_convergence(
    config: RunConfig,
    levels: Sequence[int],
    t_final: float = 0.25,
    dt_coeff: float = 16.0,
    case=None,
) -> ConvergenceTable:
    """Manufactured-solution errors and observed orders over grid levels.

    The step size scales as dt_coeff * h^2 so the first-order-in-time error
    refines out and the spatial order is measured cleanly.
    """
    from .mms import decaying_wave_case

    if case is None:
        case = decaying_wave_case(config.params, config.viscosity)

    def one_level(n: int) -> dict:
        grid = Grid(n, 1.0)
        controls = replace(
            config.time_controls(),
            t_final=t_final,
            dt_max=dt_coeff * grid.spacing**2,
            snapshot_stride=10**9,
        )
        traj = solver_euler.simulate(
            case.initial_state(grid),
            config.params,
            config.viscosity,
            controls,
            forcing=lambda t, g=grid: case.source(g, t),
        )
        if traj.aborted:
            raise RuntimeError(f"manufactured run aborted at n={n}: {traj.abort_reason}")
        return case.errors(traj.final_state)

    levels = list(levels)
    with ThreadPoolExecutor(max_workers=worker_count(len(levels))) as pool:
        rows = list(pool.map(one_level, levels))
    h_values = [1.0 / n for n in levels]
    orders = {key: _fit_order(h_values, [row[key] for row in rows]) for key in rows[0]}
    monotone = all(
        all(rows[k + 1][key] <= rows[k][key] for key in rows[0]) for k in range(len(rows) - 1)
    )
    return ConvergenceTable("manufactured", levels, rows, orders, monotone)


def _restrict_to_coarse(state: EulerState, coarse: Grid) -> EulerState:
    ratio = state.grid.n_cells // coarse.n_cells
    if coarse.n_cells * ratio != state.grid.n_cells:
        raise ValueError("grids do not nest")
    rho = tuple(Field(coarse, f.values[::ratio]) for f in state.rho)
    u = tuple(Field(coarse, f.values[::ratio]) for f in state.u)
    return EulerState(state.time, rho, u)


def cross_convergence(config: RunConfig, levels: Sequence[int]) -> ConvergenceTable:
    """Mutual-verification study: the two solvers run side by side per level;
    reports the sup-in-time L2 distance between them, plus self-convergence
    of the spatial solver between consecutive levels."""
    levels = list(levels)

    def one_level(n: int):
        return run_paired(replace(config, n=n))

    with ThreadPoolExecutor(max_workers=worker_count(len(levels))) as pool:
        paired = list(pool.map(one_level, levels))
    rows = []
    for (traj_e, traj_l) in paired:
        _, _, sup = cross_differences(traj_e, traj_l)
        rows.append({"cross_sup_l2": sup})
    for k in range(len(levels) - 1):
        coarse_state = paired[k][0].final_state
        fine_state = _restrict_to_coarse(paired[k + 1][0].final_state, coarse_state.grid)
        rows[k]["self_l2_vs_next"] = state_distance(coarse_state, fine_state)
    h_values = [1.0 / n for n in levels]
    orders = {"cross_sup_l2": _fit_order(h_values, [r["cross_sup_l2"] for r in rows])}
    if len(levels) >= 3:
        orders["self_l2"] = _fit_order(
            h_values[:-1], [rows[k]["self_l2_vs_next"] for k in range(len(levels) - 1)]
        )
    monotone = all(
        rows[k + 1]["cross_sup_l2"] <= rows[k]["cross_sup_l2"] for k in range(len(rows) - 1)
    )
    return ConvergenceTable("cross", levels, rows, orders, monotone)


def cmd_convergence(
    config: RunConfig, levels: Sequence[int], mms: bool = False, out: Optional[Path] = None
) -> ConvergenceTable:
    if len(levels) < 3:
        raise ConfigError("convergence needs at least 3 grid levels")
    table = mms_convergence(config, levels) if mms else cross_convergence(config, levels)
    if out is not None:
        Path(out).write_text(json.dumps(table.to_dict(), indent=2) + "\n")
    return table


# ---------------------------------------------------------------------------
# stability (empirical well-posedness surrogate)


@dataclass
class StabilityTable:
    deltas: list[float]
    gaps: list[float]
    ratios: list[float]
    stable: bool

    def lines(self) -> list[str]:
        out = ["stability study (sup-in-time L2 gap per perturbation size)"]
        for d, g, r in zip(self.deltas, self.gaps, self.ratios):
            out.append(f"  delta={d:.3e}: gap={g:.6e} ratio={r:.6e}")
        out.append(f"  verdict: {'stable' if self.stable else 'NOT stable'}")
        return out

    def to_dict(self) -> dict:
        return {
            "deltas": self.deltas,
            "gaps": self.gaps,
            "ratios": self.ratios,
            "stable": self.stable,
        }


def cmd_stability(config: RunConfig, deltas: Sequence[float]) -> StabilityTable:
    """Gap table for initial-velocity perturbations of the given L2 sizes,
    all runs sharing the base run's grid and dt schedule.  The verdict is
    'stable' when the gap/delta ratios stay within a factor 10 of each
    other."""
    base = run_euler(config)
    schedule = base.dt_sequence

    def one_delta(delta: float) -> StabilityGap:
        if delta == 0.0:
            other = run_euler(config, dt_schedule=schedule)
        else:
            other = run_euler(config, dt_schedule=schedule, velocity_perturbation=delta)
        gap = max(state_distance(a, b) for a, b in zip(base.states, other.states))
        return StabilityGap(delta, gap, gap / delta if delta > 0.0 else 0.0)

    deltas = list(deltas)
    with ThreadPoolExecutor(max_workers=worker_count(len(deltas))) as pool:
        results = list(pool.map(one_delta, deltas))
    ratios = [r.ratio for r in results if r.delta > 0.0]
    stable = bool(ratios) and max(ratios) <= 10.0 * min(ratios)
    return StabilityTable(
        [r.delta for r in results], [r.gap for r in results], [r.ratio for r in results], stable
    )


# ---------------------------------------------------------------------------
# canned configurations


def reference_config(
    n: int = 256,
    t_final: float = 1.0,
    snapshot_stride: int = 1,
    coords: str = "both",
    tolerances: Optional[Tolerances] = None,
) -> RunConfig:
    """The standard two-component benchmark: counter-shearing velocities on
    top of complementary density waves with uniform total density."""
    params = FluidParams(2, 1.0, 1.4)
    viscosity = ViscosityMatrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    initial = InitialData(
        rho_profiles=(
            {"profile": "sine", "offset": 0.6, "amplitude": 0.2, "frequency": 2},
            {"profile": "sine", "offset": 0.8, "amplitude": -0.2, "frequency": 2},
        ),
        u_profiles=(
            {"profile": "sine", "offset": 0.0, "amplitude": -0.1, "frequency": 1},
            {"profile": "sine", "offset": 0.0, "amplitude": 0.1, "frequency": 1},
        ),
    )
    return RunConfig(
        params=params,
        viscosity=viscosity,
        n=n,
        t_final=t_final,
        initial=initial,
        snapshot_stride=snapshot_stride,
        coords=coords,
        tolerances=tolerances or Tolerances(),
        label="reference",
    )


def equilibrium_config(n: int = 64, t_final: float = 0.5, snapshot_stride: int = 5) -> RunConfig:
    """Uniform densities at rest: an exact fixed point of both solvers."""
    params = FluidParams(2, 1.0, 1.4)
    viscosity = ViscosityMatrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    initial = InitialData(
        rho_profiles=(
            {"profile": "uniform", "value": 0.5},
            {"profile": "uniform", "value": 0.9},
        ),
        u_profiles=(
            {"profile": "uniform", "value": 0.0},
            {"profile": "uniform", "value": 0.0},
        ),
    )
    return RunConfig(
        params=params,
        viscosity=viscosity,
        n=n,
        t_final=t_final,
        initial=initial,
        snapshot_stride=snapshot_stride,
        coords="both",
        label="equilibrium",
    )

"""On-disk trajectory archives: manifest JSON plus plain-text CSV arrays.

Layout of an archive directory:

    manifest.json        config echo, versions, timings, checksums
    snapshot_0000.csv    columns: x (or y), rho_1..rho_N, u_1..u_N
    snapshot_0001.csv    ...
    diagnostics.csv      one row per accepted step
    concentrations.csv   mass-coordinate runs only: the frozen concentration
                         fields (columns y, conc_1..conc_N)

All numbers are written as decimal text with 17 significant digits, which
round-trips IEEE doubles exactly, so reading an archive reproduces every
array bit for bit and re-running the verifier is deterministic.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__ as package_version
from .grid import Field, Grid
from .model import FluidParams, ViscosityMatrix
from .states import EulerState, LagrangeState, StepRecord, Trajectory

ARCHIVE_FORMAT = 1


class ArchiveError(RuntimeError):
    """Missing, corrupted, or incompatible archive data."""


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = [",".join(header)]
    for k in range(len(columns[0])):
        rows.append(",".join(_fmt(float(col[k])) for col in columns))
    path.write_text("\n".join(rows) + "\n")


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return header, data


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _diagnostics_header(n: int) -> list[str]:
    cols = ["step", "t", "dt"]
    cols += [f"kinetic_{i + 1}" for i in range(n)]
    cols += ["potential", "energy_total", "dissipation_rate"]
    cols += [f"mass_{i + 1}" for i in range(n)]
    cols += [f"rho_min_{i + 1}" for i in range(n)]
    cols += [f"rho_max_{i + 1}" for i in range(n)]
    cols += ["mu_gradform", "dudt_weighted_l2sq"]
    cols += [f"drhodt_l2_{i + 1}" for i in range(n)]
    cols += ["lograd"]
    return cols


def write_archive(
    traj: Trajectory, out_dir, config_echo: dict, timings: Optional[dict] = None
) -> Path:
    """Write a trajectory archive; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = traj.params.n_components
    grid = traj.initial_state.grid
    coord_name = "y" if traj.coords == "lagrange" else "x"

    files = []
    for idx, state in enumerate(traj.states):
        name = f"snapshot_{idx:04d}.csv"
        header = [coord_name] + [f"rho_{i + 1}" for i in range(n)] + [
            f"u_{i + 1}" for i in range(n)
        ]
        columns = [grid.nodes]
        columns += [f.values for f in state.rho]
        columns += [f.values for f in state.u]
        _write_csv(out / name, header, columns)
        files.append(name)

    recs = traj.records
    diag_cols: list[np.ndarray] = [
        np.array([r.step for r in recs], dtype=float),
        np.array([r.t for r in recs]),
        np.array([r.dt for r in recs]),
    ]
    diag_cols += [np.array([r.kinetic[i] for r in recs]) for i in range(n)]
    diag_cols += [
        np.array([r.potential for r in recs]),
        np.array([r.energy_total for r in recs]),
        np.array([r.dissipation_rate for r in recs]),
    ]
    diag_cols += [np.array([r.component_mass[i] for r in recs]) for i in range(n)]
    diag_cols += [np.array([r.rho_min[i] for r in recs]) for i in range(n)]
    diag_cols += [np.array([r.rho_max[i] for r in recs]) for i in range(n)]
    diag_cols += [
        np.array([r.mu_gradform for r in recs]),
        np.array([r.dudt_weighted_l2sq for r in recs]),
    ]
    diag_cols += [np.array([r.drhodt_l2[i] for r in recs]) for i in range(n)]
    diag_cols += [np.array([r.lograd for r in recs])]
    _write_csv(out / "diagnostics.csv", _diagnostics_header(n), diag_cols)
    files.append("diagnostics.csv")

    if traj.coords == "lagrange":
        header = ["y"] + [f"conc_{i + 1}" for i in range(n)]
        columns = [grid.nodes] + [c.values for c in traj.initial_state.concentrations]
        _write_csv(out / "concentrations.csv", header, columns)
        files.append("concentrations.csv")

    manifest = {
        "archive_format": ARCHIVE_FORMAT,
        "package_version": package_version,
        "numpy_version": np.__version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "timings": timings or {},
        "coords": traj.coords,
        "config": config_echo,
        "n_steps": traj.n_steps,
        "snapshot_steps": traj.snapshot_steps,
        "snapshot_times": [s.time for s in traj.states],
        "total_mass": getattr(traj.initial_state, "total_mass", None),
        "aborted": traj.aborted,
        "abort_reason": traj.abort_reason,
        "checksums": {name: _sha256(out / name) for name in files},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def read_archive(archive_dir) -> Trajectory:
    """Rebuild a trajectory (states and step records) from an archive.

    Checksums are verified first; a mismatch or a format-version mismatch is
    an ArchiveError.
    """
    out = Path(archive_dir)
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ArchiveError(f"missing archive manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("archive_format") != ARCHIVE_FORMAT:
        raise ArchiveError(
            f"archive format {manifest.get('archive_format')!r} does not match "
            f"reader format {ARCHIVE_FORMAT}"
        )
    for name, digest in manifest["checksums"].items():
        path = out / name
        if not path.exists():
            raise ArchiveError(f"archive file missing: {name}")
        if _sha256(path) != digest:
            raise ArchiveError(f"archive file corrupted (checksum mismatch): {name}")

    conf = manifest["config"]
    params = FluidParams(
        conf["params"]["n_components"],
        conf["params"]["pressure_const"],
        conf["params"]["polytropic_index"],
    )
    viscosity = ViscosityMatrix(np.array(conf["viscosity"], dtype=float))
    coords = manifest["coords"]
    n = params.n_components

    concentrations = None
    if coords == "lagrange":
        _, conc_data = _read_csv(out / "concentrations.csv")
        d = manifest["total_mass"]
        grid = Grid(conf["grid"]["n"], d)
        concentrations = tuple(Field(grid, conc_data[:, 1 + i]) for i in range(n))
    else:
        grid = Grid(conf["grid"]["n"], 1.0)

    states = []
    for idx, t in enumerate(manifest["snapshot_times"]):
        header, data = _read_csv(out / f"snapshot_{idx:04d}.csv")
        rho = tuple(Field(grid, data[:, 1 + i]) for i in range(n))
        u = tuple(Field(grid, data[:, 1 + n + i]) for i in range(n))
        if coords == "lagrange":
            total = Field(grid, sum(f.values for f in rho))
            states.append(
                LagrangeState(t, manifest["total_mass"], total, concentrations, u)
            )
        else:
            states.append(EulerState(t, rho, u))

    _, diag = _read_csv(out / "diagnostics.csv")
    records = []
    for row in diag:
        pos = 3
        kinetic = row[pos : pos + n]
        pos += n
        potential = row[pos]
        pos += 2  # energy_total is derived; skip it
        dissipation = row[pos]
        pos += 1
        mass = row[pos : pos + n]
        pos += n
        rho_min = row[pos : pos + n]
        pos += n
        rho_max = row[pos : pos + n]
        pos += n
        mu_gradform = row[pos]
        dudt = row[pos + 1]
        pos += 2
        drhodt = row[pos : pos + n]
        pos += n
        lograd = row[pos]
        records.append(
            StepRecord(
                step=int(row[0]),
                t=row[1],
                dt=row[2],
                kinetic=kinetic.copy(),
                potential=float(potential),
                dissipation_rate=float(dissipation),
                component_mass=mass.copy(),
                mu_gradform=float(mu_gradform),
                dudt_weighted_l2sq=float(dudt),
                drhodt_l2=drhodt.copy(),
                lograd=float(lograd),
                rho_min=rho_min.copy(),
                rho_max=rho_max.copy(),
            )
        )

    return Trajectory(
        coords=coords,
        params=params,
        viscosity=viscosity,
        states=states,
        snapshot_steps=list(manifest["snapshot_steps"]),
        records=records,
        aborted=manifest["aborted"],
        abort_reason=manifest["abort_reason"],
    )


def read_manifest(archive_dir) -> dict:
    manifest_path = Path(archive_dir) / "manifest.json"
    if not manifest_path.exists():
        raise ArchiveError(f"missing archive manifest: {manifest_path}")
    return json.loads(manifest_path.read_text())

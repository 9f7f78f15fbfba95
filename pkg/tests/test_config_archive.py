import json
from pathlib import Path

import numpy as np
import pytest

from multifluid1d import ConfigError, load_config, run_euler, run_lagrange
from multifluid1d.archive import ArchiveError, read_archive, write_archive
from multifluid1d.config import config_from_dict, sin_pi
from multifluid1d.workflows import equilibrium_config, reference_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def minimal_doc(**overrides):
    doc = {
        "params": {"n_components": 2, "pressure_const": 1.0, "polytropic_index": 1.4},
        "viscosity": [[2.0, 1.0], [1.0, 2.0]],
        "grid": {"n": 16},
        "time": {"T": 0.5},
        "initial": {
            "rho": [
                {"profile": "uniform", "value": 0.5},
                {"profile": "uniform", "value": 0.9},
            ],
            "u": [
                {"profile": "uniform", "value": 0.0},
                {"profile": "uniform", "value": 0.0},
            ],
        },
    }
    doc.update(overrides)
    return doc


class TestConfigValidation:
    def test_defaults_applied(self):
        cfg = config_from_dict(minimal_doc())
        assert cfg.cfl == 0.5
        assert cfg.snapshot_stride == 10
        assert cfg.coords == "euler"
        assert cfg.dt_max is None

    def test_gamma_at_one_rejected(self):
        doc = minimal_doc()
        doc["params"]["polytropic_index"] = 1.0
        with pytest.raises(ConfigError, match="polytropic_index must exceed 1"):
            config_from_dict(doc)

    def test_asymmetric_viscosity_rejected(self):
        doc = minimal_doc(viscosity=[[2.0, 1.0], [0.5, 2.0]])
        with pytest.raises(ConfigError, match="symmetric"):
            config_from_dict(doc)

    def test_indefinite_viscosity_rejected(self):
        doc = minimal_doc(viscosity=[[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ConfigError, match="positive definite"):
            config_from_dict(doc)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.update(bogus=1),
            lambda d: d["params"].update(extra=2),
            lambda d: d["time"].update(dt=0.1),
            lambda d: d["initial"].update(w=[]),
            lambda d: d.update(tolerances={"nope": 1.0}),
            lambda d: d["initial"]["rho"][0].update(width=1.0),
        ],
    )
    def test_unknown_keys_rejected(self, mutate):
        doc = minimal_doc()
        mutate(doc)
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict(doc)

    def test_nonzero_boundary_velocity_rejected(self):
        doc = minimal_doc()
        doc["initial"]["u"][0] = {"profile": "uniform", "value": 0.3}
        with pytest.raises(ConfigError, match="boundary"):
            config_from_dict(doc)

    def test_bump_profile_accepted_for_density(self):
        doc = minimal_doc()
        doc["initial"]["rho"][0] = {
            "profile": "bump",
            "offset": 0.5,
            "amplitude": 0.3,
            "center": 0.5,
            "width": 0.1,
        }
        cfg = config_from_dict(doc)
        rho0, _ = cfg.initial_fields()
        assert rho0[0].values.max() > 0.7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_parse_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(ConfigError, match="parse"):
            load_config(path)

    def test_to_dict_round_trip(self):
        cfg = reference_config(n=32, t_final=0.5)
        again = config_from_dict(cfg.to_dict())
        assert again.n == cfg.n
        assert again.t_final == cfg.t_final
        assert np.array_equal(again.viscosity.entries, cfg.viscosity.entries)
        assert again.initial.rho_profiles == cfg.initial.rho_profiles

    def test_shipped_reference_config_matches_builtin(self):
        cfg = load_config(CONFIG_DIR / "reference.json")
        builtin = reference_config(n=cfg.n, t_final=cfg.t_final, snapshot_stride=cfg.snapshot_stride)
        assert cfg.params == builtin.params
        assert np.array_equal(cfg.viscosity.entries, builtin.viscosity.entries)
        assert cfg.initial.rho_profiles == builtin.initial.rho_profiles
        assert cfg.initial.u_profiles == builtin.initial.u_profiles

    def test_shipped_equilibrium_config_loads(self):
        cfg = load_config(CONFIG_DIR / "equilibrium.json")
        assert cfg.params.n_components == 2


class TestCsvInitialData:
    def test_round_trip(self, tmp_path):
        cfg = reference_config(n=16, t_final=0.1)
        grid = cfg.grid()
        rho0, u0 = cfg.initial_fields()
        lines = ["x,rho_1,rho_2,u_1,u_2"]
        for k in range(grid.n_nodes):
            lines.append(
                ",".join(
                    f"{v:.17g}"
                    for v in (
                        grid.nodes[k],
                        rho0[0].values[k],
                        rho0[1].values[k],
                        u0[0].values[k],
                        u0[1].values[k],
                    )
                )
            )
        path = tmp_path / "init.csv"
        path.write_text("\n".join(lines) + "\n")

        doc = minimal_doc()
        doc["initial"] = {"path": str(path)}
        loaded = config_from_dict(doc)
        rho_loaded, u_loaded = loaded.initial_fields()
        for a, b in zip(rho_loaded, rho0):
            assert np.array_equal(a.values, b.values)
        for a, b in zip(u_loaded, u0):
            assert np.array_equal(a.values, b.values)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,r1\n0,1\n")
        doc = minimal_doc()
        doc["initial"] = {"path": str(path)}
        with pytest.raises(ConfigError, match="header"):
            config_from_dict(doc)


class TestSinPi:
    def test_exact_zeros_at_integers(self):
        z = np.array([0.0, 1.0, 2.0, 7.0])
        assert np.array_equal(sin_pi(z), np.zeros(4))

    def test_matches_sine_elsewhere(self):
        z = np.array([0.25, 0.5, 1.3])
        assert np.max(np.abs(sin_pi(z) - np.sin(np.pi * z))) < 1e-15


class TestArchive:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = reference_config(n=32, t_final=0.1, snapshot_stride=2, coords="euler")
        traj = run_euler(cfg)
        write_archive(traj, tmp_path / "run", cfg.to_dict())
        loaded = read_archive(tmp_path / "run")
        assert loaded.coords == "euler"
        assert loaded.snapshot_steps == traj.snapshot_steps
        for a, b in zip(traj.states, loaded.states):
            assert a.time == b.time
            for fa, fb in zip(a.rho + a.u, b.rho + b.u):
                assert np.array_equal(fa.values, fb.values)
        for ra, rb in zip(traj.records, loaded.records):
            assert ra.t == rb.t and ra.dt == rb.dt
            assert np.array_equal(ra.kinetic, rb.kinetic)
            assert ra.potential == rb.potential
            assert np.array_equal(ra.component_mass, rb.component_mass)
            assert ra.mu_gradform == rb.mu_gradform
            assert np.array_equal(ra.drhodt_l2, rb.drhodt_l2)

    def test_lagrange_round_trip_keeps_concentrations_bitwise(self, tmp_path):
        cfg = reference_config(n=32, t_final=0.1, snapshot_stride=2, coords="lagrange")
        traj = run_lagrange(cfg)
        write_archive(traj, tmp_path / "run", cfg.to_dict())
        loaded = read_archive(tmp_path / "run")
        base = loaded.states[0].concentrations
        for s in loaded.states:
            for c0, c in zip(base, s.concentrations):
                assert np.array_equal(c0.values, c.values)
        for a, b in zip(traj.initial_state.concentrations, base):
            assert np.array_equal(a.values, b.values)

    def test_corruption_detected(self, tmp_path):
        cfg = equilibrium_config(n=16, t_final=0.1)
        traj = run_euler(cfg)
        out = tmp_path / "run"
        write_archive(traj, out, cfg.to_dict())
        victim = out / "snapshot_0001.csv"
        victim.write_text(victim.read_text().replace("5", "6", 1))
        with pytest.raises(ArchiveError, match="checksum"):
            read_archive(out)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ArchiveError, match="manifest"):
            read_archive(tmp_path)

    def test_format_version_mismatch(self, tmp_path):
        cfg = equilibrium_config(n=16, t_final=0.1)
        traj = run_euler(cfg)
        out = tmp_path / "run"
        write_archive(traj, out, cfg.to_dict())
        manifest = json.loads((out / "manifest.json").read_text())
        manifest["archive_format"] = 99
        (out / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ArchiveError, match="format"):
            read_archive(out)

    def test_snapshot_count_matches_stride_formula(self, tmp_path):
        import dataclasses

        cfg = dataclasses.replace(
            equilibrium_config(n=16, t_final=0.5), dt_max=0.05, snapshot_stride=2
        )
        traj = run_euler(cfg)
        assert len(traj.states) == traj.n_steps // cfg.snapshot_stride + 1


class TestSeventeenDigitFormatting:
    def test_round_trips_doubles_exactly(self):
        from hypothesis import given, settings
        from hypothesis import strategies as st

        @settings(deadline=None, max_examples=200)
        @given(st.floats(allow_nan=False, allow_infinity=False))
        def check(value):
            assert float(f"{value:.17g}") == value

        check()

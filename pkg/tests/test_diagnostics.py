import dataclasses

import numpy as np
import pytest

from multifluid1d import (
    EulerState,
    Field,
    FluidParams,
    Grid,
    LagrangeState,
    ViscosityMatrix,
    derived_coefficients,
    effective_flux_series,
    energy,
    h1_velocity_series,
    lograd_norm,
    run_invariant_suite,
    simulate,
    to_lagrangian,
)
from multifluid1d.diagnostics import (
    density_time_derivative_norm,
    effective_flux_monotonicity,
    initial_record,
    stability_gap,
    state_distance,
)
from multifluid1d.grid import l2_norm, upwind_flux_divergence
from multifluid1d.model import average_velocity
from multifluid1d.states import TimeControls, Trajectory
from multifluid1d.workflows import (
    equilibrium_config,
    reference_config,
    run_euler,
    run_lagrange,
)

from conftest import sine_field, smooth_two_component_state


def constant_trajectory(state, params, viscosity, times):
    """Synthetic trajectory holding one state at a sequence of times."""
    states = [dataclasses.replace(state, time=t) for t in times]
    records = [initial_record(states[0], params, viscosity)]
    for k in range(1, len(states)):
        records.append(
            dataclasses.replace(
                initial_record(states[k], params, viscosity),
                step=k,
                dt=times[k] - times[k - 1],
            )
        )
    return Trajectory("euler", params, viscosity, states, list(range(len(states))), records)


class TestEnergyReport:
    def test_rest_state_pinned_values(self):
        # unit densities, rho = 2, K = 1, gamma = 2: potential is the integral
        # of rho^2, the kinetic entries vanish
        g = Grid(16)
        params = FluidParams(2, 1.0, 2.0)
        s = EulerState(
            0.0, (Field.full(g, 1.0), Field.full(g, 1.0)), (Field.zeros(g), Field.zeros(g))
        )
        rep = energy(s, params)
        assert np.array_equal(rep.kinetic, np.zeros(2))
        assert rep.potential == 4.0
        assert rep.total == 4.0
        assert rep.dissipation_rate == 0.0
        assert np.array_equal(rep.component_mass, np.ones(2))

    def test_lyapunov_weighting(self):
        g = Grid(16)
        params = FluidParams(2, 1.0, 2.0)
        s = EulerState(
            0.0, (Field.full(g, 1.0), Field.full(g, 1.0)), (Field.zeros(g), Field.zeros(g))
        )
        rep = energy(s, params)
        assert rep.lyapunov == rep.total + (2 - 1) * rep.potential

    def test_velocity_scaling_quadruples_kinetic_and_dissipation(self, params2):
        g = Grid(16)
        u = sine_field(g, 0.0, 0.5, 1)
        s1 = EulerState(0.0, (Field.full(g, 1.0), Field.full(g, 0.5)), (u, Field.zeros(g)))
        s2 = EulerState(
            0.0, (Field.full(g, 1.0), Field.full(g, 0.5)), (Field(g, 2 * u.values), Field.zeros(g))
        )
        r1, r2 = energy(s1, params2), energy(s2, params2)
        assert np.array_equal(r2.kinetic, 4.0 * r1.kinetic)
        assert r2.dissipation_rate == 4.0 * r1.dissipation_rate

    def test_lagrange_report_matches_spatial_report(self, params2):
        g = Grid(64)
        s = smooth_two_component_state(g)
        rep_e = energy(s, params2)
        rep_l = energy(to_lagrangian(s), params2)
        assert rep_l.potential == pytest.approx(rep_e.potential, rel=1e-3)
        assert rep_l.kinetic.sum() == pytest.approx(rep_e.kinetic.sum(), rel=1e-3)
        assert rep_l.dissipation_rate == pytest.approx(rep_e.dissipation_rate, rel=1e-2)
        assert np.max(np.abs(rep_l.component_mass - rep_e.component_mass)) < 1e-3


class TestLogDensityGradient:
    def test_uniform_density_vanishes(self):
        s = EulerState(
            0.0,
            (Field.full(Grid(16), 0.7), Field.full(Grid(16), 0.7)),
            (Field.zeros(Grid(16)), Field.zeros(Grid(16))),
        )
        assert lograd_norm(s) < 1e-12

    def test_exponential_profile_gives_unit_norm(self):
        g = Grid(16, 1.0)
        r = Field(g, np.exp(g.nodes))
        conc = (Field.full(g, 0.5), Field.full(g, 0.5))
        s = LagrangeState(0.0, 1.0, r, conc, (Field.zeros(g), Field.zeros(g)))
        assert abs(lograd_norm(s) - 1.0) < 1e-12


class TestEffectiveFlux:
    def test_initial_alpha_is_prefix_integral_of_weighted_momentum(self, params2, coupling2):
        g = Grid(32)
        s = smooth_two_component_state(g)
        coeffs = derived_coefficients(coupling2, params2)
        traj = constant_trajectory(s, params2, coupling2, [0.0])
        series = effective_flux_series(traj, coeffs)
        inv = coeffs.inverse_entries
        v0 = sum(inv.sum(axis=0)[j] * s.rho[j].values * s.u[j].values for j in range(2)) / 2.0
        h = g.spacing
        prefix = np.concatenate([[0.0], np.cumsum(0.5 * h * (v0[:-1] + v0[1:]))])
        assert np.max(np.abs(series.alpha[0] - prefix)) < 1e-15
        assert np.max(np.abs(series.v_flux[0] - v0)) < 1e-15

    def test_rest_trajectory_alpha_decreases_linearly(self, params2, coupling2):
        # with zero velocities the flux potential is -K_eff * rho^gamma * t
        g = Grid(16)
        s = EulerState(
            0.0, (Field.full(g, 0.5), Field.full(g, 0.9)), (Field.zeros(g), Field.zeros(g))
        )
        coeffs = derived_coefficients(coupling2, params2)
        times = [0.0, 0.1, 0.2, 0.3]
        traj = constant_trajectory(s, params2, coupling2, times)
        series = effective_flux_series(traj, coeffs)
        rho = 1.4
        for t, alpha in zip(times, series.alpha):
            expect = -coeffs.effective_pressure_coeff * rho**params2.polytropic_index * t
            assert np.max(np.abs(alpha - expect)) < 1e-10
        drops = np.diff([a[5] for a in series.alpha])
        assert np.all(drops < 0.0)

    def test_monotone_along_paths_on_dynamic_run(self):
        cfg = reference_config(n=64, t_final=0.3, snapshot_stride=1)
        traj = run_euler(cfg)
        entry = effective_flux_monotonicity(traj, cfg.tolerances)
        assert not entry.skipped
        assert entry.passed

    def test_skipped_without_per_step_snapshots(self):
        cfg = reference_config(n=32, t_final=0.1, snapshot_stride=5)
        traj = run_euler(cfg)
        entry = effective_flux_monotonicity(traj, cfg.tolerances)
        assert entry.skipped


class TestSeries:
    def test_h1_budget_zero_at_rest(self, params2, coupling2):
        g = Grid(16)
        s = EulerState(
            0.0, (Field.full(g, 1.0), Field.full(g, 1.0)), (Field.zeros(g), Field.zeros(g))
        )
        traj = constant_trajectory(s, params2, coupling2, [0.0, 0.1, 0.2])
        _, beta = h1_velocity_series(traj)
        assert np.array_equal(beta, np.zeros(3))

    def test_h1_cumulative_part_nondecreasing(self):
        cfg = reference_config(n=32, t_final=0.2, snapshot_stride=1)
        traj = run_euler(cfg)
        _, beta = h1_velocity_series(traj)
        grad_part = np.array([r.mu_gradform for r in traj.records])
        cumulative = beta - grad_part
        assert np.all(np.diff(cumulative) >= -1e-15)

    def test_density_rate_matches_flux_divergence(self, params2, coupling2):
        # the transport update makes (rho' - rho)/dt equal minus the discrete
        # flux divergence, so the recorded norm must reproduce it
        from multifluid1d import step

        g = Grid(32)
        s = smooth_two_component_state(g)
        dt = 1e-3
        new = step(s, dt, params2, coupling2)
        from multifluid1d.diagnostics import record_step

        rec = record_step(s, new, dt, params2, coupling2, 1)
        v = average_velocity(s.u)
        for i in range(2):
            div_norm = l2_norm(upwind_flux_divergence(s.rho[i], v))
            assert rec.drhodt_l2[i] == pytest.approx(div_norm, rel=1e-12)

    def test_density_rate_zero_at_equilibrium(self):
        cfg = equilibrium_config(n=16, t_final=0.2)
        traj = run_euler(cfg)
        _, rates = density_time_derivative_norm(traj)
        assert np.max(rates) < 1e-13


class TestStabilityGap:
    def test_zero_perturbation_gives_bitwise_zero_gap(self):
        cfg = reference_config(n=16, t_final=0.05, snapshot_stride=1)
        result = stability_gap(cfg, 0.0)
        assert result.gap == 0.0
        assert result.ratio == 0.0

    def test_small_perturbation_ratio_near_unity(self):
        cfg = reference_config(n=16, t_final=0.05, snapshot_stride=1)
        result = stability_gap(cfg, 1e-4)
        assert 0.5 <= result.ratio <= 2.0


class TestInvariantSuite:
    def test_equilibrium_all_pass_with_zero_violations(self):
        cfg = equilibrium_config(n=16, t_final=0.3)
        traj = run_euler(cfg)
        report = run_invariant_suite(traj, cfg.tolerances)
        assert report.passed
        for name in ("mass_conservation", "concentration_bounds", "energy_monotonicity"):
            assert report.entry(name).violation == 0.0

    def test_lagrange_concentration_reported_exact(self):
        cfg = equilibrium_config(n=16, t_final=0.3)
        traj = run_lagrange(cfg)
        report = run_invariant_suite(traj, cfg.tolerances)
        entry = report.entry("concentration_exactness")
        assert entry.passed
        assert entry.violation == 0.0

    def test_corrupted_snapshot_fails_exactly_the_concentration_check(self):
        cfg = reference_config(n=32, t_final=0.1, snapshot_stride=3)
        traj = run_euler(cfg)
        victim = traj.states[2]
        tampered = EulerState(
            victim.time,
            (Field(victim.grid, 3.0 * victim.rho[0].values), victim.rho[1]),
            victim.u,
        )
        traj.states[2] = tampered
        report = run_invariant_suite(traj, cfg.tolerances)
        assert not report.passed
        assert not report.entry("concentration_bounds").passed
        failing = [e.name for e in report.entries if not (e.passed or e.skipped)]
        assert failing == ["concentration_bounds"]

    def test_single_component_run_tagged_as_sanity_scope(self):
        g = Grid(16)
        params = FluidParams(1, 1.0, 1.4)
        visc = ViscosityMatrix(np.array([[1.0]]))
        s = EulerState(0.0, (Field.full(g, 1.0),), (sine_field(g, 0.0, 0.1, 1),))
        traj = simulate(s, params, visc, TimeControls(t_final=0.1, snapshot_stride=1))
        report = run_invariant_suite(traj)
        assert "sanity" in report.scope
        assert report.passed

    def test_component_permutation_leaves_verdicts_unchanged(self):
        cfg = reference_config(n=32, t_final=0.1, snapshot_stride=1)
        traj = run_euler(cfg)

        swapped_cfg = dataclasses.replace(
            cfg,
            initial=dataclasses.replace(
                cfg.initial,
                rho_profiles=tuple(reversed(cfg.initial.rho_profiles)),
                u_profiles=tuple(reversed(cfg.initial.u_profiles)),
            ),
            viscosity=ViscosityMatrix(cfg.viscosity.entries[::-1, ::-1].copy()),
        )
        swapped = run_euler(swapped_cfg)

        rep = run_invariant_suite(traj, cfg.tolerances)
        rep_swapped = run_invariant_suite(swapped, cfg.tolerances)
        for a, b in zip(rep.entries, rep_swapped.entries):
            assert a.name == b.name
            assert a.passed == b.passed
        e1 = traj.records[-1]
        e2 = swapped.records[-1]
        assert e1.energy_total == pytest.approx(e2.energy_total, rel=1e-12)
        assert e1.dissipation_rate == pytest.approx(e2.dissipation_rate, rel=1e-12)

    def test_report_serialization_round_trip(self):
        cfg = equilibrium_config(n=16, t_final=0.1)
        report = run_invariant_suite(run_euler(cfg), cfg.tolerances)
        doc = report.to_dict()
        assert doc["passed"] is True
        assert {e["name"] for e in doc["entries"]} >= {
            "mass_conservation",
            "energy_monotonicity",
            "density_bounds",
        }
        assert any(line.startswith("PASS") for line in report.lines())


def test_state_distance_symmetric_and_zero_on_identical():
    g = Grid(16)
    s = smooth_two_component_state(g)
    assert state_distance(s, s) == 0.0
    other = EulerState(
        0.0, s.rho, (Field(g, s.u[0].values * 1.1), s.u[1])
    )
    assert state_distance(s, other) == pytest.approx(state_distance(other, s))
    assert state_distance(s, other) > 0.0


def test_suite_survives_internal_diagnostic_errors():
    # a trajectory with no records breaks several checks; each failure must be
    # captured per entry without taking the suite down
    cfg = equilibrium_config(n=16, t_final=0.1)
    traj = run_euler(cfg)
    broken = dataclasses.replace(traj, records=[])
    report = run_invariant_suite(broken, cfg.tolerances)
    assert any(e.error for e in report.entries)
    assert any(not e.error for e in report.entries)
    assert not report.passed

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multifluid1d.grid import (
    Field,
    Grid,
    d2dx2,
    ddx,
    ddx_compatible,
    integrate,
    l2_norm,
    upwind_advect,
    upwind_flux_divergence,
)


def test_grid_nodes_hit_endpoints_exactly():
    g = Grid(12, 3.5)
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == 3.5
    assert np.max(np.abs(np.diff(g.nodes) - g.spacing)) < 1e-15


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(4, 1.0)
    with pytest.raises(ValueError):
        Grid(16, 0.0)


def test_field_shape_and_immutability():
    g = Grid(8)
    with pytest.raises(ValueError):
        Field(g, np.zeros(5))
    f = Field(g, np.ones(9))
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_ddx_constant_is_zero():
    g = Grid(16)
    f = Field.full(g, 3.7)
    out = ddx(f).values
    assert np.array_equal(out[1:-1], np.zeros(15))
    assert np.max(np.abs(out)) < 1e-12


def test_ddx_linear_exact():
    g = Grid(16)
    f = Field(g, 2.5 * g.nodes - 1.0)
    assert np.max(np.abs(ddx(f).values - 2.5)) < 1e-12


def test_ddx_quadratic_exact_at_interior():
    # central difference of x^2 gives exactly 2x on a dyadic grid
    g = Grid(16)
    f = Field(g, g.nodes**2)
    out = ddx(f).values
    assert np.max(np.abs(out[1:-1] - 2.0 * g.nodes[1:-1])) < 1e-14


def test_d2dx2_linear_and_quadratic():
    g = Grid(16)
    lin = Field(g, 4.0 * g.nodes + 0.25)
    assert np.max(np.abs(d2dx2(lin).values[1:-1])) < 1e-11
    quad = Field(g, g.nodes**2)
    assert np.max(np.abs(d2dx2(quad).values[1:-1] - 2.0)) < 1e-10


def test_d2dx2_sine_error_bound():
    # Taylor remainder: |error| <= h^2 max|f''''| / 12 = (pi^4 / 12) h^2
    g = Grid(64)
    f = Field(g, np.sin(np.pi * g.nodes))
    out = d2dx2(f).values[1:-1]
    exact = -np.pi**2 * np.sin(np.pi * g.nodes[1:-1])
    err = np.max(np.abs(out - exact))
    assert err < (np.pi**4 / 12) * g.spacing**2 * 1.01
    assert err < 0.01


def test_integrate_trapezoid_exact_cases():
    g = Grid(16)
    assert integrate(Field.full(g, 1.0)) == 1.0
    assert integrate(Field(g, g.nodes)) == 0.5
    assert abs(integrate(Field(g, np.sin(2 * np.pi * g.nodes)))) < 1e-14


def test_refinement_order_of_derivatives():
    # errors on sin(pi x) must drop by at least 3.5x when n doubles
    def errs(n):
        g = Grid(n)
        f = Field(g, np.sin(np.pi * g.nodes))
        e1 = np.max(np.abs(ddx(f).values - np.pi * np.cos(np.pi * g.nodes)))
        e2 = np.max(
            np.abs(d2dx2(f).values[1:-1] + np.pi**2 * np.sin(np.pi * g.nodes[1:-1]))
        )
        return e1, e2

    c1, c2 = errs(32)
    f1, f2 = errs(64)
    assert c1 / f1 >= 3.5
    assert c2 / f2 >= 3.5


def test_upwind_zero_velocity_gives_zero():
    g = Grid(16)
    f = Field(g, np.sin(2 * np.pi * g.nodes))
    out = upwind_advect(f, Field.zeros(g)).values
    assert np.array_equal(out, np.zeros(17))


@pytest.mark.parametrize("speed", [1.0, -1.0])
def test_upwind_exact_for_linear_fields(speed):
    g = Grid(16)
    f = Field(g, 1.5 * g.nodes + 0.5)
    out = upwind_advect(f, Field.full(g, speed)).values
    assert np.max(np.abs(out - 1.5)) < 1e-12


@settings(deadline=None, max_examples=30)
@given(slope=st.floats(-10, 10), speed=st.floats(-5, 5))
def test_upwind_linear_property(slope, speed):
    g = Grid(16)
    f = Field(g, slope * g.nodes)
    out = upwind_advect(f, Field.full(g, speed)).values
    expect = 0.0 if speed == 0.0 else slope
    assert np.max(np.abs(out - expect)) < 1e-9


def test_flux_divergence_constant_velocity_interior_zero():
    # constant flux: only the half cells at the walls see the zero-flux closure
    g = Grid(16)
    rho = Field.full(g, 2.0)
    v = Field.full(g, 0.7)
    out = upwind_flux_divergence(rho, v).values
    assert np.array_equal(out[1:-1], np.zeros(15))
    assert out[0] != 0.0 and out[-1] != 0.0


def test_flux_divergence_conserves_trapezoid_mass():
    g = Grid(32)
    rho = Field(g, 1.0 + 0.5 * np.sin(2 * np.pi * g.nodes))
    v = Field(g, np.sin(np.pi * g.nodes) * (1.0 + 0.3 * g.nodes))
    div = upwind_flux_divergence(rho, v)
    assert abs(integrate(div)) < 1e-13


def test_summation_by_parts_compatibility():
    # | int(f * g'') + int(f' g') | = O(h^2) for fields vanishing at the walls
    def residual(n):
        g = Grid(n)
        f = Field(g, np.sin(np.pi * g.nodes))
        w = Field(g, np.sin(3 * np.pi * g.nodes))
        a = integrate(Field(g, f.values * d2dx2(w).values))
        b = integrate(Field(g, ddx(f).values * ddx(w).values))
        return abs(a + b)

    r32, r64 = residual(32), residual(64)
    assert r32 <= 60.0 * (1.0 / 32) ** 2
    assert r32 / r64 >= 3.0


def test_ddx_compatible_integral_telescopes():
    g = Grid(32)
    f = Field(g, np.cos(1.7 * g.nodes) + 0.4 * g.nodes**2)
    total = integrate(ddx_compatible(f))
    assert abs(total - (f.values[-1] - f.values[0])) < 1e-14


def test_l2_norm_matches_hand_value():
    g = Grid(16)
    assert abs(l2_norm(Field.full(g, 2.0)) - 2.0) < 1e-14

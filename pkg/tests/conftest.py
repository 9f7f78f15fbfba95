import pathlib
import sys

try:
    import multifluid1d  # noqa: F401
except ImportError:  # running from a checkout without installing
    sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np
import pytest

from multifluid1d import EulerState, Field, FluidParams, Grid, ViscosityMatrix
from multifluid1d.config import sin_pi


@pytest.fixture
def params2() -> FluidParams:
    return FluidParams(2, 1.0, 1.4)


@pytest.fixture
def coupling2() -> ViscosityMatrix:
    return ViscosityMatrix(np.array([[2.0, 1.0], [1.0, 2.0]]))


def sine_field(grid: Grid, offset: float, amplitude: float, frequency: float) -> Field:
    return Field(grid, offset + amplitude * sin_pi(frequency * grid.nodes))


def smooth_two_component_state(grid: Grid, u_amp: float = 0.1) -> EulerState:
    rho = (
        sine_field(grid, 0.6, 0.2, 2),
        sine_field(grid, 0.8, -0.2, 2),
    )
    u = (
        sine_field(grid, 0.0, -u_amp, 1),
        sine_field(grid, 0.0, u_amp, 1),
    )
    return EulerState(0.0, rho, u)

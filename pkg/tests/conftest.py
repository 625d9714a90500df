import math

import numpy as np
import pytest

from geophase.evolve import ConstantHamiltonian, DensityTrajectory, JumpOperator, LindbladModel, TimeGrid, evolve
from geophase.matcore import SIGMA_Z
from geophase.spectral import track_spectrum


def constant_trajectory(rho, steps=50, t_final=1.0):
    grid = TimeGrid(t_final, steps)
    return DensityTrajectory(grid, np.stack([np.asarray(rho, dtype=complex)] * grid.times.size))


def precession_spectrum(r=1.0, theta=math.pi / 3, steps=4000, gauge="continuity"):
    from geophase.evolve import bloch_density

    model = LindbladModel(2, ConstantHamiltonian(0.5 * SIGMA_Z))
    traj = evolve(model, bloch_density(r, theta), TimeGrid(2 * math.pi, steps))
    return traj, track_spectrum(traj, gauge=gauge)


def dephasing_model(gamma=0.1, omega=0.0):
    return LindbladModel(2, ConstantHamiltonian(0.5 * omega * SIGMA_Z), (JumpOperator(SIGMA_Z, gamma),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dephasing_model
from geophase.errors import NumericalError, ValidationError
from geophase.evolve import (
    ConstantHamiltonian,
    JumpOperator,
    LindbladModel,
    PrecessionHamiltonian,
    TabulatedHamiltonian,
    TimeGrid,
    bloch_density,
    evolve,
    evolve_lindblad,
    evolve_unitary,
    validate_density,
)
from geophase.matcore import SIGMA_MINUS, SIGMA_X, SIGMA_Z, random_density, random_hermitian


def test_time_grid():
    g = TimeGrid(1.0, 4)
    assert g.dt == 0.25
    assert np.allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.with_steps(8).dt == 0.125
    with pytest.raises(ValidationError):
        TimeGrid(1.0, 0)
    with pytest.raises(ValidationError):
        TimeGrid(-1.0, 10)


def test_zero_hamiltonian_keeps_state(rng):
    rho = random_density(3, rng)
    traj = evolve_unitary(LindbladModel(3, ConstantHamiltonian(np.zeros((3, 3)))), rho, TimeGrid(1.0, 20))
    assert np.max(np.abs(traj.samples - rho)) < 1e-14


def test_full_revolution_returns_plus_state():
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    omega = 1.7
    model = LindbladModel(2, ConstantHamiltonian(0.5 * omega * SIGMA_Z))
    traj = evolve_unitary(model, plus, TimeGrid(2 * math.pi / omega, 2000))
    assert np.max(np.abs(traj.samples[-1] - plus)) < 1e-8
    # and the intermediate samples follow the closed form
    t = traj.grid.times
    assert np.max(np.abs(traj.samples[:, 0, 1] - 0.5 * np.exp(-1j * omega * t))) < 1e-8


def test_lindblad_without_jumps_matches_unitary(rng):
    h = random_hermitian(3, rng)
    model = LindbladModel(3, ConstantHamiltonian(h))
    rho = random_density(3, rng)
    grid = TimeGrid(1.0, 400)
    a = evolve_unitary(model, rho, grid).samples
    b = evolve_lindblad(model, rho, grid).samples
    assert np.max(np.abs(a - b)) < 1e-10


def test_dephasing_closed_form():
    gamma = 0.3
    rho0 = bloch_density(0.9, 1.0, 0.4)
    traj = evolve(dephasing_model(gamma), rho0, TimeGrid(3.0, 1000))
    exact = rho0[0, 1] * np.exp(-2 * gamma * traj.grid.times)
    assert np.max(np.abs(traj.samples[:, 0, 1] - exact)) < 1e-6
    assert np.allclose(traj.samples[:, 0, 0], rho0[0, 0])


def test_dephasing_fourth_order_convergence():
    gamma, omega = 0.5, 3.0
    rho0 = bloch_density(0.9, 1.0)
    errs = []
    for steps in (40, 80):
        traj = evolve(dephasing_model(gamma, omega), rho0, TimeGrid(2.0, steps))
        exact = rho0[0, 1] * np.exp(-(2 * gamma + 1j * omega) * traj.grid.times)
        errs.append(np.max(np.abs(traj.samples[:, 0, 1] - exact)))
    assert 12 < errs[0] / errs[1] < 20


def test_amplitude_damping_decay():
    gamma = 0.4
    model = LindbladModel(2, ConstantHamiltonian(np.zeros((2, 2))), (JumpOperator(SIGMA_MINUS, gamma),))
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    traj = evolve(model, rho0, TimeGrid(4.0, 1000))
    assert np.max(np.abs(traj.samples[:, 1, 1].real - np.exp(-gamma * traj.grid.times))) < 1e-6


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_random_lindblad_invariants(seed, n):
    rng = np.random.default_rng(seed)
    ops = tuple(JumpOperator(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), 0.05) for _ in range(2))
    model = LindbladModel(n, ConstantHamiltonian(random_hermitian(n, rng)), ops)
    traj = evolve(model, random_density(n, rng), TimeGrid(1.0, 400))
    assert traj.trace_drift() < 1e-8
    assert traj.hermiticity_drift() < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4))
def test_unitary_isospectral(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(n, rng)
    traj = evolve(LindbladModel(n, ConstantHamiltonian(random_hermitian(n, rng))), rho, TimeGrid(1.0, 200))
    spectra = np.linalg.eigvalsh(traj.samples)
    assert np.max(np.abs(spectra - spectra[0])) < 1e-8
    assert traj.trace_drift() < 1e-8


def test_precession_hamiltonian_rotates_field():
    h = PrecessionHamiltonian(omega=2.0, theta=0.0)
    assert np.allclose(h(0.3), SIGMA_Z)


def test_tabulated_hamiltonian_interpolates():
    h = TabulatedHamiltonian(np.array([0.0, 1.0]), np.stack([SIGMA_Z, SIGMA_X]))
    assert np.allclose(h(0.25), 0.75 * SIGMA_Z + 0.25 * SIGMA_X)
    assert h.dim == 2


def test_model_validation():
    with pytest.raises(ValidationError, match="rate"):
        JumpOperator(SIGMA_Z, -0.1)
    model = LindbladModel(2, ConstantHamiltonian(np.array([[0, 1], [0, 0]], dtype=complex)))
    with pytest.raises(ValidationError, match="Hermitian"):
        evolve(model, np.eye(2) / 2, TimeGrid(1.0, 10))
    with pytest.raises(ValidationError):
        evolve(LindbladModel(2, ConstantHamiltonian(SIGMA_Z)), np.eye(3) / 3, TimeGrid(1.0, 10))


@pytest.mark.parametrize(
    "rho",
    [np.eye(2), np.array([[0.5, 0.5], [0.4, 0.5]]), np.diag([1.2, -0.2])],
    ids=["trace", "hermitian", "positive"],
)
def test_validate_density_rejects(rho):
    with pytest.raises(ValidationError):
        validate_density(rho)


def test_trace_drift_guard():
    # RK4 far outside its stability region blows up and trips the drift guard
    strong = LindbladModel(2, ConstantHamiltonian(np.zeros((2, 2))), (JumpOperator(SIGMA_X * 30, 50.0),))
    with pytest.raises(NumericalError):
        evolve(strong, bloch_density(0.5, 1.0), TimeGrid(10.0, 10))

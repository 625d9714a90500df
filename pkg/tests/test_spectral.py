import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_trajectory, precession_spectrum
from geophase.errors import NumericalError, ValidationError
from geophase.evolve import ConstantHamiltonian, DensityTrajectory, LindbladModel, TimeGrid, evolve
from geophase.matcore import SIGMA_X, SIGMA_Z, dagger, matrix_exp, random_density, random_hermitian
from geophase.phases import generalized_phase, kinematic_phase, ancilla_from_policy, phase_distance
from geophase.spectral import (
    DegeneracyStructure,
    cluster_degeneracies,
    connection,
    connection_matrix,
    cumulative_trapezoid,
    path_ordered_exp,
    track_spectrum,
    with_gauge_field,
)


def random_unitary_run(seed, n=3, steps=800, t_final=2.0):
    rng = np.random.default_rng(seed)
    model = LindbladModel(n, ConstantHamiltonian(random_hermitian(n, rng, 0.5)))
    return evolve(model, random_density(n, rng, min_gap=0.15), TimeGrid(t_final, steps))


def test_constant_state_has_trivial_frame(rng):
    spec = track_spectrum(constant_trajectory(random_density(3, rng, min_gap=0.1)))
    assert np.max(np.abs(spec.u_op - np.eye(3))) < 1e-12
    assert np.max(np.abs(spec.c_op - spec.c_op[0])) < 1e-12


def test_precession_populations_constant():
    _, spec = precession_spectrum(r=0.5, steps=1000)
    assert np.max(np.abs(spec.p - spec.p[0])) < 1e-8
    assert np.allclose(spec.p[0], [0.75, 0.25])


@pytest.mark.parametrize("gauge", ["continuity", "reference", "raw"])
def test_reconstruction_and_amplitude_square(gauge):
    traj = random_unitary_run(3)
    spec = track_spectrum(traj, gauge=gauge)
    assert np.max(np.abs(spec.reconstruct() - traj.samples)) < 1e-8
    uc = spec.u_op @ spec.c_op
    assert np.max(np.abs(uc @ dagger(uc) - traj.samples)) < 1e-8


def test_continuity_gauge_kills_local_connection():
    spec = track_spectrum(random_unitary_run(4))
    values = [abs(connection(spec, k, i)) for k in range(spec.rank) for i in range(1, spec.n_times - 1)]
    assert max(values) < 1e-6
    overlaps = np.einsum("tak,tak->tk", spec.w[:-1].conj(), spec.w[1:])
    assert np.all(overlaps.real > 0) and np.max(np.abs(overlaps.imag)) < 1e-12


def test_reference_gauge_positive_overlaps():
    spec = track_spectrum(random_unitary_run(5), gauge="reference")
    diag = np.einsum("tkk->tk", spec.overlaps)
    assert np.max(np.abs(diag.imag)) < 1e-12 and np.all(diag.real > 0)


def test_gauge_shift_of_connection():
    spec = track_spectrum(random_unitary_run(6))
    t = spec.times
    phi = np.stack([0.7 * np.sin(1.3 * t), 2.0 * t + 0.2 * t**2, np.cos(t)], axis=1)
    phidot = np.stack([0.91 * np.cos(1.3 * t), 2.0 + 0.4 * t, -np.sin(t)], axis=1)
    moved = with_gauge_field(spec, phi)
    for k in range(3):
        for i in (0, 1, spec.n_times // 2, spec.n_times - 1):
            shift = connection(moved, k, i) - connection(spec, k, i)
            assert abs(shift - 1j * phidot[i, k]) < 50 * spec.dt**2


def test_gauge_covariance_of_phases():
    traj = random_unitary_run(7)
    cont = track_spectrum(traj, gauge="continuity")
    raw = track_spectrum(traj, gauge="raw")
    for policy in ("diagonal", "uhlmann"):
        a = generalized_phase(cont, ancilla_from_policy(cont, policy), residuals=False)
        b = generalized_phase(raw, ancilla_from_policy(raw, policy), residuals=False)
        assert phase_distance(a.gamma_g, b.gamma_g) < 1e-6
    assert phase_distance(kinematic_phase(cont).gamma_g, kinematic_phase(raw).gamma_g) < 1e-6


def test_level_crossing_follows_branches():
    # eigenvalues a(t), 1 - a(t) cross at t = pi/2; labels must follow the eigenvectors
    grid = TimeGrid(math.pi, 301)
    a = 0.5 + 0.3 * np.cos(grid.times)
    rot = matrix_exp(-0.2j * SIGMA_X)
    samples = np.stack([rot @ np.diag([x, 1 - x]) @ dagger(rot) for x in a]).astype(complex)
    spec = track_spectrum(DensityTrajectory(grid, samples))
    assert np.allclose(spec.p[:, 0], a, atol=1e-12)
    assert spec.slots[-1].tolist() == [1, 0]


def test_matching_composes_to_direct_matching():
    _, spec = precession_spectrum(r=0.5, steps=500)
    direct = np.argmax(np.abs(dagger(spec.w[0]) @ spec.w[-1]), axis=1)
    assert direct.tolist() == list(range(spec.rank))
    assert spec.slots[-1].tolist() == list(range(spec.rank))


def test_rank_change_rejected():
    grid = TimeGrid(1.0, 20)
    eps = np.linspace(0.1, -1e-3, grid.times.size).clip(0)
    samples = np.stack([np.diag([1 - e, e]) for e in eps]).astype(complex)
    with pytest.raises(NumericalError, match="rank changes"):
        track_spectrum(DensityTrajectory(grid, samples))


def test_coarse_grid_rejected():
    # one Fourier jump in dimension 5: every overlap is 1/sqrt(5) < 0.5
    from geophase.matcore import dft_matrix

    grid = TimeGrid(1.0, 2)
    rho = np.diag([0.3, 0.25, 0.2, 0.15, 0.1]).astype(complex)
    f = dft_matrix(5)
    samples = np.stack([rho, f @ rho @ dagger(f), f @ rho @ dagger(f)])
    with pytest.raises(NumericalError, match="refine the time grid"):
        track_spectrum(DensityTrajectory(grid, samples))


def test_unknown_gauge_rejected(rng):
    with pytest.raises(ValidationError):
        track_spectrum(constant_trajectory(random_density(2, rng)), gauge="sideways")


def test_cluster_examples(rng):
    _, spec = precession_spectrum(r=0.5, steps=200)
    assert cluster_degeneracies(spec).clusters == ((0,), (1,))
    deg = cluster_degeneracies(track_spectrum(constant_trajectory(np.diag([0.5, 0.25, 0.25]))))
    assert deg.clusters == ((0,), (1, 2))
    assert deg.multiplicities == (1, 2) and deg.is_degenerate
    generic = track_spectrum(random_unitary_run(8))
    assert cluster_degeneracies(generic, eps_deg=0.0) == DegeneracyStructure.singletons(3)


def test_time_varying_degeneracy_rejected():
    grid = TimeGrid(1.0, 50)
    s = np.linspace(0.0, 0.1, grid.times.size)
    samples = np.stack([np.diag([0.5, 0.25 + x, 0.25 - x]) for x in s]).astype(complex)
    with pytest.raises(NumericalError, match="vary in time"):
        cluster_degeneracies(track_spectrum(DensityTrajectory(grid, samples)))


def test_cumulative_trapezoid_exact_on_linear():
    t = np.linspace(0, 2, 11)
    assert np.allclose(cumulative_trapezoid(3 * t + 1, t[1] - t[0]), 1.5 * t**2 + t)


def test_path_ordered_zero_and_constant():
    grid = TimeGrid(2.0, 100)
    assert np.allclose(path_ordered_exp(np.zeros((101, 2, 2)), grid), np.eye(2))
    a = np.array([[0.3, 1j], [1j, -0.2]])
    got = path_ordered_exp(np.broadcast_to(a, (101, 2, 2)), grid)
    assert np.max(np.abs(got - matrix_exp(-2.0 * a))) < 1e-8


def test_path_ordered_time_ordering():
    # later factors act on the left: A = X for t < 1, Z afterwards
    grid = TimeGrid(2.0, 2)
    a = np.stack([0.3j * SIGMA_X, 0.3j * SIGMA_X, 0.3j * SIGMA_Z])
    mid = [0.3j * SIGMA_X, 0.5 * 0.3j * (SIGMA_X + SIGMA_Z)]
    expect = matrix_exp(-mid[1]) @ matrix_exp(-mid[0])
    assert np.allclose(path_ordered_exp(a, grid), expect)


def test_path_ordered_self_convergence():
    def sample(grid):
        t = grid.times
        # alternating non-commuting sigma_x / sigma_z blocks, smoothly switched
        w = 0.5 * (1 + np.tanh(4 * np.sin(3 * t)))
        return 1j * (w[:, None, None] * SIGMA_X + (1 - w)[:, None, None] * SIGMA_Z)

    grids = [TimeGrid(3.0, n) for n in (200, 400, 800)]
    res = [path_ordered_exp(sample(g), g) for g in grids]
    d1, d2 = np.max(np.abs(res[0] - res[1])), np.max(np.abs(res[1] - res[2]))
    assert 3.0 < d1 / d2 < 5.0


def test_path_ordered_cumulative_matches_final():
    grid = TimeGrid(1.0, 50)
    rng = np.random.default_rng(3)
    a = np.stack([1j * random_hermitian(2, rng) for _ in range(51)])
    cum = path_ordered_exp(a, grid, cumulative=True)
    assert np.allclose(cum[0], np.eye(2))
    assert np.allclose(cum[-1], path_ordered_exp(a, grid))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_tracking_invariants_random(seed):
    traj = random_unitary_run(seed, steps=600)
    spec = track_spectrum(traj)
    assert np.max(np.abs(spec.reconstruct() - traj.samples)) < 1e-8
    a = connection_matrix(spec)
    assert np.max(np.abs(a + dagger(a))) < 1e-12

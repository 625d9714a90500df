import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geophase.errors import NumericalError, ValidationError
from geophase.matcore import (
    dagger,
    dft_matrix,
    eig_hermitian,
    majorizes,
    matrix_exp,
    polar_unitary_part,
    random_density,
    random_hermitian,
    random_unitary,
    sqrt_psd,
    unitarity_error,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 5)


def test_eig_identity_any_orthonormal_basis():
    vals, vecs = eig_hermitian(np.eye(3))
    assert np.allclose(vals, 1.0)
    assert unitarity_error(vecs) < 1e-12


def test_eig_diagonal_descending_standard_basis():
    vals, vecs = eig_hermitian(np.diag([0.3, 0.7]))
    assert np.allclose(vals, [0.7, 0.3])
    assert np.allclose(np.abs(vecs), [[0, 1], [1, 0]])


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValidationError, match="not Hermitian"):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_eig_rejects_non_square():
    with pytest.raises(ValidationError):
        eig_hermitian(np.ones((2, 3)))


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_eig_reconstructs(seed, n):
    h = random_hermitian(n, np.random.default_rng(seed))
    vals, vecs = eig_hermitian(h)
    assert np.all(np.diff(vals) <= 0)
    assert np.max(np.abs((vecs * vals) @ dagger(vecs) - h)) < 1e-10


def test_exp_zero_is_identity():
    assert np.allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))


def test_exp_diagonal_exponent():
    a = -1j * np.pi * np.diag([1, -1]) / 2
    assert np.allclose(matrix_exp(a), np.diag([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)]), atol=1e-12)


def test_exp_general_matches_scipy(rng):
    import scipy.linalg

    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.allclose(matrix_exp(a), scipy.linalg.expm(a), rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, dims)
def test_exp_of_skew_hermitian_is_unitary(seed, n):
    h = random_hermitian(n, np.random.default_rng(seed), scale=5.0)
    assert unitarity_error(matrix_exp(-1j * h)) < 1e-12


def test_polar_of_unitary_is_itself(rng):
    w0 = random_unitary(3, rng)
    assert np.allclose(polar_unitary_part(w0), w0, atol=1e-12)


def test_polar_positive_diagonal():
    assert np.allclose(polar_unitary_part(np.diag([2.0, 3.0])), np.eye(2))


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 4))
def test_polar_recovers_unitary_factor(seed, n):
    rng = np.random.default_rng(seed)
    p0 = random_density(n, rng) + 0.05 * np.eye(n)
    w0 = random_unitary(n, rng)
    assert np.max(np.abs(polar_unitary_part(p0 @ w0) - w0)) < 1e-9


def test_polar_rejects_rank_deficient():
    with pytest.raises(NumericalError, match="rank-deficient"):
        polar_unitary_part(np.diag([1.0, 0.0]))
    # allowed when only the support is requested
    assert unitarity_error(polar_unitary_part(np.diag([1.0, 0.0]), rank=1)) < 1e-12


def test_sqrt_psd_examples():
    assert np.allclose(sqrt_psd(np.eye(2)), np.eye(2))
    assert np.allclose(sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_sqrt_psd_clamps_noise_and_rejects_negative():
    assert np.allclose(sqrt_psd(np.diag([1.0, -1e-11])), np.diag([1.0, 0.0]))
    with pytest.raises(ValidationError, match="positive semidefinite"):
        sqrt_psd(np.diag([1.0, -1e-3]))


def test_dft_small_sizes():
    assert np.allclose(dft_matrix(1), [[1]])
    assert np.allclose(dft_matrix(2), np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    f4 = dft_matrix(4)
    assert np.allclose(f4[:, 0], 0.5)
    assert unitarity_error(f4) < 1e-12


@pytest.mark.parametrize("n", range(1, 33))
def test_dft_unitary(n):
    assert unitarity_error(dft_matrix(n)) < 1e-12


def test_dft_rejects_bad_size():
    with pytest.raises(ValidationError):
        dft_matrix(0)


@pytest.mark.parametrize(
    "p, q, expected",
    [
        ((1, 0), (0.5, 0.5), True),
        ((0.5, 0.5), (0.7, 0.3), False),
        ((0.6, 0.3, 0.1), (1 / 3, 1 / 3, 1 / 3), True),
    ],
)
def test_majorization_examples(p, q, expected):
    assert majorizes(p, q) is expected


def test_majorization_rejects_invalid_vector():
    with pytest.raises(ValidationError):
        majorizes((0.5, 0.6), (1.0,))


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 8))
def test_every_spectrum_majorizes_uniform(seed, n):
    p = np.random.default_rng(seed).dirichlet(np.ones(n))
    p = p / p.sum()
    assert majorizes(p, np.full(n, 1.0 / n))

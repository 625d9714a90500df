"""Dense complex linear algebra for small matrices.

Everything here operates on plain ``numpy`` arrays of shape ``(n, n)``;
dimensions are expected to stay below a few dozen.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError

HERMITIAN_TOL = 1e-10
PSD_CLAMP = 1e-10
PSD_REJECT = 1e-6

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def as_square(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite complex square array or raise."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - dagger(m)), initial=0.0))


def unitarity_error(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(dagger(m) @ m - np.eye(m.shape[-1])), initial=0.0))


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    return unitarity_error(m) < tol


def eig_hermitian(m, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(eigenvalues, eigenvectors)`` with the eigenvectors as the
    columns of a unitary matrix.  Degenerate eigenspaces come back in an
    arbitrary orthonormal basis.
    """
    a = as_square(m)
    err = hermiticity_error(a)
    if err > tol:
        raise ValidationError(f"matrix is not Hermitian: max|M - M^dag| = {err:.3e}")
    vals, vecs = np.linalg.eigh(0.5 * (a + dagger(a)))
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def eig_hermitian_batch(m, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """:func:`eig_hermitian` over a stack of matrices with shape ``(n, d, d)``."""
    a = np.asarray(m, dtype=complex)
    err = hermiticity_error(a)
    if err > tol:
        raise ValidationError(f"matrix is not Hermitian: max|M - M^dag| = {err:.3e}")
    vals, vecs = np.linalg.eigh(0.5 * (a + dagger(a)))
    return vals[..., ::-1].copy(), vecs[..., ::-1].copy()


def sqrt_psd_batch(m) -> np.ndarray:
    vals, vecs = eig_hermitian_batch(m)
    if vals.size and np.min(vals) < -PSD_REJECT:
        raise ValidationError(f"matrix is not positive semidefinite: eigenvalue {np.min(vals):.3e}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)[..., None, :]) @ dagger(vecs)


def _is_skew_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return np.max(np.abs(a + dagger(a)), initial=0.0) < tol * scale


def matrix_exp(a) -> np.ndarray:
    """Matrix exponential ``e^a``.

    Hermitian and skew-Hermitian inputs go through an eigendecomposition,
    which keeps ``e^{iH}`` unitary to machine precision; everything else
    falls back to scaling and squaring with a Pade approximant.
    """
    a = as_square(a)
    if _is_skew_hermitian(a):
        h = 1j * a  # Hermitian
        vals, vecs = np.linalg.eigh(0.5 * (h + dagger(h)))
        return (vecs * np.exp(-1j * vals)) @ dagger(vecs)
    if hermiticity_error(a) < 1e-12 * max(1.0, float(np.max(np.abs(a), initial=0.0))):
        vals, vecs = np.linalg.eigh(0.5 * (a + dagger(a)))
        return (vecs * np.exp(vals)) @ dagger(vecs)
    return scipy.linalg.expm(a)


def polar_unitary_part(m, rank: int | None = None, min_singular: float = 1e-12) -> np.ndarray:
    """Unitary factor ``W`` of the left polar decomposition ``m = P W``.

    ``P = sqrt(m m^dag)`` is positive semidefinite.  By default ``m`` must be
    full rank.  Passing ``rank`` only requires the leading ``rank`` singular
    values to be nonzero; the unitary is then completed on the null space
    by the SVD, which is harmless whenever only the support is used.
    """
    a = as_square(m)
    x, s, yh = np.linalg.svd(a)
    need = a.shape[0] if rank is None else rank
    if need > 0 and s[need - 1] <= min_singular:
        raise NumericalError(
            f"polar decomposition of a rank-deficient matrix: "
            f"singular value {s[need - 1]:.3e} <= {min_singular:.1e}"
        )
    return x @ yh


def sqrt_psd(m) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix."""
    vals, vecs = eig_hermitian(m)
    if vals.size and vals[-1] < -PSD_REJECT:
        raise ValidationError(f"matrix is not positive semidefinite: eigenvalue {vals[-1]:.3e}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ dagger(vecs)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary discrete Fourier matrix, entry ``(k, l) = exp(-2 pi i k l / n) / sqrt(n)``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"Fourier matrix size must be a positive integer, got {n}")
    n = int(n)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def validate_probability_vector(p: Sequence[float], tol: float = 1e-12, name: str = "p") -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d sequence")
    if np.any(v < 0) or np.any(v > 1):
        raise ValidationError(f"{name} has entries outside [0, 1]")
    if abs(v.sum() - 1.0) > tol:
        raise ValidationError(f"{name} sums to {v.sum():.15g}, not 1")
    return v


def majorizes(p: Sequence[float], q: Sequence[float], tol: float = 1e-12) -> bool:
    """True iff ``q`` is majorized by ``p``.

    Both vectors are zero-padded to a common length and sorted in
    descending order; ``p`` majorizes ``q`` when every partial sum of ``p``
    is at least the corresponding partial sum of ``q``.
    """
    p = validate_probability_vector(p, name="p")
    q = validate_probability_vector(q, name="q")
    n = max(p.size, q.size)
    ps = np.sort(np.pad(p, (0, n - p.size)))[::-1]
    qs = np.sort(np.pad(q, (0, n - q.size)))[::-1]
    return bool(np.all(np.cumsum(ps) >= np.cumsum(qs) - tol))


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (z + dagger(z))


def random_density(n: int, rng: np.random.Generator, min_gap: float = 0.0) -> np.ndarray:
    """Random full-rank density matrix with a Haar-random eigenbasis.

    Eigenvalues are redrawn until all pairwise gaps exceed ``min_gap``.
    """
    for _ in range(1000):
        w = rng.dirichlet(np.ones(n))
        if n == 1 or np.min(np.diff(np.sort(w))) > min_gap:
            break
    else:  # pragma: no cover
        raise ValidationError(f"could not draw a spectrum with gaps > {min_gap}")
    u = random_unitary(n, rng)
    rho = (u * w) @ dagger(u)
    return 0.5 * (rho + dagger(rho))

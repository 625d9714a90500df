"""Pure-state ensembles of a density matrix and the uniform decomposition.

Two ensembles ``{p_k, |w_k>}`` and ``{q_l, |x_l>}`` describe the same state
iff ``sqrt(q_l)|x_l> = sum_k sqrt(p_k) V_lk |w_k>`` for a unitary ``V``.
Taking ``V`` to be the discrete Fourier matrix gives an equal-weight
ensemble for any spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .matcore import dagger, dft_matrix, majorizes, unitarity_error
from .spectral import SpectralTrajectory

ZERO_NORM = 1e-14


@dataclass(frozen=True)
class Ensemble:
    """Weights and unit vectors; vectors are the columns of ``vectors``.

    A component whose weight vanished has ``defined[l] == False`` and a
    column of NaNs.
    """

    weights: np.ndarray
    vectors: np.ndarray
    defined: np.ndarray | None = None

    def __post_init__(self):
        q = np.asarray(self.weights, dtype=float)
        x = np.asarray(self.vectors, dtype=complex)
        if x.ndim != 2 or x.shape[1] != q.size:
            raise ValidationError(
                f"{q.size} weights but vectors have shape {x.shape} (expected (d, {q.size}))"
            )
        defined = np.ones(q.size, bool) if self.defined is None else np.asarray(self.defined, bool)
        object.__setattr__(self, "weights", q)
        object.__setattr__(self, "vectors", x)
        object.__setattr__(self, "defined", defined)

    def __len__(self) -> int:
        return self.weights.size

    def density(self) -> np.ndarray:
        x = np.where(self.defined[None, :], self.vectors, 0.0)
        return (x * self.weights) @ dagger(x)


def spectral_ensemble(spec: SpectralTrajectory, t_i: int) -> Ensemble:
    return Ensemble(spec.p[t_i].copy(), spec.w[t_i].copy())


def ensemble_from_unitary(ens: Ensemble, mix, tol: float = 1e-10) -> Ensemble:
    """Mix an ensemble with a unitary: ``sqrt(q_l)|x_l> = sum_k sqrt(p_k) mix_lk |w_k>``."""
    mix = np.asarray(mix, dtype=complex)
    n = len(ens)
    if mix.shape != (n, n):
        raise ValidationError(f"mixing matrix has shape {mix.shape}, ensemble has {n} members")
    err = unitarity_error(mix)
    if err > tol:
        raise ValidationError(f"mixing matrix is not unitary (error {err:.3e})")
    if np.any(ens.weights <= 0):
        raise ValidationError("input ensemble weights must be strictly positive")
    raw = (ens.vectors * np.sqrt(ens.weights)) @ mix.T
    norms = np.linalg.norm(raw, axis=0)
    defined = norms > ZERO_NORM
    safe = np.where(defined, norms, 1.0)
    vectors = np.where(defined[None, :], raw / safe, np.nan)
    return Ensemble(np.where(defined, norms**2, 0.0), vectors, defined)


def uniform_ensemble(spec: SpectralTrajectory, t_i: int) -> Ensemble:
    """Equal-weight ensemble ``|x_k(t)> = sqrt(N) U(t) C(t) F |w_k(0)>``.

    ``F`` is the ``N x N`` Fourier matrix written in the initial eigenbasis,
    so in branch coordinates ``x_k = sqrt(N) sum_j sqrt(p_j(t)) F_jk |w_j(t)>``.
    """
    n = spec.rank
    f = dft_matrix(n)
    x = np.sqrt(n) * (spec.w[t_i] * spec.sqrt_p[t_i]) @ f
    return Ensemble(np.full(n, 1.0 / n), x)


def uniform_weights_admissible(p) -> bool:
    """Whether equal weights are majorized by the spectrum ``p``."""
    p = np.asarray(p, dtype=float)
    return majorizes(p / p.sum(), np.full(p.size, 1.0 / p.size))


def amplitude(spec: SpectralTrajectory, v: np.ndarray) -> np.ndarray:
    """``w(t) = U(t) C(t) F V(t)`` as ``d x N`` matrices, one per sample.

    Column ``k`` of ``w(t)`` is the vector ``|x~_k(t)>``; ``V`` has shape
    ``(n_t, N, N)``.
    """
    f = dft_matrix(spec.rank)
    return (spec.w * spec.sqrt_p[:, None, :]) @ f @ v


def x_tilde(spec: SpectralTrajectory, v: np.ndarray, k: int, t_i: int, tol: float = 1e-9) -> np.ndarray:
    """``|x~_k(t_i)> = U C F V(t_i) |w_k(0)>`` (not normalized).

    ``v`` is either the full ``(n_t, N, N)`` ancilla history or the single
    ``N x N`` unitary at ``t_i``.
    """
    v = np.asarray(v, dtype=complex)
    vi = v[t_i] if v.ndim == 3 else v
    err = unitarity_error(vi)
    if err > tol:
        raise ValidationError(f"ancilla unitary at t_i={t_i} is not unitary (error {err:.3e})")
    if not 0 <= k < spec.rank:
        raise ValidationError(f"branch {k} out of range for rank {spec.rank}")
    f = dft_matrix(spec.rank)
    return (spec.w[t_i] * spec.sqrt_p[t_i]) @ (f @ vi[:, k])

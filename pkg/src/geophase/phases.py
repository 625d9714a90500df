"""Geometric-phase engines for mixed states.

The central object is the amplitude ``w(t) = U(t) C(t) F V(t)`` (a
``d x N`` matrix, see :func:`geophase.ensembles.amplitude`).  Its columns
``|x~_k(t)>`` are the members of the uniform decomposition after the
ancilla has been rotated by ``V(t)``.  Everything is evaluated in branch
coordinates, where ``C`` is ``diag(sqrt(p))``, ``F`` the Fourier matrix and
``U^dag dU/dt`` the connection matrix ``A = W^dag dW/dt``.

Ancilla policies
----------------
``identity``          ``V = I``.
``uhlmann``           ``F V F^dag = B`` with ``dB/dt = G B``, where
                      ``G_ab = -2 A_ab sqrt(p_a p_b) / (p_a + p_b)``; an exact
                      (time-ordered) solution of Uhlmann's transport.
``uhlmann_verbatim``  ``V = exp(-i H~(t))`` with ``H~`` the time-integrated
                      generator, without time ordering.
``diagonal``          ``F V = diag(exp(-i l_k(t)))``, ``l_k = -i int <w_k|dw_k>``.
``explicit``          caller-supplied unitaries.
``degenerate``        block-diagonal holonomy, see :func:`degenerate_phase`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .ensembles import amplitude
from .evolve import DensityTrajectory
from .matcore import dagger, dft_matrix, matrix_exp, polar_unitary_part, sqrt_psd_batch, unitarity_error
from .spectral import (
    DegeneracyStructure,
    SpectralTrajectory,
    cluster_degeneracies,
    connection_matrix,
    connection_series,
    cumulative_trapezoid,
    path_ordered_exp,
)

POLICIES = ("identity", "uhlmann", "uhlmann_verbatim", "diagonal", "explicit")
UNDEFINED_MAGNITUDE = 1e-12
MIN_COMPONENT_NORM = 1e-10


def wrap_phase(x):
    """Map angles to the interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def phase_distance(a, b):
    """Distance between two angles modulo 2 pi."""
    return np.abs(wrap_phase(np.asarray(a) - np.asarray(b)))


@dataclass(frozen=True)
class PhaseReport:
    method: str
    total: complex
    nu: np.ndarray
    gamma: np.ndarray
    pt_generalized: np.ndarray | None = None
    pt_uhlmann: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return abs(self.total) >= UNDEFINED_MAGNITUDE

    @property
    def gamma_g(self) -> float:
        return float(wrap_phase(np.angle(self.total))) if self.defined else float("nan")

    @property
    def components(self) -> list[tuple[float, float]]:
        return list(zip(self.nu.tolist(), self.gamma.tolist()))


def _report(method: str, z: np.ndarray, **kw) -> PhaseReport:
    return PhaseReport(
        method=method,
        total=complex(np.sum(z)),
        nu=np.abs(z),
        gamma=wrap_phase(np.angle(z)),
        **kw,
    )


# -- kinematic phase -----------------------------------------------------------


def kinematic_components(spec: SpectralTrajectory) -> np.ndarray:
    """``sqrt(p_k(0) p_k(t)) <w_k(0)|w_k(t)> exp(-int_0^t <w_k|dw_k>)`` for all ``t``, ``k``."""
    conn = connection_series(spec)
    transport = np.exp(-cumulative_trapezoid(conn, spec.dt))
    m_diag = np.einsum("tkk->tk", spec.overlaps)
    return spec.sqrt_p[0][None, :] * spec.sqrt_p * m_diag * transport


def kinematic_phase(spec: SpectralTrajectory, t_i: int = -1) -> PhaseReport:
    """Mixed-state phase from the spectral purification with per-branch transport."""
    return _report("kinematic", kinematic_components(spec)[t_i])


# -- ancilla evolutions --------------------------------------------------------


@dataclass(frozen=True)
class AncillaEvolution:
    """Ancilla unitaries ``V(t_i)`` on the N-dimensional index space.

    ``V(0)`` is the identity for every policy except ``diagonal`` and
    ``degenerate``, which carry the constant factor ``F^dag``; only
    :attr:`relative` (``V(t) V(0)^dag``) enters the total phase.
    """

    policy: str
    v: np.ndarray
    generator: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.v.shape[1]

    @property
    def uv(self) -> np.ndarray:
        """``F V(t)``, the combination that multiplies ``C`` in every formula."""
        return dft_matrix(self.rank) @ self.v

    @property
    def relative(self) -> np.ndarray:
        return self.v @ dagger(self.v[0])[None]

    def max_unitarity_error(self) -> float:
        return max(unitarity_error(x) for x in self.v)


def _uhlmann_density(spec: SpectralTrajectory, a: np.ndarray, min_eigenvalue: float) -> np.ndarray:
    """``G_ab(t) = -2 A_ab sqrt(p_a p_b) / (p_a + p_b)`` in branch coordinates."""
    p = spec.p
    denom = p[:, :, None] + p[:, None, :]
    if np.min(denom) <= 2 * min_eigenvalue:
        raise NumericalError(
            f"vanishing denominator p_a + p_b = {np.min(denom):.3e} in the Uhlmann generator"
        )
    weight = np.sqrt(p[:, :, None] * p[:, None, :]) / denom
    return -2.0 * a * weight


def uhlmann_generator_series(
    spec: SpectralTrajectory, min_eigenvalue: float = 1e-10
) -> tuple[np.ndarray, float]:
    """Time-integrated Uhlmann generator ``H~(t_i)`` at every sample.

    ``-i H~(t) = F^dag [ int_0^t G dt' ] F`` with trapezoid integration.
    Returns ``(H~, residue)`` where ``residue`` is the largest anti-Hermitian
    part removed when symmetrizing.
    """
    g = _uhlmann_density(spec, dagger(spec.w) @ spec.w_dot, min_eigenvalue)
    k = cumulative_trapezoid(g, spec.dt)
    f = dft_matrix(spec.rank)
    h = 1j * (dagger(f)[None] @ k @ f)
    residue = float(np.max(np.abs(h - dagger(h)))) / 2
    return 0.5 * (h + dagger(h)), residue


def uhlmann_generator(spec: SpectralTrajectory, t_i: int = -1, min_eigenvalue: float = 1e-10) -> np.ndarray:
    return uhlmann_generator_series(spec, min_eigenvalue)[0][t_i]


def _identity_series(spec: SpectralTrajectory) -> np.ndarray:
    return np.broadcast_to(np.eye(spec.rank, dtype=complex), (spec.n_times, spec.rank, spec.rank)).copy()


def diagonal_transport(spec: SpectralTrajectory) -> np.ndarray:
    """``exp(-i l_k(t))`` with ``l_k(t) = -i int_0^t <w_k|dw_k> dt'``."""
    return np.exp(-cumulative_trapezoid(connection_series(spec), spec.dt))


def ancilla_from_policy(
    spec: SpectralTrajectory,
    policy: str,
    explicit_v=None,
    min_eigenvalue: float = 1e-10,
    tol: float = 1e-9,
) -> AncillaEvolution:
    """Build ``V(t)`` on the grid of ``spec`` according to ``policy``."""
    n = spec.rank
    f = dft_matrix(n)
    if policy == "identity":
        return AncillaEvolution(policy, _identity_series(spec))
    if policy == "explicit":
        if explicit_v is None:
            raise ValidationError("explicit ancilla policy needs caller-supplied unitaries")
        v = np.asarray(explicit_v, dtype=complex)
        if v.shape != (spec.n_times, n, n):
            raise ValidationError(f"explicit ancilla samples have shape {v.shape}, expected {(spec.n_times, n, n)}")
        worst = max(unitarity_error(x) for x in v)
        if worst > tol:
            raise ValidationError(f"explicit ancilla samples are not unitary (error {worst:.3e})")
        return AncillaEvolution(policy, v)
    if policy == "diagonal":
        d = diagonal_transport(spec)
        v = dagger(f)[None] * d[:, None, :]  # F^dag diag(d)
        return AncillaEvolution(policy, v)
    if policy == "uhlmann":
        g = _uhlmann_density(spec, connection_matrix(spec), min_eigenvalue)
        g = 0.5 * (g - dagger(g))
        b = path_ordered_exp(-g, spec.grid, cumulative=True)
        v = dagger(f)[None] @ b @ f[None]
        return AncillaEvolution(policy, v)
    if policy == "uhlmann_verbatim":
        h, residue = uhlmann_generator_series(spec, min_eigenvalue)
        v = np.stack([matrix_exp(-1j * x) for x in h])
        return AncillaEvolution(policy, v, generator=h, diagnostics={"generator_residue": residue})
    raise ValidationError(f"unknown ancilla policy {policy!r}; expected one of {POLICIES}")


# -- generalized phase ---------------------------------------------------------


def generalized_components(spec: SpectralTrajectory, anc: AncillaEvolution) -> np.ndarray:
    """``<x~_k(0)|x~_k(t)>`` for all samples, shape ``(n_t, N)``."""
    w = amplitude(spec, anc.v)
    return np.einsum("ak,tak->tk", w[0].conj(), w)


def double_sum_total(spec: SpectralTrajectory, anc: AncillaEvolution) -> np.ndarray:
    """``sum_{k k'} sqrt(p_k'(0) p_k(t)) <w_k'(0)|w_k(t)> <w_k(0)|F V V0^dag F^dag|w_k'(0)>``."""
    f = dft_matrix(spec.rank)
    r = f[None] @ anc.relative @ dagger(f)[None]
    return np.einsum("j,tjk,tk,tkj->t", spec.sqrt_p[0], spec.overlaps, spec.sqrt_p, r)


def generalized_phase(
    spec: SpectralTrajectory,
    anc: AncillaEvolution,
    t_i: int = -1,
    residuals: bool = True,
) -> PhaseReport:
    """Pancharatnam phase of the purification, ``arg sum_k <x~_k(0)|x~_k(t)>``."""
    z = generalized_components(spec, anc)[t_i]
    alt = double_sum_total(spec, anc)[t_i]
    err = abs(alt - z.sum())
    if err > 1e-9 * max(1.0, abs(alt)):
        raise NumericalError(f"component and double-sum forms disagree by {err:.3e}")
    kw = {}
    if residuals:
        kw = dict(
            pt_generalized=pt_residual_generalized(spec, anc),
            pt_uhlmann=pt_residual_uhlmann(spec, anc),
        )
    return _report(f"generalized:{anc.policy}", z, diagnostics={"double_sum_error": err}, **kw)


# -- parallel-transport residuals ----------------------------------------------


def _normalized_columns(w: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(w, axis=1)
    if np.min(norms) <= MIN_COMPONENT_NORM:
        raise NumericalError(f"a purification component has vanishing norm {np.min(norms):.3e}")
    return w / norms[:, None, :]


def pt_generalized_series(spec: SpectralTrajectory, anc: AncillaEvolution) -> np.ndarray:
    """``|<x^_k|d/dt x^_k>|`` for every sample and component, shape ``(n_t, N)``."""
    xh = _normalized_columns(amplitude(spec, anc.v))
    xd = np.gradient(xh, spec.dt, axis=0, edge_order=2)
    return np.abs(np.einsum("tak,tak->tk", xh.conj(), xd))


def pt_residual_generalized(spec: SpectralTrajectory, anc: AncillaEvolution, k: int | None = None):
    """Largest violation over time of ``<x^_k|d/dt x^_k> = 0`` (per component, or for ``k``)."""
    r = pt_generalized_series(spec, anc).max(axis=0)
    return r if k is None else float(r[k])


def pt_generalized_identity_form(spec: SpectralTrajectory, anc: AncillaEvolution) -> np.ndarray:
    """Residual of ``<x~_k|dx~_k> = (1/2) d/dt <x~_k|x~_k>``, per sample and component."""
    w = amplitude(spec, anc.v)
    wd = np.gradient(w, spec.dt, axis=0, edge_order=2)
    lhs = np.einsum("tak,tak->tk", w.conj(), wd)
    rhs = 0.5 * np.gradient(np.sum(np.abs(w) ** 2, axis=1), spec.dt, axis=0, edge_order=2)
    return np.abs(lhs - rhs)


def pt_uhlmann_series(spec: SpectralTrajectory, anc: AncillaEvolution) -> np.ndarray:
    """Frobenius norm of (LHS - RHS) of Uhlmann's condition written out in ``U, C, F, V``."""
    f = dft_matrix(spec.rank)
    fd = dagger(f)
    v = anc.v
    vd = np.gradient(v, spec.dt, axis=0, edge_order=2)
    a = dagger(spec.w) @ spec.w_dot  # U^dag dU/dt
    c = spec.sqrt_p
    cdot = np.gradient(c, spec.dt, axis=0, edge_order=2)
    cm = c[:, :, None] * np.eye(spec.rank)
    cdm = cdot[:, :, None] * np.eye(spec.rank)
    left = dagger(v) @ fd @ cm  # V^dag F^dag C
    lhs = (
        left @ a @ cm @ f @ v
        + left @ cdm @ f @ v
        + left @ cm @ f @ vd
    )
    rhs = (
        left @ dagger(a) @ cm @ f @ v
        + dagger(v) @ fd @ cdm @ cm @ f @ v
        + dagger(vd) @ fd @ cm @ cm @ f @ v
    )
    res = np.linalg.norm(lhs - rhs, axis=(1, 2))

    # same quantity straight from w = W C F V and the product rule
    w = amplitude(spec, v)
    w_dot = (
        (spec.w_dot * c[:, None, :]) @ f @ v
        + (spec.w * cdot[:, None, :]) @ f @ v
        + (spec.w * c[:, None, :]) @ f @ vd
    )
    direct = np.linalg.norm(dagger(w) @ w_dot - dagger(w_dot) @ w, axis=(1, 2))
    scale = max(1.0, float(np.max(res)))
    if np.max(np.abs(direct - res)) > 1e-9 * scale:
        raise NumericalError("Uhlmann residual cross-check failed")
    return res


def pt_residual_uhlmann(spec: SpectralTrajectory, anc: AncillaEvolution) -> float:
    return float(np.max(pt_uhlmann_series(spec, anc)))


def unitary_pt_residuals(spec: SpectralTrajectory, anc: AncillaEvolution, tol: float = 1e-8) -> dict:
    """Per-component transport conditions on ``U_par = U F V V0^dag F^dag``.

    ``eigenbasis_k = <w_k(0)|U_par^dag dU_par|w_k(0)>`` and
    ``fourier_k = <w_k(0)|F^dag C U_par^dag dU_par C F|w_k(0)>``; each is
    returned as its maximum modulus over time.  Only meaningful for
    unitary dynamics (constant populations).
    """
    drift = float(np.max(np.abs(spec.p - spec.p[0])))
    if drift > tol:
        raise ValidationError(
            f"contracted transport residuals need unitary dynamics; populations drift by {drift:.3e}"
        )
    f = dft_matrix(spec.rank)
    y = f[None] @ anc.relative @ dagger(f)[None]
    ydot = np.gradient(y, spec.dt, axis=0, edge_order=2)
    a = dagger(spec.w) @ spec.w_dot
    a_par = dagger(y) @ (a @ y + ydot)
    cm = spec.sqrt_p[:, :, None] * np.eye(spec.rank)
    contracted = dagger(f)[None] @ cm @ a_par @ cm @ f[None]
    eigenbasis = np.abs(np.einsum("tkk->tk", a_par))
    fourier = np.abs(np.einsum("tkk->tk", contracted))
    return {"eigenbasis": eigenbasis.max(axis=0), "fourier": fourier.max(axis=0)}


# -- degenerate case -----------------------------------------------------------


@dataclass(frozen=True)
class DegenerateHolonomy:
    clusters: tuple[tuple[int, ...], ...]
    alpha: tuple[np.ndarray, ...]

    def block_matrix(self, n: int) -> np.ndarray:
        b = np.zeros((n, n), dtype=complex)
        for c, a in zip(self.clusters, self.alpha):
            b[np.ix_(c, c)] = a
        return b

    def max_unitarity_error(self) -> float:
        return max(unitarity_error(a) for a in self.alpha)


def holonomy_series(spec: SpectralTrajectory, deg: DegeneracyStructure) -> np.ndarray:
    """Block-diagonal ``alpha(t)`` at every sample, shape ``(n_t, N, N)``.

    Each block is ``P exp(-int_0^t A_c dt')`` with ``A_c`` the connection
    matrix restricted to the cluster.
    """
    a = connection_matrix(spec)
    out = np.zeros((spec.n_times, spec.rank, spec.rank), dtype=complex)
    for c in deg.clusters:
        idx = np.ix_(range(spec.n_times), c, c)
        out[idx] = path_ordered_exp(a[idx], spec.grid, cumulative=True)
    return out


def degenerate_holonomy(spec: SpectralTrajectory, deg: DegeneracyStructure, t_i: int = -1) -> DegenerateHolonomy:
    """``alpha_k^{mu mu'}(t) = <w_k^mu(0)| P exp(-int U^dag dU) |w_k^mu'(0)>`` per cluster."""
    b = holonomy_series(spec, deg)[t_i]
    return DegenerateHolonomy(deg.clusters, tuple(b[np.ix_(c, c)].copy() for c in deg.clusters))


def degenerate_ancilla(spec: SpectralTrajectory, deg: DegeneracyStructure) -> AncillaEvolution:
    """Ancilla with ``F V = alpha(t)`` (block diagonal), so ``F V V0^dag F^dag = alpha``."""
    b = holonomy_series(spec, deg)
    v = dagger(dft_matrix(spec.rank))[None] @ b
    return AncillaEvolution("degenerate", v)


def pt_degenerate_series(spec: SpectralTrajectory, anc: AncillaEvolution, deg: DegeneracyStructure) -> np.ndarray:
    """Max over intra-cluster pairs of ``|<x^_mu|d/dt x^_mu'>|`` per sample and cluster."""
    xh = _normalized_columns(amplitude(spec, anc.v))
    xd = np.gradient(xh, spec.dt, axis=0, edge_order=2)
    g = dagger(xh) @ xd
    out = np.empty((spec.n_times, len(deg.clusters)))
    for j, c in enumerate(deg.clusters):
        out[:, j] = np.abs(g[np.ix_(range(spec.n_times), c, c)]).reshape(spec.n_times, -1).max(axis=1)
    return out


def degenerate_phase(
    spec: SpectralTrajectory,
    deg: DegeneracyStructure | None = None,
    anc: AncillaEvolution | None = None,
    t_i: int = -1,
    eps_deg: float = 1e-8,
) -> PhaseReport:
    """Phase of the degenerate purification with the non-Abelian holonomy.

    ``<Phi(0)|Phi(t)> = tr(C(0) M(t) C(t) B(t))`` where ``M`` is the overlap
    matrix with the initial eigenbasis and ``B = F V V0^dag F^dag``, by
    default the block-diagonal ``alpha(t)``.
    """
    if deg is None:
        deg = cluster_degeneracies(spec, eps_deg)
    if anc is None:
        anc = degenerate_ancilla(spec, deg)
    z = generalized_components(spec, anc)[t_i]
    total = double_sum_total(spec, anc)[t_i]
    err = abs(total - z.sum())
    if err > 1e-9 * max(1.0, abs(total)):
        raise NumericalError(f"component and quadruple-sum forms disagree by {err:.3e}")
    pt = pt_degenerate_series(spec, anc, deg).max(axis=0)
    return _report(
        "degenerate",
        z,
        pt_generalized=pt,
        pt_uhlmann=pt_residual_uhlmann(spec, anc),
        diagnostics={"clusters": deg.clusters, "double_sum_error": err},
    )


# -- discrete Uhlmann transport (independent oracle) ----------------------------


def uhlmann_discrete_series(traj: DensityTrajectory, min_eigenvalue: float = 1e-10) -> tuple[np.ndarray, float]:
    """Discrete Uhlmann transport on the raw density samples.

    Returns the complex overlaps ``tr(sqrt(rho_0) sqrt(rho_i) V_i)`` and the
    worst deviation from positivity of ``w_i^dag w_{i+1}`` seen along the way.
    """
    s = sqrt_psd_batch(traj.samples)
    lam = np.linalg.eigvalsh(traj.samples[0])
    rank = int(np.sum(lam > min_eigenvalue))
    if rank == 0:
        raise NumericalError("initial density matrix vanishes")
    d = traj.dim
    v = np.eye(d, dtype=complex)
    out = np.empty(traj.samples.shape[0], dtype=complex)
    out[0] = np.trace(s[0] @ s[0])
    worst = 0.0
    for i in range(traj.samples.shape[0] - 1):
        m = s[i] @ s[i + 1]
        wp = polar_unitary_part(m, rank=rank)
        v_next = dagger(wp) @ v
        step = dagger(v) @ m @ v_next  # w_i^dag w_{i+1}
        worst = max(worst, float(np.max(np.abs(step - dagger(step)))))
        worst = max(worst, float(-min(0.0, np.linalg.eigvalsh(0.5 * (step + dagger(step)))[0])))
        v = v_next
        out[i + 1] = np.trace(s[0] @ s[i + 1] @ v)
    return out, worst


def uhlmann_phase_discrete(traj: DensityTrajectory, min_eigenvalue: float = 1e-10) -> float:
    """Uhlmann phase ``arg tr(sqrt(rho_0) sqrt(rho_n) V_n)`` from polar-factor transport."""
    z, worst = uhlmann_discrete_series(traj, min_eigenvalue)
    if worst > 1e-8:
        raise NumericalError(f"discrete Uhlmann steps are not positive (violation {worst:.3e})")
    return float(wrap_phase(np.angle(z[-1])))

"""Continuous eigen-branches of a density trajectory.

:func:`track_spectrum` follows eigenvalue/eigenvector branches through a
:class:`~geophase.evolve.DensityTrajectory` by overlap matching and fixes
their phases (or, inside a degenerate eigenspace, their basis).  Branch
``k`` keeps the label it had at ``t = 0``, where branches are sorted by
decreasing eigenvalue.

Gauge policies
--------------
``continuity``
    consecutive overlaps ``<w_k(t_i)|w_k(t_{i+1})>`` real and positive
    (inside a degenerate block: the consecutive overlap matrix is positive
    Hermitian, the discrete parallel-transport frame).
``reference``
    overlaps with the initial frame ``<w_k(0)|w_k(t)>`` real positive
    (block version: positive Hermitian).  The frame is single valued on
    closed loops.
``raw``
    whatever the eigensolver returns, or an externally re-phased frame.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError, ValidationError
from .evolve import DensityTrajectory, TimeGrid
from .matcore import dagger, eig_hermitian_batch, matrix_exp, polar_unitary_part

GAUGES = ("continuity", "reference", "raw")
AMBIGUITY_MARGIN = 0.1
MIN_OVERLAP = 0.5


@dataclass(frozen=True)
class SpectralTrajectory:
    """Branch-resolved spectral history of a density trajectory.

    ``p`` has shape ``(n_t, N)`` and ``w`` shape ``(n_t, d, N)``: column
    ``k`` of ``w[i]`` is the eigenvector of branch ``k`` at ``t_i``.  ``N``
    is the (constant) rank, ``d`` the Hilbert-space dimension.
    """

    traj: DensityTrajectory
    p: np.ndarray
    w: np.ndarray
    gauge_policy: str
    slots: np.ndarray | None = None

    @property
    def grid(self) -> TimeGrid:
        return self.traj.grid

    @property
    def times(self) -> np.ndarray:
        return self.traj.grid.times

    @property
    def dt(self) -> float:
        return self.traj.grid.dt

    @property
    def rank(self) -> int:
        return self.p.shape[1]

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    @property
    def n_times(self) -> int:
        return self.p.shape[0]

    @cached_property
    def u_op(self) -> np.ndarray:
        """``U(t_i) = sum_k |w_k(t_i)><w_k(0)|`` as ``d x d`` matrices."""
        return self.w @ dagger(self.w[0])[None]

    @cached_property
    def c_op(self) -> np.ndarray:
        """``C(t_i) = sum_k sqrt(p_k(t_i)) |w_k(0)><w_k(0)|``."""
        w0 = self.w[0]
        return np.einsum("ak,tk,bk->tab", w0, np.sqrt(self.p), w0.conj())

    @cached_property
    def overlaps(self) -> np.ndarray:
        """``M(t)_{kl} = <w_k(0)|w_l(t)>``, shape ``(n_t, N, N)``."""
        return dagger(self.w[0])[None] @ self.w

    @cached_property
    def sqrt_p(self) -> np.ndarray:
        return np.sqrt(self.p)

    @cached_property
    def w_dot(self) -> np.ndarray:
        return np.gradient(self.w, self.dt, axis=0, edge_order=2)

    @cached_property
    def connection_raw(self) -> np.ndarray:
        """Unprojected connection matrices, see :func:`connection_matrix`."""
        return _local_log_connection(self)

    @cached_property
    def p_dot(self) -> np.ndarray:
        return np.gradient(self.p, self.dt, axis=0, edge_order=2)

    def reconstruct(self) -> np.ndarray:
        """``sum_k p_k |w_k><w_k|`` at every sample."""
        return np.einsum("tak,tk,tbk->tab", self.w, self.p, self.w.conj())


def _groups(vals: np.ndarray, eps: float) -> list[list[int]]:
    """Chain-cluster sorted (descending) eigenvalues closer than ``eps``."""
    groups = [[0]]
    for j in range(1, vals.size):
        if vals[j - 1] - vals[j] < eps:
            groups[-1].append(j)
        else:
            groups.append([j])
    return groups


def _assign(weights: np.ndarray, slot_group: np.ndarray, sizes: list[int]) -> np.ndarray:
    """Map previous branches to groups, given branch-by-group overlap weights."""
    n_groups = weights.shape[1]
    choice = np.argmax(weights, axis=1)
    ok = np.array_equal(np.bincount(choice, minlength=n_groups), np.asarray(sizes))
    if ok and n_groups > 1:
        top2 = np.sort(weights, axis=1)[:, -2:]
        ok = bool(np.all(top2[:, 1] - top2[:, 0] >= AMBIGUITY_MARGIN))
    if ok:
        return choice
    rows, cols = linear_sum_assignment(-weights[:, slot_group])
    return slot_group[cols[np.argsort(rows)]]


def track_spectrum(
    traj: DensityTrajectory,
    min_eigenvalue: float = 1e-10,
    gauge: str = "continuity",
    eps_deg: float = 1e-8,
) -> SpectralTrajectory:
    """Follow eigen-branches of ``traj`` and fix their gauge.

    Parameters
    ----------
    traj
        Sampled density matrices.
    min_eigenvalue
        Eigenvalues above this threshold at ``t = 0`` define the retained
        branches; the retained count (rank) must stay constant.
    gauge
        One of ``continuity``, ``reference`` or ``raw``.
    eps_deg
        Eigenvalues closer than this are treated as one degenerate block
        while matching.

    Raises
    ------
    NumericalError
        On a rank change, or when consecutive samples are too far apart for
        a reliable matching.
    """
    if gauge not in GAUGES:
        raise ValidationError(f"unknown gauge policy {gauge!r}; expected one of {GAUGES}")
    samples = traj.samples
    n_t, d = samples.shape[0], samples.shape[1]
    all_vals, all_vecs = eig_hermitian_batch(samples, tol=1e-8)
    vals, vecs = all_vals[0], all_vecs[0]
    n = int(np.sum(vals > min_eigenvalue))
    if n == 0:
        raise NumericalError("initial density matrix has no eigenvalue above min_eigenvalue")
    p = np.empty((n_t, n))
    w = np.empty((n_t, d, n), dtype=complex)
    slots = np.empty((n_t, n), dtype=int)
    p[0], w[0], slots[0] = vals[:n], vecs[:, :n], np.arange(n)
    times = traj.grid.times

    for i in range(1, n_t):
        vals, vecs = all_vals[i], all_vecs[i]
        if vals[n - 1] <= min_eigenvalue:
            raise NumericalError(
                f"eigenvalue {vals[n - 1]:.3e} fell below min_eigenvalue={min_eigenvalue:g} "
                f"at t={times[i]:.6g}: the rank changes, which is not supported"
            )
        if n < d and vals[n] > min_eigenvalue:
            raise NumericalError(
                f"eigenvalue {vals[n]:.3e} rose above min_eigenvalue={min_eigenvalue:g} "
                f"at t={times[i]:.6g}: the rank changes, which is not supported"
            )
        lam, e = vals[:n], vecs[:, :n]
        groups = _groups(lam, eps_deg)
        slot_group = np.empty(n, dtype=int)
        for g, members in enumerate(groups):
            slot_group[members] = g
        prev = w[i - 1]
        ov2 = np.abs(dagger(prev) @ e) ** 2
        weights = np.sqrt(
            np.stack([ov2[:, members].sum(axis=1) for members in groups], axis=1)
        )
        choice = _assign(weights, slot_group, [len(m) for m in groups])
        worst = float(np.min(weights[np.arange(n), choice]))
        if worst < MIN_OVERLAP:
            raise NumericalError(
                f"eigenvector overlap {worst:.3f} between consecutive samples at "
                f"t={times[i]:.6g} is too small; refine the time grid"
            )
        for g, members in enumerate(groups):
            branches = np.flatnonzero(choice == g)
            eg = e[:, members]
            if gauge == "raw":
                new = eg
            else:
                ref = prev[:, branches] if gauge == "continuity" else w[0][:, branches]
                try:
                    new = eg @ polar_unitary_part(dagger(eg) @ ref, min_singular=1e-9)
                except NumericalError as exc:
                    raise NumericalError(
                        f"cannot fix the {gauge} gauge at t={times[i]:.6g}: {exc}"
                    ) from None
            w[i][:, branches] = new
            p[i, branches] = lam[members]
            slots[i, branches] = members
    return SpectralTrajectory(traj, p, w, gauge, slots)


def with_gauge_field(spec: SpectralTrajectory, phi: np.ndarray) -> SpectralTrajectory:
    """Multiply branch ``k`` by ``exp(i phi[:, k])``; the result is tagged ``raw``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != spec.p.shape:
        raise ValidationError(f"phase field has shape {phi.shape}, expected {spec.p.shape}")
    return replace(spec, w=spec.w * np.exp(1j * phi)[:, None, :], gauge_policy="raw", slots=None)


def _log_near_identity(m: np.ndarray, max_terms: int = 60) -> np.ndarray:
    """``log(m)`` for a stack of matrices close to the identity, by the Mercator series."""
    x = m - np.eye(m.shape[-1])
    size = float(np.max(np.linalg.norm(x, ord=2, axis=(-2, -1)), initial=0.0))
    if size > 0.5:
        raise NumericalError(
            f"consecutive frames differ by {size:.3f} in norm; refine the time grid"
        )
    out = np.zeros_like(x)
    term = np.broadcast_to(np.eye(m.shape[-1], dtype=complex), x.shape)
    for j in range(1, max_terms + 1):
        term = term @ x
        out = out + ((-1) ** (j + 1) / j) * term
        if size**j / j < 1e-17:
            break
    return out


def connection_matrix(spec: SpectralTrajectory, project: bool = True) -> np.ndarray:
    """``A(t)_{kl} = <w_k(t)|d/dt w_l(t)>`` by finite differences.

    At each sample ``t_i`` the frame is written in local coordinates
    ``X_i(t_j) = log(W(t_i)^dag W(t_j))`` and ``A(t_i) = dX_i/dt`` is taken
    by a central difference (second-order one-sided at the end points).
    This is the same O(dt^2) scheme as differencing ``W`` directly, but it
    is exact for frames that only rotate by phases, so fast gauge drifts
    do not leak into the connection.  With ``project`` the anti-Hermitian
    part is returned.
    """
    a = spec.connection_raw
    return 0.5 * (a - dagger(a)) if project else a


def _local_log_connection(spec: SpectralTrajectory) -> np.ndarray:
    w, dt = spec.w, spec.dt
    if w.shape[0] < 3:
        return dagger(w) @ spec.w_dot
    fwd = _log_near_identity(dagger(w[:-1]) @ w[1:])  # log(W_i^dag W_{i+1})
    ends = _log_near_identity(np.stack([dagger(w[0]) @ w[2], dagger(w[-1]) @ w[-3]]))
    a = np.empty((w.shape[0], spec.rank, spec.rank), dtype=complex)
    a[1:-1] = (fwd[1:] - dagger(fwd[:-1])) / (2 * dt)
    a[0] = (4 * fwd[0] - ends[0]) / (2 * dt)
    a[-1] = (-4 * dagger(fwd[-1]) + ends[1]) / (2 * dt)
    return a


def connection(spec: SpectralTrajectory, k: int, t_i: int) -> complex:
    """Berry connection ``<w_k|dw_k/dt>`` at sample ``t_i``, imaginary part only."""
    if not 0 <= k < spec.rank:
        raise ValidationError(f"branch {k} out of range for rank {spec.rank}")
    return complex(connection_series(spec)[t_i, k])


def connection_series(spec: SpectralTrajectory) -> np.ndarray:
    """Diagonal connections ``i Im <w_k|dw_k/dt>`` with shape ``(n_t, N)``."""
    return 1j * np.einsum("tkk->tk", connection_matrix(spec)).imag


def cumulative_trapezoid(y: np.ndarray, dt: float) -> np.ndarray:
    """Running trapezoid integral along axis 0, starting from zero."""
    y = np.asarray(y)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]), axis=0)
    return out


@dataclass(frozen=True)
class DegeneracyStructure:
    clusters: tuple[tuple[int, ...], ...]

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)

    @property
    def is_degenerate(self) -> bool:
        return any(len(c) > 1 for c in self.clusters)

    @classmethod
    def singletons(cls, n: int) -> "DegeneracyStructure":
        return cls(tuple((k,) for k in range(n)))


def _partition(values: np.ndarray, eps: float) -> tuple[tuple[int, ...], ...]:
    n = values.size
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        for b in range(a + 1, n):
            if abs(values[a] - values[b]) < eps:
                parent[find(a)] = find(b)
    out: dict[int, list[int]] = {}
    for a in range(n):
        out.setdefault(find(a), []).append(a)
    return tuple(sorted(tuple(v) for v in out.values()))


def cluster_degeneracies(spec: SpectralTrajectory, eps_deg: float = 1e-8) -> DegeneracyStructure:
    """Group branches whose eigenvalues agree within ``eps_deg``.

    The grouping must be the same at every sample; merging or splitting
    clusters raises :class:`NumericalError`.
    """
    first = _partition(spec.p[0], eps_deg)
    for i in range(1, spec.n_times):
        part = _partition(spec.p[i], eps_deg)
        if part != first:
            raise NumericalError(
                f"degeneracy pattern changes at t={spec.times[i]:.6g} "
                f"({first} -> {part}); degeneracies that vary in time are not supported"
            )
    return DegeneracyStructure(first)


def path_ordered_exp(a, grid: TimeGrid | float, cumulative: bool = False) -> np.ndarray:
    """Time-ordered exponential ``P exp(-int_0^T A(t) dt)``.

    ``a`` holds samples ``A(t_i)`` on the grid.  Each step uses the
    midpoint value ``(A_i + A_{i+1})/2``; later factors multiply from the
    left.  With ``cumulative`` the partial products at every grid time are
    returned (shape ``(n_t, m, m)``), otherwise only the final product.
    """
    if not isinstance(a, np.ndarray):
        shapes = {np.shape(x) for x in a}
        if len(shapes) != 1:
            raise ValidationError(f"generator samples have inconsistent shapes {sorted(shapes)}")
    a = np.asarray(a, dtype=complex)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValidationError(f"generator samples must have shape (n_t, m, m), got {a.shape}")
    dt = grid.dt if isinstance(grid, TimeGrid) else float(grid)
    if isinstance(grid, TimeGrid) and a.shape[0] != grid.steps + 1:
        raise ValidationError(f"{a.shape[0]} generator samples for a grid of {grid.steps + 1} points")
    m = a.shape[1]
    acc = np.eye(m, dtype=complex)
    out = [acc] if cumulative else None
    mid = 0.5 * (a[1:] + a[:-1])
    for x in mid:
        acc = matrix_exp(-dt * x) @ acc
        if cumulative:
            out.append(acc)
    return np.stack(out) if cumulative else acc

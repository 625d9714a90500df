"""Density-matrix trajectories from closed and open (GKSL) dynamics.

Both integrators use classical fixed-step RK4 on a uniform grid so that
every downstream finite difference sees the same sample spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .matcore import (
    HERMITIAN_TOL,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    as_square,
    dagger,
    hermiticity_error,
)

TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8
TRACE_DRIFT_REJECT = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    steps: int

    def __post_init__(self):
        if not (self.t_final > 0 and np.isfinite(self.t_final)):
            raise ValidationError(f"t_final must be positive, got {self.t_final}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValidationError(f"steps must be an integer >= 2, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.t_final / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.steps + 1)

    def with_steps(self, steps: int) -> "TimeGrid":
        return TimeGrid(self.t_final, steps)


# -- Hamiltonian families ---------------------------------------------------


@dataclass(frozen=True)
class ConstantHamiltonian:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_square(self.matrix, "hamiltonian"))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return self.matrix


@dataclass(frozen=True)
class PrecessionHamiltonian:
    """Qubit in a field of polar angle ``theta`` rotating about z at rate ``omega``.

    ``H(t) = (omega/2) (sin(theta) cos(omega t) sx + sin(theta) sin(omega t) sy + cos(theta) sz)``
    """

    omega: float
    theta: float

    @property
    def dim(self) -> int:
        return 2

    def __call__(self, t: float) -> np.ndarray:
        st = np.sin(self.theta)
        wt = self.omega * t
        return 0.5 * self.omega * (
            st * np.cos(wt) * SIGMA_X + st * np.sin(wt) * SIGMA_Y + np.cos(self.theta) * SIGMA_Z
        )


@dataclass(frozen=True)
class TabulatedHamiltonian:
    """Piecewise-linear interpolation between tabulated Hermitian matrices."""

    times: np.ndarray
    matrices: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        mats = np.asarray(self.matrices, dtype=complex)
        if times.ndim != 1 or times.size < 2:
            raise ValidationError("tabulated hamiltonian needs at least two times")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("tabulated hamiltonian times must be strictly increasing")
        if mats.ndim != 3 or mats.shape[0] != times.size or mats.shape[1] != mats.shape[2]:
            raise ValidationError(
                f"tabulated hamiltonian matrices have shape {mats.shape}, "
                f"expected ({times.size}, d, d)"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "matrices", mats)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise ValidationError(f"time {t} outside tabulated range [{ts[0]}, {ts[-1]}]")
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2))
        s = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1 - s) * self.matrices[i] + s * self.matrices[i + 1]


Hamiltonian = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class JumpOperator:
    operator: np.ndarray
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "operator", as_square(self.operator, "jump operator"))
        if not (self.rate >= 0 and np.isfinite(self.rate)):
            raise ValidationError(f"jump rate must be a nonnegative number, got {self.rate}")


@dataclass(frozen=True)
class LindbladModel:
    dim: int
    hamiltonian: Hamiltonian
    jump_ops: tuple[JumpOperator, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ops = tuple(
            j if isinstance(j, JumpOperator) else JumpOperator(*j) for j in self.jump_ops
        )
        object.__setattr__(self, "jump_ops", ops)
        hdim = getattr(self.hamiltonian, "dim", None)
        if hdim is not None and hdim != self.dim:
            raise ValidationError(f"hamiltonian has dimension {hdim}, model dimension is {self.dim}")
        for j in ops:
            if j.operator.shape != (self.dim, self.dim):
                raise ValidationError(
                    f"jump operator has shape {j.operator.shape}, model dimension is {self.dim}"
                )

    @property
    def is_unitary(self) -> bool:
        return all(j.rate == 0 for j in self.jump_ops)

    def h(self, t: float) -> np.ndarray:
        m = np.asarray(self.hamiltonian(t), dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValidationError(f"hamiltonian at t={t} has shape {m.shape}")
        err = hermiticity_error(m)
        if err > HERMITIAN_TOL:
            raise ValidationError(f"hamiltonian at t={t} is not Hermitian (error {err:.3e})")
        return m


@dataclass(frozen=True)
class DensityTrajectory:
    grid: TimeGrid
    samples: np.ndarray  # (steps + 1, d, d)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 3 or s.shape[0] != self.grid.steps + 1 or s.shape[1] != s.shape[2]:
            raise ValidationError(
                f"trajectory samples have shape {s.shape}, expected ({self.grid.steps + 1}, d, d)"
            )
        if not np.all(np.isfinite(s)):
            raise NumericalError("trajectory contains non-finite entries")
        object.__setattr__(self, "samples", s)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def trace_drift(self) -> float:
        tr = np.trace(self.samples, axis1=1, axis2=2)
        return float(np.max(np.abs(tr - 1.0)))

    def hermiticity_drift(self) -> float:
        return hermiticity_error(self.samples)

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.samples + dagger(self.samples))
        return float(np.min(np.linalg.eigvalsh(h)))


def validate_density(rho, name: str = "rho0", tol: float = TRACE_TOL) -> np.ndarray:
    r = as_square(rho, name)
    err = hermiticity_error(r)
    if err > HERMITIAN_TOL:
        raise ValidationError(f"{name} is not Hermitian (error {err:.3e})")
    tr = np.trace(r).real
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"{name} has trace {tr:.15g}, expected 1")
    lam = np.linalg.eigvalsh(0.5 * (r + dagger(r)))
    if lam[0] < -tol:
        raise ValidationError(f"{name} has negative eigenvalue {lam[0]:.3e}")
    return 0.5 * (r + dagger(r))


def _check_dims(model: LindbladModel, rho0: np.ndarray) -> None:
    if rho0.shape != (model.dim, model.dim):
        raise ValidationError(f"rho0 has shape {rho0.shape}, model dimension is {model.dim}")


def evolve_unitary(model: LindbladModel, rho0, grid: TimeGrid) -> DensityTrajectory:
    """Integrate ``dU/dt = -i H(t) U`` with RK4 and sample ``U rho0 U^dag``."""
    if not model.is_unitary:
        raise ValidationError("evolve_unitary requires a model without active jump operators")
    rho0 = validate_density(rho0)
    _check_dims(model, rho0)
    dt = grid.dt
    times = grid.times
    u = np.eye(model.dim, dtype=complex)
    out = np.empty((grid.steps + 1, model.dim, model.dim), dtype=complex)
    out[0] = rho0
    for i in range(grid.steps):
        t = times[i]
        h0, hm, h1 = model.h(t), model.h(t + 0.5 * dt), model.h(t + dt)
        k1 = -1j * h0 @ u
        k2 = -1j * hm @ (u + 0.5 * dt * k1)
        k3 = -1j * hm @ (u + 0.5 * dt * k2)
        k4 = -1j * h1 @ (u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        r = u @ rho0 @ dagger(u)
        out[i + 1] = 0.5 * (r + dagger(r))
    return DensityTrajectory(grid, out)


def gksl_generator(model: LindbladModel) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side ``d rho / dt`` of the GKSL master equation."""
    ls = [np.sqrt(j.rate) * j.operator for j in model.jump_ops if j.rate > 0]
    ldl = sum((dagger(l) @ l for l in ls), np.zeros((model.dim, model.dim), dtype=complex))

    def rhs(t: float, rho: np.ndarray) -> np.ndarray:
        h = model.h(t)
        d = -1j * (h @ rho - rho @ h)
        for l in ls:
            d += l @ rho @ dagger(l)
        d -= 0.5 * (ldl @ rho + rho @ ldl)
        return d

    return rhs


def evolve_lindblad(model: LindbladModel, rho0, grid: TimeGrid) -> DensityTrajectory:
    """RK4 integration of the GKSL equation on ``grid``."""
    rho0 = validate_density(rho0)
    _check_dims(model, rho0)
    rhs = gksl_generator(model)
    dt = grid.dt
    times = grid.times
    out = np.empty((grid.steps + 1, model.dim, model.dim), dtype=complex)
    out[0] = rho = rho0
    for i in range(grid.steps):
        t = times[i]
        k1 = rhs(t, rho)
        k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2)
        k4 = rhs(t + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + dagger(rho))
        drift = abs(np.trace(rho).real - 1.0)
        if drift > TRACE_DRIFT_REJECT:
            raise NumericalError(
                f"trace drifted by {drift:.3e} at t={t + dt:.6g}; use a smaller time step"
            )
        out[i + 1] = rho
    return DensityTrajectory(grid, out)


def evolve(model: LindbladModel, rho0, grid: TimeGrid) -> DensityTrajectory:
    """Dispatch to the unitary or GKSL integrator."""
    if model.is_unitary:
        return evolve_unitary(model, rho0, grid)
    return evolve_lindblad(model, rho0, grid)


def bloch_density(r: float, theta: float, phi: float = 0.0) -> np.ndarray:
    """Qubit state with Bloch vector of length ``r`` along (theta, phi)."""
    n = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
    return 0.5 * (np.eye(2) + r * (n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z))


def ladder_spectrum(dim: int, r: float) -> np.ndarray:
    """Weights proportional to ((1-r)/(1+r))**k; for a qubit the Bloch length is r."""
    if not 0 <= r <= 1:
        raise ValidationError(f"purity parameter r must lie in [0, 1], got {r}")
    if r == 1:
        w = np.zeros(dim)
        w[0] = 1.0
        return w
    w = ((1 - r) / (1 + r)) ** np.arange(dim)
    return w / w.sum()


def jump_ops(pairs: Sequence[tuple[np.ndarray, float]]) -> tuple[JumpOperator, ...]:
    return tuple(JumpOperator(np.asarray(op, dtype=complex), float(rate)) for op, rate in pairs)

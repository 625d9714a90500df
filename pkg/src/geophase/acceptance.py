"""Acceptance checks 1-10, shared by ``geophase verify`` and the test suite.

Each check returns a :class:`CheckResult`; ``detail`` records the measured
numbers next to the thresholds so a failure is self-explaining.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ensembles import uniform_ensemble, uniform_weights_admissible
from .evolve import DensityTrajectory, TimeGrid, evolve
from .matcore import random_density, unitarity_error
from .phases import (
    ancilla_from_policy,
    degenerate_holonomy,
    degenerate_phase,
    generalized_phase,
    kinematic_phase,
    phase_distance,
    pt_residual_generalized,
    pt_residual_uhlmann,
    uhlmann_phase_discrete,
)
from .scenario import BUILTINS, Scenario, builtin, evaluate_methods
from .spectral import SpectralTrajectory, cluster_degeneracies, track_spectrum, with_gauge_field

LINDBLAD_SEEDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.title}: {self.detail} ({self.seconds:.1f}s)"


def pipeline(s: Scenario) -> tuple[DensityTrajectory, SpectralTrajectory]:
    traj = evolve(s.model, s.rho0, s.grid)
    return traj, track_spectrum(traj, s.min_eigenvalue, s.gauge, s.eps_deg)


def mixed_precession_oracle(r: float, theta: float) -> float:
    """Interferometric phase of a Bloch vector of length r after one precession of polar angle theta."""
    omega = 2 * math.pi * (1 - math.cos(theta))
    # -arctan(r tan(Omega/2)) on the branch continuous in Omega
    return math.atan2(-r * math.sin(omega / 2), math.cos(omega / 2))


def check_berry() -> tuple[bool, str]:
    traj, spec = pipeline(builtin("qubit_precession", theta=math.pi / 3, r=1.0, steps=4000))
    target = -math.pi / 2
    kin = kinematic_phase(spec).gamma_g
    gen = generalized_phase(spec, ancilla_from_policy(spec, "uhlmann")).gamma_g
    disc = uhlmann_phase_discrete(traj)
    errs = [phase_distance(x, target) for x in (kin, gen, disc)]
    ok = max(errs) < 1e-3
    return ok, f"kinematic {kin:.6f}, generalized {gen:.6f}, discrete {disc:.6f} vs {target:.6f}; max err {max(errs):.2e} < 1e-3"


def check_mixed_interferometric() -> tuple[bool, str]:
    parts, worst = [], 0.0
    for theta in (math.pi / 3, math.pi / 4, 2 * math.pi / 5):
        _, spec = pipeline(builtin("qubit_precession", theta=theta, r=0.5))
        got = kinematic_phase(spec).gamma_g
        err = phase_distance(got, mixed_precession_oracle(0.5, theta))
        worst = max(worst, err)
        parts.append(f"theta={theta:.4f}: {got:.6f}")
    return worst < 1e-3, f"{'; '.join(parts)}; max err {worst:.2e} < 1e-3"


def _uhlmann_generalized_residual(s: Scenario) -> float:
    _, spec = pipeline(s)
    return float(np.max(pt_residual_generalized(spec, ancilla_from_policy(spec, "uhlmann", min_eigenvalue=s.min_eigenvalue))))


def check_uhlmann_implies_generalized() -> tuple[bool, str]:
    cases = [("qubit_dephasing", {})] + [("random_lindblad", {"seed": k}) for k in LINDBLAD_SEEDS]
    ok, parts = True, []
    for name, kw in cases:
        r1 = _uhlmann_generalized_residual(builtin(name, steps=4000, **kw))
        r2 = _uhlmann_generalized_residual(builtin(name, steps=8000, **kw))
        ratio = r1 / r2 if r2 > 0 else math.inf
        ok &= r1 < 1e-4 and ratio >= 3.0
        parts.append(f"{name}{kw.get('seed', '')}: {r1:.1e} (x{ratio:.1f})")
    return ok, "residual at 4000 steps (shrink factor at 8000): " + ", ".join(parts)


def check_non_implication() -> tuple[bool, str]:
    _, spec = pipeline(builtin("qubit_precession", theta=math.pi / 3, r=0.5))
    anc = ancilla_from_policy(spec, "diagonal")
    gen, uhl = float(np.max(pt_residual_generalized(spec, anc))), pt_residual_uhlmann(spec, anc)
    return gen < 1e-4 and uhl > 1e-2, f"generalized PT {gen:.2e} < 1e-4, Uhlmann PT {uhl:.2e} > 1e-2"


def check_commutation() -> tuple[bool, str]:
    worst, parts = 0.0, []
    for name in BUILTINS:
        _, spec = pipeline(builtin(name))
        kin = kinematic_phase(spec)
        gen = generalized_phase(spec, ancilla_from_policy(spec, "diagonal"), residuals=False)
        if not (kin.defined and gen.defined):
            parts.append(f"{name}: undefined")
            continue
        d = phase_distance(kin.gamma_g, gen.gamma_g)
        worst = max(worst, d)
        parts.append(f"{name}: {d:.1e}")
    return worst < 1e-6, f"max |diagonal - kinematic| {worst:.1e} < 1e-6 ({', '.join(parts)})"


def check_uhlmann_vs_interferometric() -> tuple[bool, str]:
    gaps = {}
    for r in (0.5, 0.999):
        traj, spec = pipeline(builtin("qubit_precession", theta=math.pi / 3, r=r))
        gaps[r] = phase_distance(uhlmann_phase_discrete(traj), kinematic_phase(spec).gamma_g)
    return gaps[0.5] > 1e-2 and gaps[0.999] < 1e-2, f"gap at r=0.5 {gaps[0.5]:.3e} > 1e-2, at r=0.999 {gaps[0.999]:.3e} < 1e-2"


def snapshot(rho: np.ndarray) -> SpectralTrajectory:
    """Spectral data of a single state, as a two-sample constant trajectory."""
    grid = TimeGrid(1.0, 2)
    return track_spectrum(DensityTrajectory(grid, np.stack([rho] * grid.times.size)))


def check_uniform_decomposition(samples: int = 100, seed: int = 2024) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst, admissible = 0.0, True
    for n in (2, 3, 4):
        for _ in range(samples):
            rho = random_density(n, rng, min_gap=1e-3)
            spec = snapshot(rho)
            ens = uniform_ensemble(spec, 0)
            worst = max(worst, float(np.max(np.abs(ens.density() - rho))))
            admissible &= uniform_weights_admissible(spec.p[0])
    return worst < 1e-10 and admissible, f"max reconstruction error {worst:.1e} < 1e-10, majorization {'ok' if admissible else 'violated'}"


def check_degenerate() -> tuple[bool, str]:
    s = builtin("qutrit_degenerate")
    _, spec = pipeline(s)
    deg = cluster_degeneracies(spec, s.eps_deg)
    blocks = [c for c in deg.clusters if len(c) > 1]
    hol = degenerate_holonomy(spec, deg)
    alpha = [a for c, a in zip(deg.clusters, hol.alpha) if len(c) > 1]
    unit = max(unitarity_error(a) for a in alpha) if alpha else math.inf
    offdiag = max(float(np.max(np.abs(a - np.diag(np.diag(a))))) for a in alpha) if alpha else 0.0
    pt = float(np.max(degenerate_phase(spec, deg).pt_generalized))

    ss = builtin("qutrit_degenerate", split=0.05)
    _, spec2 = pipeline(ss)
    deg2 = cluster_degeneracies(spec2, ss.eps_deg)
    collapsed = degenerate_phase(spec2, deg2).gamma_g
    abelian = generalized_phase(spec2, ancilla_from_policy(spec2, "diagonal"), residuals=False).gamma_g
    match = phase_distance(collapsed, abelian)
    ok = bool(blocks) and unit < 1e-6 and offdiag > 0.1 and pt < 1e-4 and match < 1e-6 and not deg2.is_degenerate
    return ok, (
        f"blocks {blocks}, unitarity {unit:.1e} < 1e-6, off-diagonal {offdiag:.3f} > 0.1, "
        f"intra-block PT {pt:.1e} < 1e-4, split-block vs Abelian {match:.1e} < 1e-6"
    )


def random_gauge_field(times: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth random phases ``phi_k(t)`` with nonzero winding drift."""
    a = rng.uniform(0.5, 2.0, n)
    b = rng.uniform(0.5, 3.0, n)
    c = rng.uniform(0, 2 * math.pi, n)
    drift = rng.uniform(-1.0, 1.0, n)
    return a * np.sin(b * times[:, None] + c) + drift * times[:, None]


def check_gauge_invariance(seed: int = 7) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst, parts = 0.0, []
    for name in BUILTINS:
        s = builtin(name)
        traj, spec = pipeline(s)
        base = evaluate_methods(s, traj, spec, final_only=True).final
        phi = random_gauge_field(spec.times, spec.rank, rng)
        moved = evaluate_methods(s, traj, with_gauge_field(spec, phi), final_only=True).final
        d = 0.0
        for method, entry in base.items():
            if entry["gamma_g"] is None or moved[method]["gamma_g"] is None:
                continue
            d = max(d, phase_distance(entry["gamma_g"], moved[method]["gamma_g"]))
        worst = max(worst, d)
        parts.append(f"{name}: {d:.1e}")
    return worst < 1e-5, f"max change {worst:.1e} < 1e-5 ({', '.join(parts)})"


def check_integrator() -> tuple[bool, str]:
    cases = [("qubit_dephasing", {}), ("qubit_amplitude_damping", {})] + [("random_lindblad", {"seed": k}) for k in LINDBLAD_SEEDS]
    drift, min_eig = 0.0, math.inf
    for name, kw in cases:
        s = builtin(name, **kw)
        traj = evolve(s.model, s.rho0, s.grid)
        drift = max(drift, traj.trace_drift())
        min_eig = min(min_eig, traj.min_eigenvalue())
    gamma = 0.1
    s = builtin("qubit_dephasing", gamma=gamma)
    traj = evolve(s.model, s.rho0, s.grid)
    exact = s.rho0[0, 1] * np.exp(-2 * gamma * traj.grid.times)
    coh = float(np.max(np.abs(traj.samples[:, 0, 1] - exact)))
    ok = drift < 1e-8 and min_eig >= -1e-8 and coh < 1e-6
    return ok, f"trace drift {drift:.1e} < 1e-8, min eigenvalue {min_eig:.3e} >= -1e-8, coherence error {coh:.1e} < 1e-6"


CHECKS: tuple[tuple[int, str, Callable[[], tuple[bool, str]]], ...] = (
    (1, "pure-state Berry phase", check_berry),
    (2, "mixed interferometric phase", check_mixed_interferometric),
    (3, "Uhlmann transport implies generalized transport", check_uhlmann_implies_generalized),
    (4, "generalized transport does not imply Uhlmann", check_non_implication),
    (5, "diagonal ancilla reproduces kinematic phase", check_commutation),
    (6, "Uhlmann vs interferometric phase", check_uhlmann_vs_interferometric),
    (7, "uniform decomposition", check_uniform_decomposition),
    (8, "degenerate non-Abelian holonomy", check_degenerate),
    (9, "gauge invariance", check_gauge_invariance),
    (10, "integrator quality", check_integrator),
)


def run_check(number: int) -> CheckResult:
    num, title, fn = next(c for c in CHECKS if c[0] == number)
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed check, reported as such
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(num, title, bool(ok), detail, time.perf_counter() - start)


def run_all(echo: bool = False) -> list[CheckResult]:
    results = []
    for num, _, _ in CHECKS:
        res = run_check(num)
        if echo:
            print(res.line(), flush=True)
        results.append(res)
    return results

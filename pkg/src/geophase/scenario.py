"""Scenario documents, builtin scenarios and the end-to-end pipeline.

A scenario is one YAML (or JSON) mapping.  Complex matrices are nested
lists of ``[re, im]`` pairs (bare real numbers are accepted too)::

    name: my_qubit
    dimension: 2
    initial_density: {family: thermal, r: 0.5, theta: 1.0471975511965976}
    evolution:
      type: unitary                 # or lindblad
      hamiltonian: {family: constant, matrix: [[[0.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]]}
      # jump_ops: [{operator: ..., rate: 0.1}]   (lindblad only)
    time: {t_final: 6.283185307179586, steps: 4000}
    ancilla_policy: uhlmann         # identity | uhlmann | uhlmann_verbatim | diagonal | explicit
    methods: [kinematic, generalized, uhlmann_discrete]
    tolerances: {min_eigenvalue: 1.0e-10, eps_deg: 1.0e-8}
    gauge: continuity               # continuity | reference | raw
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import yaml

from .errors import GeoPhaseError, NumericalError, ValidationError
from .evolve import (
    ConstantHamiltonian,
    DensityTrajectory,
    JumpOperator,
    LindbladModel,
    PrecessionHamiltonian,
    TabulatedHamiltonian,
    TimeGrid,
    bloch_density,
    evolve,
    ladder_spectrum,
    validate_density,
)
from .matcore import (
    SIGMA_MINUS,
    SIGMA_Z,
    dagger,
    matrix_exp,
    random_density,
    random_hermitian,
    random_unitary,
)
from .phases import (
    POLICIES,
    ancilla_from_policy,
    degenerate_ancilla,
    degenerate_holonomy,
    degenerate_phase,
    double_sum_total,
    unitary_pt_residuals,
    generalized_components,
    generalized_phase,
    kinematic_components,
    pt_generalized_series,
    pt_uhlmann_series,
    uhlmann_discrete_series,
    wrap_phase,
)
from .spectral import GAUGES, SpectralTrajectory, cluster_degeneracies, track_spectrum

METHODS = ("kinematic", "generalized", "uhlmann_discrete", "degenerate")
DEFAULT_METHODS = ("kinematic", "generalized", "uhlmann_discrete")

_TOP_FIELDS = {
    "name", "description", "dimension", "initial_density", "evolution", "time",
    "ancilla_policy", "ancilla_explicit", "methods", "tolerances", "gauge",
}
_REQUIRED = ("name", "dimension", "initial_density", "evolution", "time")


@dataclass(frozen=True)
class Scenario:
    name: str
    dimension: int
    rho0: np.ndarray
    model: LindbladModel
    grid: TimeGrid
    evolution_type: str = "unitary"
    ancilla_policy: str = "identity"
    ancilla_generator: np.ndarray | None = None
    methods: tuple[str, ...] = DEFAULT_METHODS
    min_eigenvalue: float = 1e-10
    eps_deg: float = 1e-8
    gauge: str = "continuity"
    document: dict = field(default_factory=dict, compare=False, repr=False)

    def with_steps(self, steps: int) -> "Scenario":
        doc = copy.deepcopy(self.document)
        doc["time"]["steps"] = int(steps)
        return parse_scenario(doc)

    def with_methods(self, methods) -> "Scenario":
        doc = copy.deepcopy(self.document)
        doc["methods"] = list(methods)
        return parse_scenario(doc)


# -- parsing -------------------------------------------------------------------


def _check_fields(obj: Any, allowed: set[str], where: str, required: tuple[str, ...] = ()) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: expected a mapping, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ValidationError(f"{where}: missing required field(s) {', '.join(missing)}")
    return obj


def _number(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"{where}: expected a number, got {x!r}")
    if not math.isfinite(x):
        raise ValidationError(f"{where}: must be finite")
    return float(x)


def _complex(x: Any, where: str) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValidationError(f"{where}: complex entries are [re, im] pairs, got {x!r}")
        return complex(_number(x[0], where), _number(x[1], where))
    return complex(_number(x, where))


def parse_matrix(obj: Any, dim: int, where: str) -> np.ndarray:
    if not isinstance(obj, (list, tuple)) or not all(isinstance(r, (list, tuple)) for r in obj):
        raise ValidationError(f"{where}: expected a list of rows")
    rows, cols = len(obj), {len(r) for r in obj}
    if len(cols) != 1:
        raise ValidationError(f"{where}: rows have unequal lengths")
    ncols = cols.pop()
    if (rows, ncols) != (dim, dim):
        raise ValidationError(f"{where}: dimension mismatch, expected {dim}x{dim}, got {rows}x{ncols}")
    return np.array([[_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(obj)])


def matrix_to_doc(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _parse_density(obj: Any, dim: int) -> np.ndarray:
    where = "initial_density"
    _check_fields(obj, {"family", "theta", "phi", "r", "matrix", "weights"}, where, ("family",))
    fam = obj["family"]
    allowed = {
        "pure_bloch": {"family", "theta", "phi"},
        "thermal": {"family", "r", "theta", "phi"},
        "maximally_mixed": {"family"},
        "explicit": {"family", "matrix"},
        "diagonal": {"family", "weights"},
    }
    if fam not in allowed:
        raise ValidationError(f"{where}.family: unknown family {fam!r}; expected one of {sorted(allowed)}")
    _check_fields(obj, allowed[fam], where)
    if fam in ("pure_bloch",) or (fam == "thermal" and ("theta" in obj or "phi" in obj)):
        if dim != 2:
            raise ValidationError(f"{where}: Bloch angles need dimension 2, got {dim}")
    if fam == "pure_bloch":
        rho = bloch_density(1.0, _number(obj.get("theta", 0.0), f"{where}.theta"), _number(obj.get("phi", 0.0), f"{where}.phi"))
    elif fam == "thermal":
        if "r" not in obj:
            raise ValidationError(f"{where}: missing required field(s) r")
        r = _number(obj["r"], f"{where}.r")
        if dim == 2:
            rho = bloch_density(r, _number(obj.get("theta", 0.0), f"{where}.theta"), _number(obj.get("phi", 0.0), f"{where}.phi"))
        else:
            rho = np.diag(ladder_spectrum(dim, r)).astype(complex)
    elif fam == "maximally_mixed":
        rho = np.eye(dim, dtype=complex) / dim
    elif fam == "diagonal":
        w = obj.get("weights")
        if not isinstance(w, (list, tuple)) or len(w) != dim:
            raise ValidationError(f"{where}.weights: dimension mismatch, expected {dim} weights")
        rho = np.diag([_number(x, f"{where}.weights") for x in w]).astype(complex)
    else:
        if "matrix" not in obj:
            raise ValidationError(f"{where}: missing required field(s) matrix")
        rho = parse_matrix(obj["matrix"], dim, f"{where}.matrix")
    try:
        return validate_density(rho, where)
    except ValidationError as exc:
        raise ValidationError(str(exc)) from None


def _parse_hamiltonian(obj: Any, dim: int, where: str):
    _check_fields(obj, {"family", "matrix", "omega", "theta", "times", "matrices"}, where, ("family",))
    fam = obj["family"]
    if fam == "constant":
        _check_fields(obj, {"family", "matrix"}, where, ("matrix",))
        return ConstantHamiltonian(parse_matrix(obj["matrix"], dim, f"{where}.matrix"))
    if fam == "precession":
        _check_fields(obj, {"family", "omega", "theta"}, where, ("omega", "theta"))
        if dim != 2:
            raise ValidationError(f"{where}: precession family needs dimension 2, got {dim}")
        return PrecessionHamiltonian(_number(obj["omega"], f"{where}.omega"), _number(obj["theta"], f"{where}.theta"))
    if fam == "tabulated":
        _check_fields(obj, {"family", "times", "matrices"}, where, ("times", "matrices"))
        times = [_number(t, f"{where}.times") for t in obj["times"]]
        mats = [parse_matrix(m, dim, f"{where}.matrices[{i}]") for i, m in enumerate(obj["matrices"])]
        if len(mats) != len(times):
            raise ValidationError(f"{where}: {len(times)} times but {len(mats)} matrices")
        return TabulatedHamiltonian(np.array(times), np.array(mats))
    raise ValidationError(f"{where}.family: unknown hamiltonian family {fam!r}")


def parse_scenario(doc: Any) -> Scenario:
    """Validate a scenario document (mapping, or YAML/JSON text) into a :class:`Scenario`."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = yaml.safe_load(doc)
        except yaml.YAMLError as exc:
            raise ValidationError(f"scenario document is not well-formed: {exc}") from None
    doc = copy.deepcopy(doc)
    _check_fields(doc, _TOP_FIELDS, "scenario", _REQUIRED)
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise ValidationError("name: expected a non-empty string")
    dim = doc["dimension"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"dimension: expected a positive integer, got {dim!r}")

    rho0 = _parse_density(doc["initial_density"], dim)

    ev = _check_fields(doc["evolution"], {"type", "hamiltonian", "jump_ops"}, "evolution", ("type", "hamiltonian"))
    etype = ev["type"]
    if etype not in ("unitary", "lindblad"):
        raise ValidationError(f"evolution.type: expected unitary or lindblad, got {etype!r}")
    ham = _parse_hamiltonian(ev["hamiltonian"], dim, "evolution.hamiltonian")
    jumps = []
    if "jump_ops" in ev:
        if etype == "unitary":
            raise ValidationError("evolution.jump_ops: not allowed for unitary evolution")
        if not isinstance(ev["jump_ops"], list):
            raise ValidationError("evolution.jump_ops: expected a list")
        for i, j in enumerate(ev["jump_ops"]):
            where = f"evolution.jump_ops[{i}]"
            _check_fields(j, {"operator", "rate"}, where, ("operator", "rate"))
            rate = _number(j["rate"], f"{where}.rate")
            if rate < 0:
                raise ValidationError(f"{where}.rate: negative rate {rate}")
            jumps.append(JumpOperator(parse_matrix(j["operator"], dim, f"{where}.operator"), rate))
    model = LindbladModel(dim, ham, tuple(jumps))

    tm = _check_fields(doc["time"], {"t_final", "steps"}, "time", ("t_final", "steps"))
    steps = tm["steps"]
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 2:
        raise ValidationError(f"time.steps: expected an integer >= 2, got {steps!r}")
    grid = TimeGrid(_number(tm["t_final"], "time.t_final"), steps)
    if isinstance(ham, TabulatedHamiltonian) and (ham.times[0] > 0 or ham.times[-1] < grid.t_final):
        raise ValidationError("evolution.hamiltonian.times: must cover [0, t_final]")

    policy = doc.get("ancilla_policy", "identity")
    if policy not in POLICIES:
        raise ValidationError(f"ancilla_policy: unknown policy {policy!r}; expected one of {POLICIES}")
    gen = None
    if policy == "explicit":
        ex = _check_fields(doc.get("ancilla_explicit"), {"generator"}, "ancilla_explicit", ("generator",))
        rank = int(np.sum(np.linalg.eigvalsh(rho0) > doc.get("tolerances", {}).get("min_eigenvalue", 1e-10)))
        gen = parse_matrix(ex["generator"], rank, "ancilla_explicit.generator")
        if np.max(np.abs(gen - dagger(gen))) > 1e-10:
            raise ValidationError("ancilla_explicit.generator: must be Hermitian")
    elif "ancilla_explicit" in doc:
        raise ValidationError("ancilla_explicit: only allowed with ancilla_policy explicit")

    methods = doc.get("methods", list(DEFAULT_METHODS))
    if not isinstance(methods, list) or not methods:
        raise ValidationError("methods: expected a non-empty list")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValidationError(f"methods: unknown method(s) {', '.join(map(str, bad))}")

    tol = _check_fields(doc.get("tolerances", {}), {"min_eigenvalue", "eps_deg"}, "tolerances")
    min_eig = _number(tol.get("min_eigenvalue", 1e-10), "tolerances.min_eigenvalue")
    eps_deg = _number(tol.get("eps_deg", 1e-8), "tolerances.eps_deg")
    gauge = doc.get("gauge", "continuity")
    if gauge not in GAUGES:
        raise ValidationError(f"gauge: unknown gauge {gauge!r}; expected one of {GAUGES}")

    doc.setdefault("ancilla_policy", policy)
    doc.setdefault("methods", list(methods))
    doc.setdefault("tolerances", {})
    doc["tolerances"].setdefault("min_eigenvalue", min_eig)
    doc["tolerances"].setdefault("eps_deg", eps_deg)
    doc.setdefault("gauge", gauge)
    return Scenario(
        name=name,
        dimension=dim,
        rho0=rho0,
        model=model,
        grid=grid,
        evolution_type=etype,
        ancilla_policy=policy,
        ancilla_generator=gen,
        methods=tuple(dict.fromkeys(methods)),
        min_eigenvalue=min_eig,
        eps_deg=eps_deg,
        gauge=gauge,
        document=doc,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from None
    return parse_scenario(text)


# -- builtins ------------------------------------------------------------------


def _zero(dim: int) -> list:
    return matrix_to_doc(np.zeros((dim, dim)))


def _qubit_precession(theta: float = math.pi / 3, r: float = 1.0, omega: float = 1.0, steps: int = 4000,
                      policy: str = "uhlmann") -> dict:
    # static field along z; the Bloch vector sweeps the cone of polar angle theta once
    return {
        "name": "qubit_precession",
        "description": "Bloch vector of length r at polar angle theta precessing once about z",
        "dimension": 2,
        "initial_density": {"family": "thermal", "r": r, "theta": theta, "phi": 0.0},
        "evolution": {"type": "unitary", "hamiltonian": {"family": "constant", "matrix": matrix_to_doc(0.5 * omega * SIGMA_Z)}},
        "time": {"t_final": 2 * math.pi / omega, "steps": steps},
        "ancilla_policy": policy,
        "methods": ["kinematic", "generalized", "uhlmann_discrete"],
    }


def _qubit_dephasing(gamma: float = 0.1, r: float = 0.9, theta: float = math.pi / 3, omega: float = 0.0,
                     t_final: float = 2 * math.pi, steps: int = 4000, policy: str = "uhlmann") -> dict:
    return {
        "name": "qubit_dephasing",
        "description": "sigma_z dephasing of a tilted Bloch vector",
        "dimension": 2,
        "initial_density": {"family": "thermal", "r": r, "theta": theta, "phi": 0.0},
        "evolution": {
            "type": "lindblad",
            "hamiltonian": {"family": "constant", "matrix": matrix_to_doc(0.5 * omega * SIGMA_Z)},
            "jump_ops": [{"operator": matrix_to_doc(SIGMA_Z), "rate": gamma}],
        },
        "time": {"t_final": t_final, "steps": steps},
        "ancilla_policy": policy,
        "methods": ["kinematic", "generalized", "uhlmann_discrete"],
    }


def _qubit_amplitude_damping(gamma: float = 0.2, r: float = 0.7, theta: float = math.pi / 4, omega: float = 1.0,
                             t_final: float = 2 * math.pi, steps: int = 4000, policy: str = "uhlmann") -> dict:
    return {
        "name": "qubit_amplitude_damping",
        "description": "decay towards |0> while precessing about z",
        "dimension": 2,
        "initial_density": {"family": "thermal", "r": r, "theta": theta, "phi": 0.0},
        "evolution": {
            "type": "lindblad",
            "hamiltonian": {"family": "constant", "matrix": matrix_to_doc(0.5 * omega * SIGMA_Z)},
            "jump_ops": [{"operator": matrix_to_doc(SIGMA_MINUS), "rate": gamma}],
        },
        "time": {"t_final": t_final, "steps": steps},
        "ancilla_policy": policy,
        "methods": ["kinematic", "generalized", "uhlmann_discrete"],
    }


def _qutrit_degenerate(split: float = 0.0, seed: int = 1, steps: int = 4000, policy: str = "diagonal") -> dict:
    # H has integer spectrum (0, 1, 2), so exp(-i H 2 pi) = I and the state returns at t = 2 pi
    q = random_unitary(3, np.random.default_rng(seed))
    h = q @ np.diag([0.0, 1.0, 2.0]) @ dagger(q)
    return {
        "name": "qutrit_degenerate",
        "description": "unitary loop of a qutrit with a two-fold degenerate eigenvalue",
        "dimension": 3,
        "initial_density": {"family": "diagonal", "weights": [0.5, 0.25 + split, 0.25 - split]},
        "evolution": {"type": "unitary", "hamiltonian": {"family": "constant", "matrix": matrix_to_doc(h)}},
        "time": {"t_final": 2 * math.pi, "steps": steps},
        "ancilla_policy": policy,
        "methods": ["kinematic", "generalized", "uhlmann_discrete", "degenerate"],
        "gauge": "reference",
    }


def _random_unitary(seed: int = 1, dim: int = 3, steps: int = 4000, policy: str = "uhlmann") -> dict:
    rng = np.random.default_rng(seed)
    h = random_hermitian(dim, rng, 0.5)
    rho0 = random_density(dim, rng, min_gap=0.15)
    return {
        "name": "random_unitary",
        "description": f"random Hamiltonian and mixed state (seed {seed})",
        "dimension": dim,
        "initial_density": {"family": "explicit", "matrix": matrix_to_doc(rho0)},
        "evolution": {"type": "unitary", "hamiltonian": {"family": "constant", "matrix": matrix_to_doc(h)}},
        "time": {"t_final": 2.0, "steps": steps},
        "ancilla_policy": policy,
        "methods": ["kinematic", "generalized", "uhlmann_discrete"],
    }


def _random_lindblad(seed: int = 1, dim: int = 3, rate: float = 0.1, steps: int = 4000, policy: str = "uhlmann") -> dict:
    rng = np.random.default_rng(seed)
    h = random_hermitian(dim, rng, 0.5)
    ops = [(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / 2 for _ in range(2)]
    rho0 = random_density(dim, rng, min_gap=0.15)
    return {
        "name": "random_lindblad",
        "description": f"random Hamiltonian, two random jump operators (seed {seed})",
        "dimension": dim,
        "initial_density": {"family": "explicit", "matrix": matrix_to_doc(rho0)},
        "evolution": {
            "type": "lindblad",
            "hamiltonian": {"family": "constant", "matrix": matrix_to_doc(h)},
            "jump_ops": [{"operator": matrix_to_doc(op), "rate": rate} for op in ops],
        },
        "time": {"t_final": 2.0, "steps": steps},
        "ancilla_policy": policy,
        "methods": ["kinematic", "generalized", "uhlmann_discrete"],
    }


BUILTINS: dict[str, Callable[..., dict]] = {
    "qubit_precession": _qubit_precession,
    "qubit_dephasing": _qubit_dephasing,
    "qubit_amplitude_damping": _qubit_amplitude_damping,
    "qutrit_degenerate": _qutrit_degenerate,
    "random_unitary": _random_unitary,
    "random_lindblad": _random_lindblad,
}


def builtin_document(name: str, **params) -> dict:
    if name not in BUILTINS:
        raise ValidationError(f"unknown builtin {name!r}; available: {', '.join(BUILTINS)}")
    try:
        return BUILTINS[name](**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for builtin {name}: {exc}") from None


def builtin(name: str, **params) -> Scenario:
    return parse_scenario(builtin_document(name, **params))


# -- running -------------------------------------------------------------------


@dataclass
class RunReport:
    name: str
    rank: int
    times: np.ndarray
    table: dict[str, np.ndarray]
    final: dict[str, dict]
    residuals: dict[str, Any]
    diagnostics: dict[str, Any]

    def columns(self) -> list[str]:
        base = ["time", "gamma_kinematic", "gamma_generalized", "gamma_uhlmann_discrete",
                "pt_res_generalized_max", "pt_res_uhlmann"]
        return base + [f"nu_{k + 1}" for k in range(self.rank)] + [f"gamma_comp_{k + 1}" for k in range(self.rank)]

    def row_count(self) -> int:
        return self.times.size

    def to_dict(self) -> dict:
        cols = self.columns()
        return {
            "scenario": self.name,
            "rank": self.rank,
            "columns": cols,
            "table": {c: (self.table[c].tolist() if c in self.table else None) for c in cols},
            "final": self.final,
            "residuals": self.residuals,
            "diagnostics": self.diagnostics,
        }


def unwrap_phases(x: np.ndarray) -> np.ndarray:
    """Nearest-branch continuation of a phase series, skipping undefined (NaN) samples."""
    out = np.array(x, dtype=float)
    prev = None
    for i, val in enumerate(out):
        if not np.isfinite(val):
            continue
        if prev is not None:
            val = prev + wrap_phase(val - prev)
            out[i] = val
        prev = val
    return out


def _angle(z: np.ndarray) -> np.ndarray:
    a = wrap_phase(np.angle(z))
    return np.where(np.abs(z) >= 1e-12, a, np.nan)


def _final_entry(total: complex, nu=None, gamma=None, **extra) -> dict:
    defined = abs(total) >= 1e-12
    entry = {
        "status": "ok" if defined else "undefined",
        "gamma_g": float(wrap_phase(np.angle(total))) if defined else None,
        "magnitude": float(abs(total)),
    }
    if nu is not None:
        entry["nu"] = [float(x) for x in nu]
        entry["gamma_components"] = [float(x) for x in gamma]
    entry.update(extra)
    return entry


def evaluate_methods(scenario: Scenario, traj: DensityTrajectory, spec: SpectralTrajectory,
                     methods=None, final_only: bool = False) -> RunReport:
    """Run the requested phase engines on an already tracked spectrum."""
    methods = tuple(methods or scenario.methods)
    n = spec.rank
    sel = slice(-1, None) if final_only else slice(None)
    table: dict[str, np.ndarray] = {"time": spec.times[sel]}
    final: dict[str, dict] = {}
    residuals: dict[str, Any] = {}
    comps = None

    if "kinematic" in methods:
        z = kinematic_components(spec)
        table["gamma_kinematic"] = unwrap_phases(_angle(z.sum(axis=1)))[sel]
        final["kinematic"] = _final_entry(z[-1].sum(), np.abs(z[-1]), wrap_phase(np.angle(z[-1])))
        comps = z

    if "generalized" in methods:
        explicit_v = None
        if scenario.ancilla_policy == "explicit":
            explicit_v = np.stack([matrix_exp(-1j * scenario.ancilla_generator * t) for t in spec.times])
        anc = ancilla_from_policy(spec, scenario.ancilla_policy, explicit_v, scenario.min_eigenvalue)
        z = generalized_components(spec, anc)
        alt = double_sum_total(spec, anc)
        err = float(np.max(np.abs(alt - z.sum(axis=1))))
        if err > 1e-9 * max(1.0, float(np.max(np.abs(alt)))):
            raise NumericalError(f"component and double-sum forms disagree by {err:.3e}")
        ptg = pt_generalized_series(spec, anc)
        ptu = pt_uhlmann_series(spec, anc)
        table["gamma_generalized"] = unwrap_phases(_angle(z.sum(axis=1)))[sel]
        table["pt_res_generalized_max"] = ptg.max(axis=1)[sel]
        table["pt_res_uhlmann"] = ptu[sel]
        final["generalized"] = _final_entry(
            z[-1].sum(), np.abs(z[-1]), wrap_phase(np.angle(z[-1])),
            policy=scenario.ancilla_policy, double_sum_error=err,
        )
        residuals["pt_generalized"] = [float(x) for x in ptg.max(axis=0)]
        residuals["pt_uhlmann"] = float(ptu.max())
        if "generator_residue" in anc.diagnostics:
            residuals["generator_residue"] = anc.diagnostics["generator_residue"]
        if scenario.evolution_type == "unitary":
            fn = unitary_pt_residuals(spec, anc)
            residuals["unitary_pt"] = {k: [float(x) for x in v] for k, v in fn.items()}
        comps = z

    if "uhlmann_discrete" in methods:
        z, worst = uhlmann_discrete_series(traj, scenario.min_eigenvalue)
        if worst > 1e-8:
            raise NumericalError(f"discrete Uhlmann overlaps lost positivity by {worst:.3e}")
        table["gamma_uhlmann_discrete"] = unwrap_phases(_angle(z))[sel]
        final["uhlmann_discrete"] = _final_entry(z[-1], positivity_violation=worst)

    if "degenerate" in methods:
        deg = cluster_degeneracies(spec, scenario.eps_deg)
        hol = degenerate_holonomy(spec, deg)
        rep = degenerate_phase(spec, deg)
        final["degenerate"] = _final_entry(
            rep.total, rep.nu, rep.gamma,
            clusters=[list(c) for c in deg.clusters],
            alpha=[matrix_to_doc(a) for a in hol.alpha],
            alpha_unitarity_error=hol.max_unitarity_error(),
            pt_last=[float(x) for x in rep.pt_generalized],
        )
        if comps is None:
            comps = generalized_components(spec, degenerate_ancilla(spec, deg))

    if comps is not None:
        for k in range(n):
            table[f"nu_{k + 1}"] = np.abs(comps[:, k])[sel]
            table[f"gamma_comp_{k + 1}"] = unwrap_phases(_angle(comps[:, k]))[sel]

    diagnostics = {
        "trace_drift": traj.trace_drift(),
        "hermiticity_drift": traj.hermiticity_drift(),
        "min_eigenvalue": traj.min_eigenvalue(),
        "rank": n,
        "dimension": spec.dim,
        "steps": spec.grid.steps,
        "t_final": spec.grid.t_final,
        "gauge": spec.gauge_policy,
        "methods": list(methods),
    }
    return RunReport(scenario.name, n, table["time"], table, final, residuals, diagnostics)


def run_scenario(scenario: Scenario, methods=None, final_only: bool = False) -> RunReport:
    """evolve -> track_spectrum -> requested phase engines."""
    try:
        traj = evolve(scenario.model, scenario.rho0, scenario.grid)
        spec = track_spectrum(traj, scenario.min_eigenvalue, scenario.gauge, scenario.eps_deg)
        return evaluate_methods(scenario, traj, spec, methods, final_only)
    except GeoPhaseError as exc:
        raise type(exc)(f"scenario {scenario.name}: {exc}") from exc


# -- output --------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _to_json(obj: Any) -> str:
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{_to_json(str(k))}: {_to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_report(report: RunReport, fmt: str = "csv") -> str:
    if fmt == "json":
        return _to_json(report.to_dict()) + "\n"
    if fmt != "csv":
        raise ValidationError(f"unknown format {fmt!r}; expected csv or json")
    cols = report.columns()
    lines = [",".join(cols)]
    for i in range(report.row_count()):
        cells = []
        for c in cols:
            col = report.table.get(c)
            cells.append("" if col is None or not np.isfinite(col[i]) else _fmt(col[i]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, fmt: str = "csv", path: str | None = None) -> str:
    """Serialize ``report`` as CSV or JSON; write it to ``path`` unless it is ``None`` or ``-``."""
    text = render_report(report, fmt)
    if path not in (None, "-"):
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ValidationError(f"cannot write report to {path}: {exc}") from None
    return text

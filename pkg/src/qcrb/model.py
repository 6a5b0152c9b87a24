"""Parameterized open-system models.

A model is a Hilbert dimension, a named real parameter vector, a Hamiltonian
builder H(theta) and a list of jump-operator builders L_c(theta).  The driven
two-level atom and a decoherence-free dephasing qubit are built in; arbitrary
models load from a JSON document whose matrix entries are affine in the named
parameters (entry = constant + sum_k coeff_k * param_k).

Basis convention for the two-level builders: (|g>, |e>) with the excited
state second, so |e><e| = diag(0, 1).
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .algebra import is_hermitian
from .errors import (
    DimensionMismatch,
    InvalidParameter,
    NonHermitianHamiltonian,
    SchemaError,
    StepTooLarge,
)

BUILTIN_MODELS = ("two_level", "dephasing_qubit")


@dataclass(frozen=True)
class ParameterVector:
    """Ordered, named real parameters (dimensionless rates/frequencies)."""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.names) != len(self.values):
            raise ValueError("names and values must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("parameter names must be unique")

    def index(self, name):
        return self.names.index(name)

    def perturbed(self, idx, delta):
        """New vector with component idx shifted by delta."""
        values = self.values.copy()
        values[idx] += delta
        return ParameterVector(self.names, values)

    def with_values(self, values):
        return ParameterVector(self.names, values)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True)
class ModelSpec:
    """A parameterized open quantum system.

    `hamiltonian` and each element of `jumps` map a parameter-value array
    (ordered as in `params.names`) to an LxL complex matrix.  `initial_state`
    is a pure-state vector, a density matrix, or the token "steady" which
    consumers resolve to the stationary state of the Lindblad generator.
    """

    dimension: int
    params: ParameterVector
    hamiltonian: Callable[[np.ndarray], np.ndarray]
    jumps: tuple
    initial_state: object = "steady"
    name: str = "custom"
    document: Optional[dict] = field(default=None, repr=False, compare=False)

    def h(self, theta=None):
        values = self.params.values if theta is None else _values_of(theta)
        out = np.asarray(self.hamiltonian(values), dtype=complex)
        if out.shape != (self.dimension, self.dimension):
            raise DimensionMismatch(
                f"hamiltonian produced shape {out.shape}, expected "
                f"({self.dimension}, {self.dimension})"
            )
        return out

    def jump_ops(self, theta=None):
        values = self.params.values if theta is None else _values_of(theta)
        ops = [np.asarray(j(values), dtype=complex) for j in self.jumps]
        for op in ops:
            if op.shape != (self.dimension, self.dimension):
                raise DimensionMismatch(
                    f"jump operator shape {op.shape} does not match dimension "
                    f"{self.dimension}"
                )
        return ops

    def h_eff(self, theta=None):
        """Non-Hermitian no-jump generator H - (i/2) sum_c L_c^dag L_c."""
        h = self.h(theta)
        for op in self.jump_ops(theta):
            h = h - 0.5j * (op.conj().T @ op)
        return h


@dataclass(frozen=True)
class EffectOperators:
    """First-order discrete measurement effect operators for one time step."""

    dt: float
    no_jump: np.ndarray
    jumps: tuple

    def all_ops(self):
        return (self.no_jump,) + tuple(self.jumps)


def _values_of(theta):
    if isinstance(theta, ParameterVector):
        return theta.values
    return np.asarray(theta, dtype=float)


# --- builtin models -------------------------------------------------------

def two_level(delta, omega, kappa):
    """Driven two-level atom: detuning, Rabi frequency, decay rate.

    H = delta |e><e| + (omega/2)(|e><g| + |g><e|), single jump operator
    sqrt(kappa) |g><e|.
    """
    if kappa <= 0:
        raise InvalidParameter(f"decay rate must be positive, got {kappa}")

    def hamiltonian(values):
        d, om, _ = values
        return np.array([[0.0, om / 2.0], [om / 2.0, d]], dtype=complex)

    def jump(values):
        _, _, k = values
        if k <= 0:
            raise InvalidParameter(f"decay rate must be positive, got {k}")
        return np.array([[0.0, np.sqrt(k)], [0.0, 0.0]], dtype=complex)

    params = ParameterVector(("delta", "omega", "kappa"),
                             np.array([delta, omega, kappa]))
    return ModelSpec(2, params, hamiltonian, (jump,), "steady", name="two_level")


def dephasing_qubit(theta):
    """Closed qubit precessing at a rate set by the unknown parameter.

    H = theta * sigma_z / 2 in the (|g>, |e>) basis, no dissipation,
    prepared in (|g> + |e>)/sqrt(2).  Used for the quadratic-in-time
    information scaling of decoherence-free evolution.
    """

    def hamiltonian(values):
        (t,) = values
        return np.array([[-t / 2.0, 0.0], [0.0, t / 2.0]], dtype=complex)

    params = ParameterVector(("theta",), np.array([theta]))
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    return ModelSpec(2, params, hamiltonian, (), plus, name="dephasing_qubit")


def builtin_model(name, **params):
    if name == "two_level":
        return two_level(params.get("delta", 0.0), params.get("omega", 1.0),
                         params.get("kappa", 0.5))
    if name == "dephasing_qubit":
        return dephasing_qubit(params.get("theta", 1.0))
    raise SchemaError(f"unknown builtin model {name!r}")


# --- effect operators -----------------------------------------------------

def effect_operators(m, theta, dt):
    """First-order POVM: Omega_0 = 1 - i(H - (i/2) sum L^dag L) dt,
    Omega_c = L_c sqrt(dt).

    The step must satisfy dt * (||H|| + sum ||L^dag L||) < 0.1 for the
    first-order truncation to be meaningful.
    """
    if dt <= 0:
        raise StepTooLarge(f"time step must be positive, got {dt}")
    h = m.h(theta)
    ops = m.jump_ops(theta)
    budget = np.linalg.norm(h, 2) + sum(
        np.linalg.norm(op.conj().T @ op, 2) for op in ops
    )
    if dt * budget >= 0.1:
        raise StepTooLarge(
            f"dt * (|H| + sum |L^dag L|) = {dt * budget:.3g} >= 0.1; "
            f"use dt < {0.1 / budget:.3g}"
        )
    no_jump = np.eye(m.dimension, dtype=complex) - 1j * dt * m.h_eff(theta)
    jumps = tuple(np.sqrt(dt) * op for op in ops)
    return EffectOperators(dt, no_jump, jumps)


# --- JSON model documents -------------------------------------------------

def _matrix_splits(entries, dim, param_names, where):
    """Decompose an affine entry matrix into (constant, per-parameter coeffs)."""
    if len(entries) != dim or any(len(row) != dim for row in entries):
        raise DimensionMismatch(f"{where}: expected {dim}x{dim} entry matrix")
    const = np.zeros((dim, dim), dtype=complex)
    coeffs = {name: np.zeros((dim, dim), dtype=complex) for name in param_names}
    for i, row in enumerate(entries):
        for j, entry in enumerate(row):
            if not isinstance(entry, dict) or "re" not in entry or "im" not in entry:
                raise SchemaError(f"{where}[{i}][{j}]: entry must carry 're'/'im'")
            const[i, j] = complex(entry["re"], entry["im"])
            for term in entry.get("terms", ()):
                try:
                    pname = term["param"]
                    c = complex(term["coeff_re"], term["coeff_im"])
                except (KeyError, TypeError) as exc:
                    raise SchemaError(f"{where}[{i}][{j}]: malformed term") from exc
                if pname not in param_names:
                    raise SchemaError(f"{where}[{i}][{j}]: unknown parameter {pname!r}")
                coeffs[pname] += _basis_coeff(dim, i, j, c)
    return const, coeffs


def _basis_coeff(dim, i, j, c):
    out = np.zeros((dim, dim), dtype=complex)
    out[i, j] = c
    return out


def _affine_builder(const, coeffs, param_names):
    mats = [coeffs[name] for name in param_names]

    def build(values):
        out = const.copy()
        for v, mat in zip(values, mats):
            if np.any(mat):
                out = out + v * mat
        return out

    return build


def load_model(document):
    """Build a ModelSpec from a JSON model document (dict or JSON text).

    Accepts either {"builtin": name, "params": {...}} or the full schema
    with dimension / parameters / hamiltonian / jumps / initial_state,
    where matrix entries are affine in the named parameters.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("model document must be a JSON object")

    if "builtin" in document:
        return builtin_model(document["builtin"], **document.get("params", {}))

    for key in ("dimension", "parameters", "hamiltonian", "jumps", "initial_state"):
        if key not in document:
            raise SchemaError(f"missing required field {key!r}")

    dim = document["dimension"]
    if not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"dimension must be a positive integer, got {dim!r}")

    names, defaults = [], []
    for p in document["parameters"]:
        try:
            names.append(p["name"])
            defaults.append(float(p["value"]))
        except (KeyError, TypeError) as exc:
            raise SchemaError("parameters must be [{'name', 'value'}, ...]") from exc
    params = ParameterVector(tuple(names), np.array(defaults))

    h_const, h_coeffs = _matrix_splits(document["hamiltonian"], dim, names,
                                       "hamiltonian")
    for label, mat in [("constant part", h_const)] + [
        (f"coefficient of {n!r}", h_coeffs[n]) for n in names
    ]:
        if not is_hermitian(mat):
            raise NonHermitianHamiltonian(f"hamiltonian {label} is not Hermitian")
    hamiltonian = _affine_builder(h_const, h_coeffs, names)

    jumps = []
    for k, entries in enumerate(document["jumps"]):
        j_const, j_coeffs = _matrix_splits(entries, dim, names, f"jumps[{k}]")
        jumps.append(_affine_builder(j_const, j_coeffs, names))

    initial = _parse_initial_state(document["initial_state"], dim)
    return ModelSpec(dim, params, hamiltonian, tuple(jumps), initial,
                     name=document.get("name", "custom"), document=document)


def _parse_initial_state(spec, dim):
    if spec == "steady":
        return "steady"
    if isinstance(spec, dict) and "pure" in spec:
        vec = np.array([complex(e["re"], e["im"]) for e in spec["pure"]])
        if vec.shape != (dim,):
            raise DimensionMismatch(f"pure state length {len(vec)} != {dim}")
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise SchemaError("pure initial state must be nonzero")
        return vec / norm
    if isinstance(spec, dict) and "density" in spec:
        rows = spec["density"]
        mat = np.array([[complex(e["re"], e["im"]) for e in row] for row in rows])
        if mat.shape != (dim, dim):
            raise DimensionMismatch(f"density matrix shape {mat.shape} != ({dim},{dim})")
        if not is_hermitian(mat, 1e-10):
            raise SchemaError("density initial state must be Hermitian")
        return mat / np.trace(mat).real
    raise SchemaError(
        "initial_state must be 'steady', {'pure': [...]} or {'density': [[...]]}"
    )


def save_model(m, theta=None):
    """Serialize a ModelSpec to the JSON document schema.

    Config-loaded models round-trip exactly (the original document is
    reproduced).  For builders with non-affine parameter dependence (the
    sqrt(kappa) jump of the two-level atom) the operators are frozen at
    the current parameter values.
    """
    if m.document is not None:
        return json.loads(json.dumps(m.document))

    values = m.params.values if theta is None else _values_of(theta)

    def entries(mat):
        return [[{"re": float(v.real), "im": float(v.imag)} for v in row]
                for row in np.asarray(mat, dtype=complex)]

    if isinstance(m.initial_state, str):
        initial = m.initial_state
    elif np.ndim(m.initial_state) == 1:
        initial = {"pure": [{"re": float(v.real), "im": float(v.imag)}
                            for v in m.initial_state]}
    else:
        initial = {"density": entries(m.initial_state)}

    return {
        "name": m.name,
        "dimension": m.dimension,
        "parameters": [{"name": n, "value": float(v)}
                       for n, v in zip(m.params.names, values)],
        "hamiltonian": entries(m.hamiltonian(values)),
        "jumps": [entries(j(values)) for j in m.jumps],
        "initial_state": initial,
    }

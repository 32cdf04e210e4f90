"""Statevector simulation of parameterized circuits over hybrid DOFs.

States are stored as flat complex amplitude vectors over the ordered DOF
list (first DOF = slowest index, matching Kronecker order in
:func:`vbse.operators.build_dense`).  Gates are one-parameter unitary
families exp(theta * G) with anti-Hermitian product-term generators G; each
gate's dense generator on its support is eigendecomposed once and cached, so
re-evaluating the circuit at new parameters costs only small matrix products.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import (
    ContractViolationError,
    HermiticityError,
    StateCorruptionError,
)
from .operators import (
    DegreeOfFreedom,
    ProductTerm,
    SumOfProducts,
    apply_term_to_tensor,
)

NORM_TOL = 1e-10


@dataclass(frozen=True)
class HybridState:
    """A normalized pure state over an ordered list of DOFs."""

    dofs: Tuple[DegreeOfFreedom, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dofs", tuple(self.dofs))
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        expected = int(np.prod([d.dim for d in self.dofs], dtype=np.int64))
        if amps.size != expected:
            raise ContractViolationError(
                f"amplitude length {amps.size} does not match DOF dims (need {expected})"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateCorruptionError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dims(self) -> List[int]:
        return [d.dim for d in self.dofs]

    @property
    def labels(self) -> List[str]:
        return [d.label for d in self.dofs]

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def dof_axis(self, label: str) -> int:
        for i, d in enumerate(self.dofs):
            if d.label == label:
                return i
        raise ContractViolationError(f"no DOF labelled {label!r}")

    def to_json_dict(self) -> dict:
        inter = np.empty(2 * self.amplitudes.size)
        inter[0::2] = self.amplitudes.real
        inter[1::2] = self.amplitudes.imag
        return {
            "dofs": [{"label": d.label, "kind": d.kind, "dim": d.dim} for d in self.dofs],
            "amplitudes": inter.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "HybridState":
        dofs = tuple(DegreeOfFreedom(d["label"], d["kind"], int(d["dim"])) for d in data["dofs"])
        inter = np.asarray(data["amplitudes"], dtype=float)
        return cls(dofs, inter[0::2] + 1j * inter[1::2])


def product_state(dofs: Sequence[DegreeOfFreedom],
                  local_vectors: Sequence[np.ndarray]) -> HybridState:
    """Tensor product of one normalized local vector per DOF (declared order)."""
    if len(local_vectors) != len(dofs):
        raise ContractViolationError("need exactly one local vector per DOF")
    amps = np.array([1.0], dtype=complex)
    for d, v in zip(dofs, local_vectors):
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.size != d.dim:
            raise ContractViolationError(f"local vector for {d.label!r} has wrong length")
        amps = np.kron(amps, v)
    amps = amps / np.linalg.norm(amps)
    return HybridState(tuple(dofs), amps)


def basis_state(dofs: Sequence[DegreeOfFreedom], indices: Sequence[int]) -> HybridState:
    """Computational basis state |i_1 i_2 ...> over the DOF list."""
    vecs = []
    for d, i in zip(dofs, indices):
        v = np.zeros(d.dim)
        v[i] = 1.0
        vecs.append(v)
    return product_state(dofs, vecs)


# ---------------------------------------------------------------------------
# parameterized circuits

@dataclass(frozen=True)
class Gate:
    """One circuit gate exp(theta[param_index] * generator)."""

    generator: ProductTerm
    param_index: int


@dataclass
class AnsatzCircuit:
    """An ordered gate list applied to a fixed reference state.

    state(theta) applies gates in list order (first gate acts first).
    Distinct gates may share a parameter index (hardware-style parameter
    tying); the parameter count is max index + 1.
    """

    reference: HybridState
    gates: Tuple[Gate, ...]
    _applied: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.gates = tuple(self.gates)
        labels = self.reference.labels
        dims = self.reference.dims
        for g in self.gates:
            if g.param_index < 0:
                raise ContractViolationError("parameter indices must be nonnegative")
            for f in g.generator.factors:
                if f.dof_label not in labels:
                    raise ContractViolationError(
                        f"gate generator acts on unknown DOF {f.dof_label!r}"
                    )
                if f.matrix.shape != (dims[labels.index(f.dof_label)],) * 2:
                    raise ContractViolationError(
                        f"gate factor on {f.dof_label!r} has shape {f.matrix.shape}"
                    )
        self._applied = [self._prepare(g) for g in self.gates]

    @property
    def n_params(self) -> int:
        return max((g.param_index for g in self.gates), default=-1) + 1

    def _prepare(self, gate: Gate):
        """Dense generator on its support axes, factored as i*V diag(lam) V+."""
        labels = self.reference.labels
        dims = self.reference.dims
        order = sorted(range(len(gate.generator.factors)),
                       key=lambda i: labels.index(gate.generator.factors[i].dof_label))
        axes = [labels.index(gate.generator.factors[i].dof_label) for i in order]
        dense = np.array([[gate.generator.coefficient]], dtype=complex)
        for i in order:
            dense = np.kron(dense, gate.generator.factors[i].matrix)
        scale = max(float(np.max(np.abs(dense))), 1.0)
        if float(np.max(np.abs(dense + dense.conj().T))) > 1e-12 * scale:
            raise ContractViolationError("gate generator is not anti-Hermitian")
        lam, vecs = np.linalg.eigh(-1j * dense)  # G = i * h, h Hermitian
        sub_dims = [dims[a] for a in axes]
        return axes, sub_dims, lam, vecs


def _apply_on_axes(tensor: np.ndarray, u: np.ndarray, axes: List[int],
                   sub_dims: List[int]) -> np.ndarray:
    if not axes:
        return u[0, 0] * tensor
    k = len(axes)
    u_t = u.reshape(sub_dims + sub_dims)
    out = np.tensordot(u_t, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _run_gates(circ: AnsatzCircuit, theta: np.ndarray, start: int,
               tensor: np.ndarray) -> np.ndarray:
    for g, prep in zip(circ.gates[start:], circ._applied[start:]):
        axes, sub_dims, lam, vecs = prep
        u = (vecs * np.exp(1j * theta[g.param_index] * lam)) @ vecs.conj().T
        tensor = _apply_on_axes(tensor, u, axes, sub_dims)
    return tensor


def evaluate_state(circ: AnsatzCircuit, theta: Sequence[float]) -> HybridState:
    """Apply the circuit at parameters theta to the reference state."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circ.n_params,):
        raise ContractViolationError(
            f"theta has length {theta.size}, circuit has {circ.n_params} parameters"
        )
    tensor = _run_gates(circ, theta, 0, circ.reference.tensor())
    return HybridState(circ.reference.dofs, tensor.reshape(-1))


def state_jacobian(circ: AnsatzCircuit, theta: Sequence[float]) -> List[np.ndarray]:
    """Analytic derivatives d|phi>/d theta_k as flat complex vectors.

    Each gate contributes (gates after and incl. itself) G_k (gates before)
    |phi0>; gates tied to the same parameter index have their contributions
    summed.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circ.n_params,):
        raise ContractViolationError("theta length mismatch")
    dim = circ.reference.amplitudes.size
    derivs = [np.zeros(dim, dtype=complex) for _ in range(circ.n_params)]
    tensor = circ.reference.tensor()
    for i, g in enumerate(circ.gates):
        # insert G_i before gate i, then run the remaining gates
        branch = apply_term_to_tensor(g.generator, circ.reference.dofs, tensor)
        branch = _run_gates(circ, theta, i, branch)
        derivs[g.param_index] = derivs[g.param_index] + branch.reshape(-1)
        # advance the base state through gate i
        axes, sub_dims, lam, vecs = circ._applied[i]
        u = (vecs * np.exp(1j * theta[g.param_index] * lam)) @ vecs.conj().T
        tensor = _apply_on_axes(tensor, u, axes, sub_dims)
    return derivs


# ---------------------------------------------------------------------------
# expectations and reductions

def expectation(state: HybridState, h: SumOfProducts) -> float:
    """Real expectation <phi|H|phi>; rejects non-negligible imaginary parts."""
    if [d.dim for d in h.dofs] != state.dims:
        raise ContractViolationError("state and operator dimensions differ")
    tensor = state.tensor()
    val = 0.0 + 0.0j
    for t in h.terms:
        val += np.vdot(tensor, apply_term_to_tensor(t, h.dofs, tensor))
    if abs(val.imag) >= 1e-8:
        raise HermiticityError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def reduced_density_matrix(state: HybridState, dof_label: str) -> np.ndarray:
    """rho_ab = sum_rest phi[a, rest] conj(phi[b, rest]) for one DOF."""
    axis = state.dof_axis(dof_label)
    d = state.dims[axis]
    a = np.moveaxis(state.tensor(), axis, 0).reshape(d, -1)
    rho = a @ a.conj().T
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise StateCorruptionError("reduced density matrix trace deviates from 1")
    return rho


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Singular values (descending) and von Neumann entropy of a bipartition."""

    singular_values: np.ndarray
    entropy: float


def schmidt_spectrum(state: HybridState, cut: Iterable[str]) -> SchmidtSpectrum:
    """Schmidt decomposition between the DOFs in `cut` and the rest."""
    cut = list(cut)
    labels = state.labels
    if not cut or set(cut) == set(labels):
        raise ContractViolationError("cut must be a nonempty proper subset of DOF labels")
    axes = [state.dof_axis(lbl) for lbl in cut]
    d_cut = int(np.prod([state.dims[a] for a in axes]))
    rest = [a for a in range(len(labels)) if a not in axes]
    mat = np.transpose(state.tensor(), axes + rest).reshape(d_cut, -1)
    s = np.linalg.svd(mat, compute_uv=False)
    total = float(np.sum(s ** 2))
    if abs(total - 1.0) > 1e-10:
        raise StateCorruptionError(f"Schmidt weights sum to {total!r}")
    p = s ** 2
    nz = p > 1e-300
    entropy = float(-np.sum(p[nz] * np.log(p[nz])))
    return SchmidtSpectrum(np.sort(s)[::-1], entropy)


# ---------------------------------------------------------------------------
# shot-sampled expectations

_EIG_CACHE: Dict[bytes, tuple] = {}
_EIG_CACHE_CAP = 4096


def _term_key(term: ProductTerm, dims: Sequence[int]) -> bytes:
    hasher = hashlib.sha256()
    hasher.update(np.complex128(term.coefficient).tobytes())
    hasher.update(repr(list(dims)).encode())
    for f in sorted(term.factors, key=lambda f: f.dof_label):
        hasher.update(f.dof_label.encode())
        hasher.update(np.ascontiguousarray(f.matrix).tobytes())
    return hasher.digest()


def sampled_expectation(state: HybridState, h: SumOfProducts, shots: int,
                        seed: int) -> Tuple[float, float]:
    """Per-term eigenbasis sampling with `shots` draws per term.

    Returns (mean, stderr).  Terms are diagonalized once and cached; the
    estimate is deterministic given the seed and converges to
    :func:`expectation` as shots grows.
    """
    if shots < 1:
        raise ContractViolationError("shots must be >= 1")
    if [d.dim for d in h.dofs] != state.dims:
        raise ContractViolationError("state and operator dimensions differ")
    rng = np.random.default_rng(seed)
    labels = state.labels
    tensor = state.tensor()
    mean = 0.0
    var_sum = 0.0
    for t in h.terms:
        if not t.factors:
            if abs(t.coefficient.imag) > 1e-12:
                raise HermiticityError("constant term has imaginary coefficient")
            mean += t.coefficient.real
            continue
        key = _term_key(t, state.dims)
        if key not in _EIG_CACHE:
            order = sorted(range(len(t.factors)),
                           key=lambda i: labels.index(t.factors[i].dof_label))
            axes = [labels.index(t.factors[i].dof_label) for i in order]
            dense = np.array([[t.coefficient]], dtype=complex)
            for i in order:
                dense = np.kron(dense, t.factors[i].matrix)
            scale = max(float(np.max(np.abs(dense))), 1.0)
            if float(np.max(np.abs(dense - dense.conj().T))) > 1e-8 * scale:
                raise HermiticityError("term operator is not Hermitian; cannot sample")
            lam, vecs = np.linalg.eigh(dense)
            if len(_EIG_CACHE) >= _EIG_CACHE_CAP:
                _EIG_CACHE.clear()
            _EIG_CACHE[key] = (axes, lam, vecs)
        axes, lam, vecs = _EIG_CACHE[key]
        rest = [a for a in range(len(labels)) if a not in axes]
        mat = np.transpose(tensor, axes + rest).reshape(lam.size, -1)
        probs = np.sum(np.abs(vecs.conj().T @ mat) ** 2, axis=1)
        probs = np.clip(probs.real, 0.0, None)
        probs /= probs.sum()
        draws = rng.choice(lam.size, size=shots, p=probs)
        samples = lam[draws]
        mean += float(np.mean(samples))
        var_sum += float(np.var(samples)) / shots
    return mean, float(np.sqrt(var_sum))

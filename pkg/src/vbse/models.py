"""Model builders, ansatz factories, and brute-force reference solvers.

Holstein chains/rings use the single-excitation electron sector (site basis
of size n_sites) because every operator and ansatz generator used here
conserves electron number.  Spin-boson models couple one spin to a
collection of truncated harmonic modes, optionally discretized from a
sub-Ohmic spectral density.

The exact solvers at the bottom (`exact_ground_state`, `exact_propagate`)
are oracles for validating the variational machinery; they work directly in
the full truncated product space up to the 2^22 dimension cap and can cache
results on disk (``VBSE_CACHE_DIR``).
"""

from __future__ import annotations

import hashlib
import itertools
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh, expm_multiply
from scipy.special import gamma as gamma_function
from scipy.special import gammaincinv

from .circuits import AnsatzCircuit, Gate, HybridState, expectation, product_state
from .encoder import BasisEncoder, EncoderSet, encode_state_vector, encoded_dofs
from .errors import ContractViolationError, ConvergenceError, ResourceLimitError
from .operators import (
    DegreeOfFreedom,
    LocalOperator,
    ProductTerm,
    SumOfProducts,
    apply_sum_to_vector,
    boson_annihilation,
    build_dense,
    content_hash,
    pauli,
    pauli_string,
    product_term,
    sop_trace,
)

EXACT_DIM_CAP = 2 ** 22
DENSE_EIG_CUTOFF = 2048


# ---------------------------------------------------------------------------
# model parameter records

@dataclass(frozen=True)
class HolsteinParams:
    """1-D Holstein chain: hopping V, phonon frequency omega, coupling g."""

    n_sites: int
    v_hop: float
    omega: float
    g: float
    n_levels: int
    periodic: bool = True

    def __post_init__(self):
        if self.n_sites < 2:
            raise ContractViolationError("Holstein model needs at least 2 sites")
        if self.n_levels < 2:
            raise ContractViolationError("phonon truncation needs at least 2 levels")
        if self.omega <= 0:
            raise ContractViolationError("phonon frequency must be positive")


@dataclass(frozen=True)
class SpinBosonParams:
    """Two-level system with bias epsilon and tunneling delta, linearly
    coupled to harmonic modes (omega_j, g_j); c_j = g_j * omega_j."""

    epsilon: float
    delta: float
    modes: Tuple[Tuple[float, float], ...]
    n_levels: int

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple((float(w), float(g)) for w, g in self.modes))
        if self.n_levels < 2:
            raise ContractViolationError("phonon truncation needs at least 2 levels")
        for w, _ in self.modes:
            if w <= 0:
                raise ContractViolationError("mode frequencies must be positive")


@dataclass(frozen=True)
class SpectralDensity:
    """J(omega) = (pi/2) alpha omega^s omega_c^{1-s} exp(-omega/omega_c)."""

    alpha: float
    s: float
    omega_c: float

    def __post_init__(self):
        if self.alpha <= 0 or self.omega_c <= 0 or self.s <= 0:
            raise ContractViolationError("spectral density needs alpha, s, omega_c > 0")

    def value(self, omega):
        omega = np.asarray(omega, dtype=float)
        return (np.pi / 2) * self.alpha * omega ** self.s \
            * self.omega_c ** (1 - self.s) * np.exp(-omega / self.omega_c)


# ---------------------------------------------------------------------------
# Hamiltonian builders

def holstein_bonds(p: HolsteinParams) -> List[Tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(p.n_sites - 1)]
    if p.periodic and p.n_sites > 2:
        bonds.append((p.n_sites - 1, 0))
    return bonds


def build_holstein(p: HolsteinParams) -> SumOfProducts:
    """H = -V sum_<ij> (a+_i a_j + h.c.) + sum_i omega b+b
          + sum_i g omega a+_i a_i (b+ + b)."""
    dofs = [DegreeOfFreedom("el", "electron_site", p.n_sites)]
    dofs += [DegreeOfFreedom(f"ph{i}", "phonon", p.n_levels) for i in range(p.n_sites)]
    b = boson_annihilation(p.n_levels)
    number = b.conj().T @ b
    displace = b + b.conj().T
    terms = []
    for i, j in holstein_bonds(p):
        hop = np.zeros((p.n_sites, p.n_sites), dtype=complex)
        hop[i, j] = hop[j, i] = 1.0
        terms.append(product_term(-p.v_hop, {"el": hop}))
    for i in range(p.n_sites):
        terms.append(product_term(p.omega, {f"ph{i}": number}))
    for i in range(p.n_sites):
        occ = np.zeros((p.n_sites, p.n_sites), dtype=complex)
        occ[i, i] = 1.0
        terms.append(product_term(p.g * p.omega, {"el": occ, f"ph{i}": displace}))
    return SumOfProducts(tuple(dofs), tuple(terms))


def build_spin_boson(p: SpinBosonParams) -> SumOfProducts:
    """H = (eps/2) sz + delta sx + sum_j g_j w_j sz (b+ + b) + sum_j w_j b+b."""
    dofs = [DegreeOfFreedom("spin", "spin", 2)]
    dofs += [DegreeOfFreedom(f"mode{j}", "phonon", p.n_levels) for j in range(len(p.modes))]
    b = boson_annihilation(p.n_levels)
    number = b.conj().T @ b
    displace = b + b.conj().T
    terms = [
        product_term(p.epsilon / 2, {"spin": pauli("Z")}),
        product_term(p.delta, {"spin": pauli("X")}),
    ]
    for j, (w, g) in enumerate(p.modes):
        terms.append(product_term(g * w, {"spin": pauli("Z"), f"mode{j}": displace}))
        terms.append(product_term(w, {f"mode{j}": number}))
    return SumOfProducts(tuple(dofs), tuple(terms))


def discretize_sub_ohmic(sd: SpectralDensity, n_modes: int) -> List[Tuple[float, float]]:
    """Equal-weight quantile discretization of J(omega)/omega.

    Mode j sits at the (j - 1/2)/n quantile of J(omega)/omega, whose total
    weight is W = (pi/2) alpha Gamma(s) omega_c; the couplings satisfy
    c_j^2 = (2/pi) omega_j W / n with g_j = c_j / omega_j, so the
    reorganization-energy sum rule sum_j c_j^2/omega_j = (2/pi) W holds
    exactly by construction.
    """
    if n_modes < 1:
        raise ContractViolationError("need at least one mode")
    weight = (np.pi / 2) * sd.alpha * gamma_function(sd.s) * sd.omega_c
    quantiles = (np.arange(1, n_modes + 1) - 0.5) / n_modes
    omegas = sd.omega_c * gammaincinv(sd.s, quantiles)
    if not np.all(np.isfinite(omegas)) or not np.all(np.diff(omegas) > 0):
        raise ConvergenceError("spectral-density quantile inversion failed")
    c_sq = (2 / np.pi) * omegas * weight / n_modes
    g = np.sqrt(c_sq) / omegas
    return [(float(w), float(gj)) for w, gj in zip(omegas, g)]


def spin_z_observable(h: SumOfProducts) -> SumOfProducts:
    """sigma_z on the spin DOF, over the same DOF list as `h`."""
    return SumOfProducts(h.dofs, (product_term(1.0, {"spin": pauli("Z")}),))


# ---------------------------------------------------------------------------
# ansatz factories

def electron_uniform(n_sites: int) -> np.ndarray:
    return np.full(n_sites, 1.0 / np.sqrt(n_sites), dtype=complex)


def _hopping_generator(n_sites: int, i: int, j: int) -> np.ndarray:
    # a+_i a_j - a+_j a_i restricted to the single-excitation sector
    g = np.zeros((n_sites, n_sites), dtype=complex)
    g[i, j] = 1.0
    g[j, i] = -1.0
    return g


def holstein_ansatz(p: HolsteinParams, n_layers: int, encs: EncoderSet) -> AnsatzCircuit:
    """Layered hopping + encoded-displacement ansatz for the Holstein model.

    Each layer applies one Givens-rotation gate per bond and one gate per
    site with generator a+_i a_i (x) C (b+ - b) C+ expressed on the encoded
    register.  The reference state is the uniform electron superposition
    (the g = 0 ground state) times each mode's encoded vacuum.
    """
    h = build_holstein(p)
    dofs = encoded_dofs(h, encs)
    b = boson_annihilation(p.n_levels)
    anti_displace = b.conj().T - b
    vacuum = np.zeros(p.n_levels)
    vacuum[0] = 1.0

    locals_ = [electron_uniform(p.n_sites)]
    for i in range(p.n_sites):
        enc = encs.get(f"ph{i}")
        if enc is None:
            locals_.append(vacuum)
        else:
            locals_.append(encode_state_vector(enc, vacuum))
    reference = product_state(dofs, locals_)

    gates = []
    k = 0
    for _ in range(n_layers):
        for i, j in holstein_bonds(p):
            gates.append(Gate(product_term(1.0, {"el": _hopping_generator(p.n_sites, i, j)}), k))
            k += 1
        for i in range(p.n_sites):
            enc = encs.get(f"ph{i}")
            mat = anti_displace if enc is None else enc.c.conj().T @ anti_displace @ enc.c
            occ = np.zeros((p.n_sites, p.n_sites), dtype=complex)
            occ[i, i] = 1.0
            gates.append(Gate(product_term(1.0, {"el": occ, f"ph{i}": mat}), k))
            k += 1
    return AnsatzCircuit(reference, tuple(gates))


def vha_ansatz(h_encoded: SumOfProducts, n_layers: int,
               reference: Optional[HybridState] = None,
               pool_labels: Optional[Sequence[str]] = None) -> AnsatzCircuit:
    """Variational-Hamiltonian ansatz on an already-encoded operator.

    Per layer: one gate exp(-i theta h_x) per Hamiltonian term, then the
    full Pauli-string pool on each encoded phonon register.  Generators are
    frozen at construction, so the circuit stays valid when encoders evolve.
    """
    if pool_labels is None:
        pool_labels = [d.label for d in h_encoded.dofs if d.kind == "phonon"]
    pools = []
    for label in pool_labels:
        dim = h_encoded.dof(label).dim
        nq = int(np.round(np.log2(dim)))
        if 2 ** nq != dim:
            raise ContractViolationError(
                f"pool DOF {label!r} has dim {dim}, not a power of two"
            )
        strings = ["".join(s) for s in itertools.product("IXYZ", repeat=nq)]
        pools.append((label, [pauli_string(s) for s in strings]))
    if reference is None:
        reference = product_state(
            h_encoded.dofs,
            [np.eye(d.dim, 1).ravel() for d in h_encoded.dofs],
        )
    gates = []
    k = 0
    for _ in range(n_layers):
        for t in h_encoded.terms:
            gates.append(Gate(ProductTerm(-1j * t.coefficient, t.factors), k))
            k += 1
        for label, mats in pools:
            for mat in mats:
                gates.append(Gate(product_term(-1j, {label: mat}), k))
                k += 1
    return AnsatzCircuit(reference, tuple(gates))


# ---------------------------------------------------------------------------
# exact reference solvers

_GROUND_CACHE: Dict[str, Tuple[float, np.ndarray]] = {}
_DENSE_EIG_CACHE: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}


def _cache_dir() -> Optional[Path]:
    path = os.environ.get("VBSE_CACHE_DIR")
    if not path:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _check_dim(h: SumOfProducts) -> int:
    dim = h.total_dim
    if dim > EXACT_DIM_CAP:
        raise ResourceLimitError(
            f"exact solve of dimension {dim} exceeds the cap {EXACT_DIM_CAP}"
        )
    return dim


def _default_start_vector(h: SumOfProducts) -> np.ndarray:
    """Deterministic Lanczos start: structured product state + fixed noise."""
    locals_ = []
    for d in h.dofs:
        if d.kind == "electron_site":
            locals_.append(np.full(d.dim, 1.0 / np.sqrt(d.dim)))
        else:
            locals_.append(np.eye(d.dim, 1).ravel())
    v = np.array([1.0])
    for loc in locals_:
        v = np.kron(v, loc)
    rng = np.random.default_rng(987654321)
    v = v + 1e-2 * rng.standard_normal(v.size)
    return v / np.linalg.norm(v)


def exact_ground_state(h: SumOfProducts) -> Tuple[float, HybridState]:
    """Lowest eigenpair of the full truncated Hamiltonian.

    Dense diagonalization below 2048 dimensions, Lanczos above; the
    eigenpair residual is verified to 1e-8.  Results are cached in memory
    and, when VBSE_CACHE_DIR is set, on disk.
    """
    dim = _check_dim(h)
    key = content_hash(h)
    if key in _GROUND_CACHE:
        energy, amps = _GROUND_CACHE[key]
        return energy, HybridState(h.dofs, amps)
    cache = _cache_dir()
    disk = cache / f"ground-{key[:24]}.npz" if cache else None
    if disk is not None and disk.exists():
        data = np.load(disk)
        energy, amps = float(data["energy"]), data["amplitudes"]
        _GROUND_CACHE[key] = (energy, amps)
        return energy, HybridState(h.dofs, amps)

    if dim <= DENSE_EIG_CUTOFF:
        dense = build_dense(h)
        vals, vecs = np.linalg.eigh(dense)
        energy, vec = float(vals[0]), vecs[:, 0]
    else:
        op = LinearOperator((dim, dim), matvec=lambda v: apply_sum_to_vector(h, v),
                            dtype=complex)
        vals, vecs = eigsh(op, k=1, which="SA", v0=_default_start_vector(h), tol=0)
        energy, vec = float(vals[0]), vecs[:, 0]
    residual = np.linalg.norm(apply_sum_to_vector(h, vec) - energy * vec)
    if residual > 1e-8:
        raise ConvergenceError(f"eigenpair residual {residual:.3e} exceeds 1e-8")
    # deterministic global phase: largest-magnitude entry real positive
    pivot = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[pivot]) / vec[pivot])
    _GROUND_CACHE[key] = (energy, vec)
    if disk is not None:
        np.savez_compressed(disk, energy=energy, amplitudes=vec)
    return energy, HybridState(h.dofs, vec)


def _dense_eig(h: SumOfProducts):
    key = content_hash(h)
    if key not in _DENSE_EIG_CACHE:
        dense = build_dense(h)
        if float(np.max(np.abs(dense - dense.conj().T))) > 1e-10:
            raise ContractViolationError("exact propagation needs a Hermitian operator")
        _DENSE_EIG_CACHE[key] = np.linalg.eigh(dense)
    return _DENSE_EIG_CACHE[key]


def exact_propagate(h: SumOfProducts, psi0: HybridState, t: float,
                    method: Optional[str] = None) -> HybridState:
    """e^{-iHt} |psi0> by eigendecomposition (small) or Krylov (large)."""
    dim = _check_dim(h)
    if [d.dim for d in h.dofs] != psi0.dims:
        raise ContractViolationError("state and Hamiltonian dimensions differ")
    if method is None:
        method = "eig" if dim <= DENSE_EIG_CUTOFF else "krylov"
    if method == "eig":
        vals, vecs = _dense_eig(h)
        amps = (vecs * np.exp(-1j * vals * t)) @ (vecs.conj().T @ psi0.amplitudes)
    elif method == "krylov":
        op = LinearOperator((dim, dim),
                            matvec=lambda v: -1j * apply_sum_to_vector(h, v),
                            dtype=complex)
        amps = expm_multiply(op * t, psi0.amplitudes.astype(complex),
                             traceA=-1j * sop_trace(h) * t)
    else:
        raise ContractViolationError(f"unknown propagation method {method!r}")
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > 1e-9:
        raise ConvergenceError(f"propagation norm drifted to {norm!r}")
    return HybridState(psi0.dofs, amps / norm)


def exact_trajectory(h: SumOfProducts, psi0: HybridState, times: Sequence[float],
                     observables: Dict[str, SumOfProducts]) -> Dict[str, np.ndarray]:
    """Observable expectations along e^{-iHt}|psi0> at the given times.

    Cached on disk (keyed by Hamiltonian, state, grid, and observables) when
    VBSE_CACHE_DIR is set, since the large-dimension runs are the slow part
    of every dynamics validation.
    """
    times = np.asarray(times, dtype=float)
    dim = _check_dim(h)
    hasher = hashlib.sha256()
    hasher.update(content_hash(h).encode())
    hasher.update(np.ascontiguousarray(psi0.amplitudes).tobytes())
    hasher.update(np.ascontiguousarray(times).tobytes())
    for name in sorted(observables):
        hasher.update(name.encode())
        hasher.update(content_hash(observables[name]).encode())
    cache = _cache_dir()
    disk = cache / f"traj-{hasher.hexdigest()[:24]}.npz" if cache else None
    if disk is not None and disk.exists():
        data = np.load(disk)
        return {name: data[name] for name in observables}

    out = {name: np.empty(times.size) for name in observables}
    if dim <= DENSE_EIG_CUTOFF:
        for i, t in enumerate(times):
            state = exact_propagate(h, psi0, float(t), method="eig")
            for name, obs in observables.items():
                out[name][i] = expectation(state, obs)
    else:
        op = LinearOperator((dim, dim),
                            matvec=lambda v: -1j * apply_sum_to_vector(h, v),
                            dtype=complex)
        if times.size == 1:
            state = exact_propagate(h, psi0, float(times[0]), method="krylov")
            states = state.amplitudes[np.newaxis, :]
        else:
            dt = np.diff(times)
            if np.max(np.abs(dt - dt[0])) > 1e-12:
                raise ContractViolationError("Krylov trajectory needs a uniform time grid")
            states = expm_multiply(op, psi0.amplitudes.astype(complex),
                                   start=float(times[0]), stop=float(times[-1]),
                                   num=times.size, endpoint=True,
                                   traceA=-1j * sop_trace(h))
        for i in range(times.size):
            vec = states[i]
            vec = vec / np.linalg.norm(vec)
            state = HybridState(psi0.dofs, vec)
            for name, obs in observables.items():
                out[name][i] = expectation(state, obs)
    if disk is not None:
        np.savez_compressed(disk, **out)
    return out

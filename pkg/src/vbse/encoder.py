"""Variational basis-state encoders and their update equations.

An encoder for a truncated N-level mode is an isometry C (N x 2^nq, with
C+C = I) selecting a 2^nq-dimensional adaptive subspace that the qubits
represent.  This module provides:

* encoded and half-encoded operators (conjugation by C on one or all modes),
* the measurement tables J and the gradient matrix G = dE/dC* built from
  them, so that re-solving for C needs no new state contractions,
* the stationary-encoder equation (1 - C C+) G = 0 and its derivative-free
  root solve with three initial guesses,
* the encoder equation of motion dC/dt = -i (1 - C C+) G rho^{-1} used
  during time evolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .circuits import HybridState, reduced_density_matrix
from .errors import (
    CapacityError,
    ContractViolationError,
    ConvergenceError,
    StateCorruptionError,
)
from .numerics import qr_orthonormalize, solve_nonlinear
from .operators import (
    DegreeOfFreedom,
    LocalOperator,
    ProductTerm,
    SumOfProducts,
)

ORTHO_TOL = 1e-10
RESIDUAL_TOL = 1e-8
RHO_REGULARIZATION = 1e-5
GUESS_NOISE_SCALE = 0.1


@dataclass(frozen=True)
class BasisEncoder:
    """Isometry from 2^n_qubits qubit basis states into an N-level mode.

    Column n of ``c`` holds the physical-space coefficients of the mode
    state represented by qubit basis state |n>.
    """

    dof_label: str
    n_levels: int
    n_qubits: int
    c: np.ndarray

    def __post_init__(self):
        d = 2 ** self.n_qubits
        if self.n_levels < d:
            raise CapacityError(
                f"{self.n_qubits} qubits need at least {d} levels, got {self.n_levels}"
            )
        c = np.asarray(self.c, dtype=complex)
        if c.shape != (self.n_levels, d):
            raise ContractViolationError(
                f"encoder matrix shape {c.shape}, expected {(self.n_levels, d)}"
            )
        defect = float(np.max(np.abs(c.conj().T @ c - np.eye(d))))
        if defect > ORTHO_TOL:
            raise ContractViolationError(
                f"encoder columns not orthonormal (defect {defect:.3e})"
            )
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def encoded_dim(self) -> int:
        return 2 ** self.n_qubits

    def to_json_dict(self) -> dict:
        return {
            "label": self.dof_label,
            "n_levels": self.n_levels,
            "n_qubits": self.n_qubits,
            "c_real": self.c.real.tolist(),
            "c_imag": self.c.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "BasisEncoder":
        c = np.asarray(data["c_real"], dtype=float) + 1j * np.asarray(data["c_imag"], dtype=float)
        return cls(data["label"], int(data["n_levels"]), int(data["n_qubits"]), c)


def identity_encoder(dof: DegreeOfFreedom, n_qubits: int) -> BasisEncoder:
    """The first 2^n_qubits levels, unmixed: C_mn = delta_mn."""
    d = 2 ** n_qubits
    if dof.dim < d:
        raise CapacityError(f"DOF {dof.label!r} has {dof.dim} levels < {d} encoded states")
    return BasisEncoder(dof.label, dof.dim, n_qubits, np.eye(dof.dim, d, dtype=complex))


def projector(enc: BasisEncoder) -> np.ndarray:
    """P = C C+, the projector onto the encoded subspace (rank 2^n_qubits)."""
    return enc.c @ enc.c.conj().T


@dataclass(frozen=True)
class EncoderSet:
    """Per-mode encoders; modes without an entry are left untransformed."""

    encoders: Dict[str, BasisEncoder]

    def __post_init__(self):
        object.__setattr__(self, "encoders", dict(self.encoders))

    def get(self, label: str) -> Optional[BasisEncoder]:
        return self.encoders.get(label)

    def require(self, label: str) -> BasisEncoder:
        enc = self.encoders.get(label)
        if enc is None:
            raise ContractViolationError(f"mode {label!r} has no encoder")
        return enc

    def with_encoder(self, label: str, enc: BasisEncoder) -> "EncoderSet":
        new = dict(self.encoders)
        new[label] = enc
        return EncoderSet(new)

    @property
    def labels(self) -> List[str]:
        return list(self.encoders)


def _check_encoders_against(h: SumOfProducts, encs: EncoderSet) -> None:
    for label, enc in encs.encoders.items():
        dof = h.dof(label)
        if dof.kind != "phonon":
            raise ContractViolationError(f"encoder attached to non-phonon DOF {label!r}")
        if enc.n_levels != dof.dim:
            raise ContractViolationError(
                f"encoder for {label!r} has {enc.n_levels} levels, DOF dim is {dof.dim}"
            )


def encoded_dofs(h: SumOfProducts, encs: EncoderSet) -> Tuple[DegreeOfFreedom, ...]:
    """DOF list after encoding: each encoded mode shrinks to 2^n_qubits."""
    out = []
    for d in h.dofs:
        enc = encs.get(d.label)
        out.append(d if enc is None else DegreeOfFreedom(d.label, d.kind, enc.encoded_dim))
    return tuple(out)


def encode_local_operator(op: LocalOperator, enc: BasisEncoder) -> np.ndarray:
    """C+ h C: the operator as seen by the encoded qubit register."""
    if op.matrix.shape != (enc.n_levels, enc.n_levels):
        raise ContractViolationError(
            f"operator shape {op.matrix.shape} does not match {enc.n_levels} levels"
        )
    return enc.c.conj().T @ op.matrix @ enc.c


def encode_hamiltonian(h: SumOfProducts, encs: EncoderSet) -> SumOfProducts:
    """Conjugate every term by the encoders: H -> C+ H C mode by mode.

    Identity factors stay absent (C+C = I), so term count is preserved.
    """
    _check_encoders_against(h, encs)
    new_dofs = encoded_dofs(h, encs)
    new_terms = []
    for t in h.terms:
        factors = []
        for f in t.factors:
            enc = encs.get(f.dof_label)
            if enc is None:
                factors.append(f)
            else:
                factors.append(LocalOperator(f.dof_label, encode_local_operator(f, enc)))
        new_terms.append(ProductTerm(t.coefficient, tuple(factors)))
    return SumOfProducts(new_dofs, tuple(new_terms))


def half_encoded_hamiltonian(h: SumOfProducts, encs: EncoderSet, l: str) -> SumOfProducts:
    """Encode all modes except the bra side of mode l.

    Every term carries an explicit rectangular factor (h[l]_x or I) @ C on
    mode l: N physical rows by 2^n_qubits encoded columns.
    """
    _check_encoders_against(h, encs)
    enc_l = encs.require(l)
    new_dofs = encoded_dofs(h, encs)
    new_terms = []
    for t in h.terms:
        fmap = t.factor_map()
        factors = []
        for d in h.dofs:
            f = fmap.get(d.label)
            if d.label == l:
                mat = enc_l.c if f is None else f.matrix @ enc_l.c
                factors.append(LocalOperator(l, mat))
            elif f is not None:
                enc = encs.get(d.label)
                if enc is None:
                    factors.append(f)
                else:
                    factors.append(LocalOperator(d.label, encode_local_operator(f, enc)))
        new_terms.append(ProductTerm(t.coefficient, tuple(factors)))
    return SumOfProducts(new_dofs, tuple(new_terms))


def encode_state_vector(enc: BasisEncoder, vec: np.ndarray) -> np.ndarray:
    """Project a physical mode vector into the encoded register (normalized)."""
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    if vec.size != enc.n_levels:
        raise ContractViolationError("vector length does not match encoder levels")
    amp = enc.c.conj().T @ vec
    norm = np.linalg.norm(amp)
    if norm < 1e-12:
        raise StateCorruptionError("vector is orthogonal to the encoded subspace")
    return amp / norm


# ---------------------------------------------------------------------------
# measurement tables

@dataclass(frozen=True)
class MeasurementTables:
    """Per-term J tensors for one mode, and the G matrix contracted from them.

    ``j_table[x, n, n']`` = <phi| (|n><n'|)_l  prod_{k != l} h~[k]_x |phi>
    (term coefficients excluded; they enter in the G contraction).
    """

    dof_label: str
    j_table: np.ndarray
    g_matrix: Optional[np.ndarray] = None


def _local_factors_for_mode(h: SumOfProducts, l: str) -> np.ndarray:
    """Stack of (possibly identity) physical factors h[l]_x, one per term."""
    n = h.dof(l).dim
    eye = np.eye(n, dtype=complex)
    mats = []
    for t in h.terms:
        f = t.factor_map().get(l)
        mats.append(eye if f is None else f.matrix)
    return np.array(mats)


def _j_table_raw(state: HybridState, h: SumOfProducts,
                 c_map: Dict[str, np.ndarray], l: str) -> np.ndarray:
    """J for mode l with explicit encoder matrices (no validation)."""
    labels = state.labels
    axis_l = state.dof_axis(l)
    tensor = state.tensor()
    d_l = state.dims[axis_l]
    a = np.moveaxis(tensor, axis_l, 0).reshape(d_l, -1).conj()
    j = np.empty((len(h.terms), d_l, d_l), dtype=complex)
    for xi, t in enumerate(h.terms):
        psi = tensor
        for f in t.factors:
            if f.dof_label == l:
                continue
            axis = labels.index(f.dof_label)
            c = c_map.get(f.dof_label)
            mat = f.matrix if c is None else c.conj().T @ f.matrix @ c
            psi = np.tensordot(mat, psi, axes=([1], [axis]))
            psi = np.moveaxis(psi, 0, axis)
        b = np.moveaxis(psi, axis_l, 0).reshape(d_l, -1)
        j[xi] = a @ b.T
    return j


def compute_j_table(state: HybridState, h: SumOfProducts, encs: EncoderSet,
                    l: str) -> MeasurementTables:
    """Measure J[l] on the encoded state; independent of C[l] itself."""
    _check_encoders_against(h, encs)
    enc_l = encs.require(l)
    if state.dims[state.dof_axis(l)] != enc_l.encoded_dim:
        raise ContractViolationError("state does not live in the encoded space of mode l")
    c_map = {lbl: e.c for lbl, e in encs.encoders.items()}
    return MeasurementTables(l, _j_table_raw(state, h, c_map, l))


def _g_from_j(h_locals: np.ndarray, coeffs: np.ndarray, c: np.ndarray,
              j_table: np.ndarray) -> np.ndarray:
    """G = sum_x coeff_x (h[l]_x C) J_x^T."""
    hc = h_locals @ c  # (M, N, d)
    return np.einsum("x,xmp,xnp->mn", coeffs, hc, j_table)


def compute_g_matrix(tables: MeasurementTables, h: SumOfProducts,
                     enc: BasisEncoder, l: str) -> np.ndarray:
    """Contract J with the mode-l factors: G_mn = dE/dC*_mn."""
    if tables.dof_label != l:
        raise ContractViolationError(
            f"tables were computed for mode {tables.dof_label!r}, not {l!r}"
        )
    if tables.j_table.shape[1] != enc.encoded_dim:
        raise ContractViolationError("J table dimension does not match the encoder")
    h_locals = _local_factors_for_mode(h, l)
    coeffs = np.array([t.coefficient for t in h.terms])
    if h_locals.shape[0] != tables.j_table.shape[0]:
        raise ContractViolationError("J table term count does not match the Hamiltonian")
    return _g_from_j(h_locals, coeffs, enc.c, tables.j_table)


def energy_from_tables(h_locals: np.ndarray, coeffs: np.ndarray, c: np.ndarray,
                       j_table: np.ndarray) -> float:
    """<phi|H~|phi> evaluated through one mode's J table."""
    enc_ops = np.einsum("pn,xpq,qm->xnm", c.conj(), h_locals, c)
    val = np.einsum("x,xnm,xnm->", coeffs, enc_ops, j_table)
    return float(val.real)


def static_residual(g: np.ndarray, enc: BasisEncoder) -> np.ndarray:
    """(1 - C C+) G: zero exactly when the encoder is stationary."""
    if g.shape != enc.c.shape:
        raise ContractViolationError(f"G shape {g.shape} does not match encoder {enc.c.shape}")
    return g - enc.c @ (enc.c.conj().T @ g)


# ---------------------------------------------------------------------------
# stationary-encoder solve

def _pack(c: np.ndarray, complex_c: bool) -> np.ndarray:
    if complex_c:
        return np.concatenate([c.real.ravel(), c.imag.ravel()])
    return c.real.ravel()


def _unpack(x: np.ndarray, shape: Tuple[int, int], complex_c: bool) -> np.ndarray:
    if complex_c:
        half = x.size // 2
        return (x[:half] + 1j * x[half:]).reshape(shape)
    return x.reshape(shape).astype(complex)


def solve_encoder(state: HybridState, h: SumOfProducts, encs: EncoderSet,
                  l: Union[str, Sequence[str]], *, tol: float = RESIDUAL_TOL,
                  rng: Optional[np.random.Generator] = None,
                  complex_c: Optional[bool] = None) -> BasisEncoder:
    """Root-solve the stationary condition (1 - C C+) G(C) = 0 for mode l.

    Three initial guesses are tried (current encoder, identity encoder,
    current + Gaussian noise then QR); each root is QR-orthonormalized and
    re-checked, and the accepted root is the one with the lowest encoded
    energy.  Passing a list of labels ties those modes to one shared C.

    Raises ``ConvergenceError`` (carrying the best candidate) if no attempt
    reaches the residual tolerance.
    """
    shared_labels = [l] if isinstance(l, str) else list(l)
    if not shared_labels:
        raise ContractViolationError("need at least one mode label")
    _check_encoders_against(h, encs)
    rng = rng if rng is not None else np.random.default_rng(7)

    enc0 = encs.require(shared_labels[0])
    for lbl in shared_labels[1:]:
        other = encs.require(lbl)
        if other.c.shape != enc0.c.shape:
            raise ContractViolationError("shared modes must have identical encoder shapes")
    n, d = enc0.c.shape
    if n == d:
        # complete basis: P = I, the residual vanishes identically
        return enc0

    c_map = {lbl: e.c for lbl, e in encs.encoders.items()}
    coeffs = np.array([t.coefficient for t in h.terms])
    h_locals = {lbl: _local_factors_for_mode(h, lbl) for lbl in shared_labels}

    if len(shared_labels) == 1:
        j_fixed = {shared_labels[0]: _j_table_raw(state, h, c_map, shared_labels[0])}

        def j_tables_at(c):
            return j_fixed
    else:
        def j_tables_at(c):
            trial = dict(c_map)
            for lbl in shared_labels:
                trial[lbl] = c
            return {lbl: _j_table_raw(state, h, trial, lbl) for lbl in shared_labels}

    def g_total(c, tables):
        g = np.zeros((n, d), dtype=complex)
        for lbl in shared_labels:
            g += _g_from_j(h_locals[lbl], coeffs, c, tables[lbl])
        return g

    def raw_residual(c):
        tables = j_tables_at(c)
        g = g_total(c, tables)
        return g - c @ (c.conj().T @ g)

    if complex_c is None:
        probe = raw_residual(enc0.c)
        complex_c = (float(np.max(np.abs(enc0.c.imag))) > 1e-12
                     or float(np.max(np.abs(probe.imag))) > 1e-10)

    def residual_vec(x):
        c = _unpack(x, (n, d), complex_c)
        return _pack(raw_residual(c), complex_c)

    guesses = [
        ("current", enc0.c.copy()),
        ("identity", np.eye(n, d, dtype=complex)),
    ]
    noise = rng.normal(scale=GUESS_NOISE_SCALE, size=(n, d))
    if complex_c:
        noise = noise + 1j * rng.normal(scale=GUESS_NOISE_SCALE, size=(n, d))
    guesses.append(("perturbed", qr_orthonormalize(enc0.c + noise)))

    accepted = []  # (energy, order, BasisEncoder, residual_norm)
    best_failed = None
    for order, (name, c_init) in enumerate(guesses):
        sol = solve_nonlinear(residual_vec, _pack(c_init, complex_c), tol=tol)
        c_root = _unpack(sol.x, (n, d), complex_c)
        try:
            q = qr_orthonormalize(c_root)
        except Exception:
            continue
        r_norm = float(np.max(np.abs(raw_residual(q))))
        tables_q = j_tables_at(q)
        energy = 0.0
        for lbl in shared_labels:
            energy += energy_from_tables(h_locals[lbl], coeffs, q, tables_q[lbl])
        energy /= len(shared_labels)  # each mode's table already counts the full H
        enc_q = BasisEncoder(enc0.dof_label, n, enc0.n_qubits, q)
        if r_norm <= tol:
            accepted.append((energy, order, enc_q, r_norm))
        elif best_failed is None or r_norm < best_failed[1]:
            best_failed = (enc_q, r_norm)
    if not accepted:
        enc_best, r_best = best_failed if best_failed else (enc0, float("inf"))
        raise ConvergenceError(
            f"encoder solve for mode(s) {shared_labels} stalled at residual {r_best:.3e}",
            best=enc_best,
        )
    accepted.sort(key=lambda item: (round(item[0] / 1e-12), item[1]))
    return accepted[0][2]


# ---------------------------------------------------------------------------
# encoder equation of motion

def encoder_eom_rhs(state: HybridState, h: SumOfProducts, encs: EncoderSet,
                    l: str, rho: Optional[np.ndarray] = None) -> np.ndarray:
    """dC/dt = -i (1 - C C+) G rho^{-1} with rho diagonally regularized.

    ``rho`` is the reduced density matrix of mode l's qubit register
    (computed from the state when omitted).  Orthonormality is conserved
    exactly: C+ (1 - C C+) = 0 makes C+ dC/dt = 0.
    """
    enc = encs.require(l)
    if rho is None:
        rho = reduced_density_matrix(state, l)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (enc.encoded_dim,) * 2:
        raise ContractViolationError("rho dimension does not match the encoder")
    if float(np.max(np.abs(rho - rho.conj().T))) > 1e-8:
        raise StateCorruptionError("reduced density matrix is not Hermitian")
    if float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))) < -1e-8:
        raise StateCorruptionError("reduced density matrix is not PSD")
    tables = compute_j_table(state, h, encs, l)
    g = compute_g_matrix(tables, h, enc, l)
    r = static_residual(g, enc)
    rho_reg = rho + RHO_REGULARIZATION * np.eye(rho.shape[0])
    return -1j * np.linalg.solve(rho_reg.T, r.T).T

"""Truncated bosonic / spin / electron operators and sum-of-products algebra.

A many-body operator is represented as ``SumOfProducts``: an ordered list of
degrees of freedom plus terms ``coeff * kron(factor_1, ..., factor_K)`` where
absent factors are identities.  Factors may be rectangular (rows = output
dimension, columns = the declared DOF dimension), which is how half-encoded
operators carry a phonon-by-qubit block on one mode.

The binary (Gray-code) qubit encoding of a truncated mode lives here as the
baseline scheme; the variational encoding is in :mod:`vbse.encoder`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import CapacityError, ContractViolationError, ResourceLimitError
from .numerics import as_complex_matrix

DOF_KINDS = ("electron_site", "spin", "phonon")
DENSE_DIM_CAP = 2 ** 22


@dataclass(frozen=True)
class DegreeOfFreedom:
    """A labelled tensor factor of the Hilbert space.

    ``dim`` is the ket dimension: the truncation N for a phonon mode, 2 for
    a spin, or the number of sites for the single-excitation electron sector.
    """

    label: str
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in DOF_KINDS:
            raise ContractViolationError(f"unknown DOF kind {self.kind!r}; expected one of {DOF_KINDS}")
        if self.dim < 2:
            raise ContractViolationError(f"DOF {self.label!r} needs dim >= 2, got {self.dim}")
        if self.kind == "spin" and self.dim != 2:
            raise ContractViolationError(f"spin DOF {self.label!r} must have dim 2, got {self.dim}")


@dataclass(frozen=True)
class LocalOperator:
    """A matrix acting on one degree of freedom.

    Square for ordinary operators; a rectangular matrix maps the DOF's
    declared (column) space into a different output (row) space.
    """

    dof_label: str
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix, f"local operator on {self.dof_label!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class ProductTerm:
    """One direct-product term: coefficient times one factor per listed DOF."""

    coefficient: complex
    factors: Tuple[LocalOperator, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        labels = [f.dof_label for f in self.factors]
        if len(labels) != len(set(labels)):
            raise ContractViolationError(f"duplicate factor labels in term: {labels}")
        object.__setattr__(self, "factors", tuple(self.factors))

    def factor_map(self) -> Dict[str, LocalOperator]:
        return {f.dof_label: f for f in self.factors}


def product_term(coefficient, factors: Dict[str, np.ndarray]) -> ProductTerm:
    """Convenience constructor from a {label: matrix} mapping."""
    return ProductTerm(coefficient, tuple(LocalOperator(k, v) for k, v in factors.items()))


@dataclass(frozen=True)
class SumOfProducts:
    """An operator Sum_x coeff_x * kron_k h[k]_x over an ordered DOF list."""

    dofs: Tuple[DegreeOfFreedom, ...]
    terms: Tuple[ProductTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "dofs", tuple(self.dofs))
        object.__setattr__(self, "terms", tuple(self.terms))
        labels = [d.label for d in self.dofs]
        if len(labels) != len(set(labels)):
            raise ContractViolationError(f"duplicate DOF labels: {labels}")
        dim_of = {d.label: d.dim for d in self.dofs}
        for t in self.terms:
            for f in t.factors:
                if f.dof_label not in dim_of:
                    raise ContractViolationError(f"term factor references unknown DOF {f.dof_label!r}")
                if f.matrix.shape[1] != dim_of[f.dof_label]:
                    raise ContractViolationError(
                        f"factor on {f.dof_label!r} has {f.matrix.shape[1]} columns, "
                        f"DOF dim is {dim_of[f.dof_label]}"
                    )

    @property
    def labels(self) -> List[str]:
        return [d.label for d in self.dofs]

    @property
    def dims(self) -> List[int]:
        return [d.dim for d in self.dofs]

    def dof_index(self, label: str) -> int:
        for i, d in enumerate(self.dofs):
            if d.label == label:
                return i
        raise ContractViolationError(f"no DOF labelled {label!r}")

    def dof(self, label: str) -> DegreeOfFreedom:
        return self.dofs[self.dof_index(label)]

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def to_json_dict(self) -> dict:
        """Portable JSON form; complex entries stored as [re, im] pairs."""
        return {
            "dofs": [{"label": d.label, "kind": d.kind, "dim": d.dim} for d in self.dofs],
            "terms": [
                {
                    "coeff": [t.coefficient.real, t.coefficient.imag],
                    "factors": {
                        f.dof_label: [[[v.real, v.imag] for v in row] for row in f.matrix]
                        for f in t.factors
                    },
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SumOfProducts":
        dofs = tuple(DegreeOfFreedom(d["label"], d["kind"], int(d["dim"])) for d in data["dofs"])
        terms = []
        for t in data["terms"]:
            coeff = complex(t["coeff"][0], t["coeff"][1])
            factors = {
                label: np.array([[complex(re, im) for re, im in row] for row in mat])
                for label, mat in t["factors"].items()
            }
            terms.append(product_term(coeff, factors))
        return cls(dofs, tuple(terms))


def content_hash(h: SumOfProducts) -> str:
    """Stable sha256 of the serialized operator (used as a cache key)."""
    blob = json.dumps(h.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# elementary local operators

def boson_annihilation(n_levels: int) -> np.ndarray:
    """Lowering operator b with b|m> = sqrt(m)|m-1> in an n_levels truncation."""
    if n_levels < 2:
        raise ContractViolationError(f"boson truncation needs >= 2 levels, got {n_levels}")
    b = np.zeros((n_levels, n_levels), dtype=complex)
    m = np.arange(1, n_levels)
    b[m - 1, m] = np.sqrt(m)
    return b


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(which: str) -> np.ndarray:
    """Standard 2x2 Pauli matrix ('X', 'Y', 'Z', or 'I')."""
    try:
        return _PAULI[which].copy()
    except KeyError:
        raise ContractViolationError(f"unknown Pauli label {which!r}") from None


# ---------------------------------------------------------------------------
# dense realization and tensor application

def build_dense(h: SumOfProducts) -> np.ndarray:
    """Dense matrix Sum_x coeff_x kron_k h[k]_x (identity fill, declared order).

    Rectangular factors are allowed; the output is then rectangular with row
    dimensions taken from the factors (consistent across terms required).
    """
    if h.total_dim > DENSE_DIM_CAP:
        raise ResourceLimitError(
            f"dense build of dimension {h.total_dim} exceeds the cap {DENSE_DIM_CAP}"
        )
    out = None
    for t in h.terms:
        fmap = t.factor_map()
        acc = np.array([[t.coefficient]], dtype=complex)
        for d in h.dofs:
            f = fmap.get(d.label)
            block = f.matrix if f is not None else np.eye(d.dim, dtype=complex)
            acc = np.kron(acc, block)
        if out is None:
            out = acc
        elif out.shape != acc.shape:
            raise ContractViolationError(
                f"terms disagree on output shape: {out.shape} vs {acc.shape}"
            )
        else:
            out = out + acc
    if out is None:
        dim = h.total_dim
        out = np.zeros((dim, dim), dtype=complex)
    return out


def apply_term_to_tensor(term: ProductTerm, dofs: Sequence[DegreeOfFreedom],
                         tensor: np.ndarray) -> np.ndarray:
    """Apply one product term to an amplitude tensor of shape dims(dofs)."""
    out = tensor
    labels = [d.label for d in dofs]
    for f in term.factors:
        axis = labels.index(f.dof_label)
        out = np.tensordot(f.matrix, out, axes=([1], [axis]))
        out = np.moveaxis(out, 0, axis)
    return term.coefficient * out


def apply_sum_to_vector(h: SumOfProducts, vec: np.ndarray) -> np.ndarray:
    """Matrix-vector product H @ vec without building H densely."""
    dims = h.dims
    tensor = np.asarray(vec, dtype=complex).reshape(dims)
    out = None
    for t in h.terms:
        contrib = apply_term_to_tensor(t, h.dofs, tensor)
        out = contrib if out is None else out + contrib
    if out is None:
        out = np.zeros(dims, dtype=complex)
    return out.reshape(-1)


def sop_trace(h: SumOfProducts) -> complex:
    """Trace of the dense operator, computed factor-wise."""
    total = 0.0 + 0.0j
    for t in h.terms:
        fmap = t.factor_map()
        val = t.coefficient
        for d in h.dofs:
            f = fmap.get(d.label)
            if f is None:
                val *= d.dim
            else:
                if f.matrix.shape[0] != f.matrix.shape[1]:
                    raise ContractViolationError("trace needs square factors")
                val *= np.trace(f.matrix)
        total += val
    return total


# ---------------------------------------------------------------------------
# Gray-code binary encoding (baseline scheme)

def gray_index(m: int, n_qubits: int) -> str:
    """The m-th reflected-binary Gray code as an MSB-first bitstring."""
    if not 0 <= m < 2 ** n_qubits:
        raise ContractViolationError(f"m={m} out of range for {n_qubits} qubits")
    g = m ^ (m >> 1)
    return format(g, f"0{n_qubits}b")


def binary_encode_operator(op: np.ndarray, n_qubits: int) -> np.ndarray:
    """Relabel an N-level operator into the 2^n_qubits computational basis.

    Level |m> maps to the qubit basis state whose bits are gray_index(m);
    unused qubit states (when N < 2^n_qubits) are zero-padded.
    """
    op = as_complex_matrix(op, "binary_encode_operator input")
    n = op.shape[0]
    if op.shape[0] != op.shape[1]:
        raise ContractViolationError(f"operator must be square, got {op.shape}")
    dim = 2 ** n_qubits
    if n > dim:
        raise CapacityError(f"{n} levels do not fit in {n_qubits} qubits")
    perm = np.array([int(gray_index(m, n_qubits), 2) for m in range(n)])
    out = np.zeros((dim, dim), dtype=complex)
    out[np.ix_(perm, perm)] = op
    return out


def gray_encode_hamiltonian(h: SumOfProducts, n_qubits: int) -> SumOfProducts:
    """Gray-relabel every phonon DOF of `h` into an n_qubits register.

    This is the fixed (non-variational) baseline encoding; phonon truncation
    must not exceed 2^n_qubits levels.
    """
    dim = 2 ** n_qubits
    new_dofs = tuple(
        DegreeOfFreedom(d.label, d.kind, dim) if d.kind == "phonon" else d
        for d in h.dofs
    )
    new_terms = []
    for t in h.terms:
        factors = []
        for f in t.factors:
            if h.dof(f.dof_label).kind == "phonon":
                factors.append(LocalOperator(f.dof_label,
                                             binary_encode_operator(f.matrix, n_qubits)))
            else:
                factors.append(f)
        new_terms.append(ProductTerm(t.coefficient, tuple(factors)))
    return SumOfProducts(new_dofs, tuple(new_terms))


def pauli_string(letters: str) -> np.ndarray:
    """Kronecker product of single-qubit Paulis, e.g. "XZ" -> X (x) Z."""
    out = np.array([[1.0 + 0.0j]])
    for ch in letters:
        out = np.kron(out, pauli(ch))
    return out

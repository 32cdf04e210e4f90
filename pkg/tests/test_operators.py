"""Operator algebra: ladder/Pauli matrices, dense builds, Gray relabeling."""

import json

import numpy as np
import pytest

from vbse.errors import CapacityError, ContractViolationError, ResourceLimitError
from vbse.operators import (
    DegreeOfFreedom,
    SumOfProducts,
    apply_sum_to_vector,
    binary_encode_operator,
    boson_annihilation,
    build_dense,
    content_hash,
    gray_index,
    pauli,
    product_term,
)


class TestBosonAnnihilation:
    def test_two_level_ladder(self):
        assert np.array_equal(boson_annihilation(2), [[0, 1], [0, 0]])

    def test_sqrt_rule(self):
        b = boson_annihilation(3)
        assert b[1, 2] == pytest.approx(np.sqrt(2))
        assert b[0, 1] == pytest.approx(1.0)

    def test_number_operator(self):
        for n in (2, 5, 9):
            b = boson_annihilation(n)
            assert np.allclose(b.conj().T @ b, np.diag(np.arange(n)))

    def test_truncated_commutator(self):
        # [b, b+] = I - N |N-1><N-1| on the truncated space
        n = 6
        b = boson_annihilation(n)
        comm = b @ b.conj().T - b.conj().T @ b
        expected = np.eye(n)
        expected[n - 1, n - 1] = 1 - n
        assert np.allclose(comm, expected)

    def test_too_few_levels(self):
        with pytest.raises(ContractViolationError):
            boson_annihilation(1)


class TestPauli:
    def test_z_diagonal(self):
        assert np.array_equal(pauli("Z"), np.diag([1, -1]))

    def test_x_squares_to_identity(self):
        assert np.allclose(pauli("X") @ pauli("X"), np.eye(2))

    def test_xy_equals_iz(self):
        assert np.allclose(pauli("X") @ pauli("Y"), 1j * pauli("Z"))

    def test_unknown_label(self):
        with pytest.raises(ContractViolationError):
            pauli("W")


def two_spin_system():
    dofs = (DegreeOfFreedom("s0", "spin", 2), DegreeOfFreedom("s1", "spin", 2))
    return dofs


class TestBuildDense:
    def test_single_term_identity_fill(self):
        dofs = two_spin_system()
        h = SumOfProducts(dofs, (product_term(1.0, {"s0": pauli("Z")}),))
        assert np.allclose(build_dense(h), np.kron(pauli("Z"), np.eye(2)))

    def test_linearity(self):
        dofs = two_spin_system()
        t1 = product_term(0.5, {"s0": pauli("X")})
        t2 = product_term(-2.0, {"s1": pauli("Y")})
        h12 = SumOfProducts(dofs, (t1, t2))
        h1 = SumOfProducts(dofs, (t1,))
        h2 = SumOfProducts(dofs, (t2,))
        assert np.allclose(build_dense(h12), build_dense(h1) + build_dense(h2))

    def test_coefficient_scaling(self):
        dofs = two_spin_system()
        t = product_term(1.0, {"s0": pauli("X"), "s1": pauli("Z")})
        t3 = product_term(3.0, {"s0": pauli("X"), "s1": pauli("Z")})
        assert np.allclose(
            build_dense(SumOfProducts(dofs, (t3,))),
            3.0 * build_dense(SumOfProducts(dofs, (t,))),
        )

    def test_rectangular_factor(self):
        # a 3x2 isometry-like factor on the second DOF gives a 6x4 dense matrix
        dofs = two_spin_system()
        c = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        h = SumOfProducts(dofs, (product_term(1.0, {"s1": c}),))
        dense = build_dense(h)
        assert dense.shape == (6, 4)
        assert np.allclose(dense, np.kron(np.eye(2), c))

    def test_dimension_cap(self):
        dofs = tuple(DegreeOfFreedom(f"p{i}", "phonon", 64) for i in range(4))
        h = SumOfProducts(dofs, ())
        with pytest.raises(ResourceLimitError):
            build_dense(h)  # 64^4 = 2^24 exceeds the cap

    def test_unknown_factor_label_rejected(self):
        dofs = two_spin_system()
        with pytest.raises(ContractViolationError):
            SumOfProducts(dofs, (product_term(1.0, {"nope": pauli("X")}),))

    def test_wrong_factor_dim_rejected(self):
        dofs = two_spin_system()
        with pytest.raises(ContractViolationError):
            SumOfProducts(dofs, (product_term(1.0, {"s0": np.eye(3)}),))


class TestApplySum:
    def test_matches_dense_matvec(self):
        rng = np.random.default_rng(5)
        dofs = (
            DegreeOfFreedom("e", "electron_site", 3),
            DegreeOfFreedom("p", "phonon", 4),
        )
        terms = []
        for _ in range(4):
            terms.append(product_term(
                complex(rng.standard_normal(), rng.standard_normal()),
                {
                    "e": rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)),
                    "p": rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)),
                },
            ))
        terms.append(product_term(0.7, {"p": rng.standard_normal((4, 4))}))
        h = SumOfProducts(dofs, tuple(terms))
        v = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        assert np.max(np.abs(apply_sum_to_vector(h, v) - build_dense(h) @ v)) < 1e-12


class TestGrayCode:
    def test_two_qubit_sequence(self):
        assert [gray_index(m, 2) for m in range(4)] == ["00", "01", "11", "10"]

    def test_single_bit_steps(self):
        for nq in (1, 2, 3, 4, 5):
            codes = [gray_index(m, nq) for m in range(2 ** nq)]
            assert len(set(codes)) == 2 ** nq
            for a, b in zip(codes, codes[1:]):
                assert sum(x != y for x, y in zip(a, b)) == 1

    def test_out_of_range(self):
        with pytest.raises(ContractViolationError):
            gray_index(4, 2)


class TestBinaryEncodeOperator:
    def test_two_level_displacement_is_x(self):
        b = boson_annihilation(2)
        assert np.allclose(binary_encode_operator(b + b.conj().T, 1), pauli("X"))

    def test_gray_permuted_number_operator(self):
        out = binary_encode_operator(np.diag([0.0, 1.0, 2.0, 3.0]), 2)
        assert np.allclose(np.diag(out), [0.0, 1.0, 3.0, 2.0])

    def test_spectrum_preserved(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = (a + a.conj().T) / 2
        out = binary_encode_operator(h, 2)
        assert np.allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(h), atol=1e-12)
        assert np.max(np.abs(out - out.conj().T)) < 1e-14

    def test_zero_padding(self):
        out = binary_encode_operator(np.diag([5.0, 7.0, 9.0]), 2)
        # level 3 is unused: its Gray slot (index 2) stays zero
        assert np.allclose(sorted(np.diag(out).real), [0.0, 5.0, 7.0, 9.0])
        assert out[2, 2] == 0.0

    def test_capacity(self):
        with pytest.raises(CapacityError):
            binary_encode_operator(np.eye(3), 1)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(13)
        dofs = (
            DegreeOfFreedom("spin", "spin", 2),
            DegreeOfFreedom("mode0", "phonon", 3),
        )
        h = SumOfProducts(dofs, (
            product_term(1.5 - 0.25j, {"spin": pauli("Y")}),
            product_term(0.5, {
                "spin": pauli("Z"),
                "mode0": rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)),
            }),
        ))
        blob = json.dumps(h.to_json_dict())
        h2 = SumOfProducts.from_json_dict(json.loads(blob))
        assert h2.labels == h.labels
        assert np.allclose(build_dense(h2), build_dense(h))
        assert content_hash(h2) == content_hash(h)

    def test_hash_sensitive_to_coefficients(self):
        dofs = two_spin_system()
        h1 = SumOfProducts(dofs, (product_term(1.0, {"s0": pauli("X")}),))
        h2 = SumOfProducts(dofs, (product_term(2.0, {"s0": pauli("X")}),))
        assert content_hash(h1) != content_hash(h2)

"""Linear-algebra and integration kernel checks against closed forms."""

import numpy as np
import pytest

from vbse.errors import ContractViolationError, DegenerateBasisError, StiffnessError
from vbse.numerics import (
    hermitian_eig,
    matrix_exp,
    qr_orthonormalize,
    rk45_integrate,
    solve_nonlinear,
)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


class TestHermitianEig:
    def test_identity_eigenvalues(self):
        vals, vecs = hermitian_eig(np.eye(3))
        assert np.allclose(vals, [1.0, 1.0, 1.0])
        assert np.allclose(vecs.conj().T @ vecs, np.eye(3), atol=1e-14)

    def test_pauli_x_eigenpairs(self):
        vals, vecs = hermitian_eig(PAULI_X)
        assert np.allclose(vals, [-1.0, 1.0], atol=1e-14)
        for k in range(2):
            assert np.allclose(PAULI_X @ vecs[:, k], vals[k] * vecs[:, k], atol=1e-14)

    def test_reconstruction_random_6x6(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            h = random_hermitian(rng, 6)
            vals, vecs = hermitian_eig(h)
            assert np.max(np.abs((vecs * vals) @ vecs.conj().T - h)) < 1e-12
            assert np.all(np.diff(vals) >= -1e-14)  # ascending order

    def test_rejects_non_hermitian(self):
        with pytest.raises(ContractViolationError):
            hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ContractViolationError):
            hermitian_eig(np.zeros((2, 3)))

    def test_rejects_nan(self):
        with pytest.raises(ContractViolationError):
            hermitian_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestQrOrthonormalize:
    def test_columns_orthonormal(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            c = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
            q = qr_orthonormalize(c)
            assert q.shape == c.shape
            assert np.max(np.abs(q.conj().T @ q - np.eye(3))) < 1e-12

    def test_span_preserved(self):
        rng = np.random.default_rng(12)
        c = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
        q = qr_orthonormalize(c)
        # projecting the original columns onto span(q) must reproduce them
        proj = q @ (q.conj().T @ c)
        assert np.max(np.abs(proj - c)) < 1e-12

    def test_idempotent_on_orthonormal_input(self):
        rng = np.random.default_rng(13)
        c = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        q = qr_orthonormalize(c)
        q2 = qr_orthonormalize(q)
        assert np.max(np.abs(q2 - q)) < 1e-12

    def test_deterministic_phase(self):
        # a single column ends up a positive multiple of itself
        v = np.array([[-2.0], [0.0], [0.0]], dtype=complex)
        q = qr_orthonormalize(v)
        assert np.allclose(q, [[-1.0], [0.0], [0.0]])
        # and repeated calls agree bit-for-bit
        rng = np.random.default_rng(14)
        c = rng.standard_normal((7, 3))
        assert np.array_equal(qr_orthonormalize(c), qr_orthonormalize(c))

    def test_rank_deficient_raises(self):
        c = np.ones((4, 2), dtype=complex)
        with pytest.raises(DegenerateBasisError):
            qr_orthonormalize(c)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ContractViolationError):
            qr_orthonormalize(np.eye(3)[:2, :])


class TestMatrixExp:
    def test_exp_zero_is_identity(self):
        assert np.allclose(matrix_exp(np.zeros((4, 4))), np.eye(4), atol=1e-15)

    def test_exp_i_half_pi_x(self):
        # exp(i (pi/2) X) = i X
        u = matrix_exp(1j * (np.pi / 2) * PAULI_X)
        assert np.max(np.abs(u - 1j * PAULI_X)) < 1e-12

    def test_anti_hermitian_gives_exact_unitary(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            h = random_hermitian(rng, 5)
            u = matrix_exp(-1j * h)
            assert np.max(np.abs(u.conj().T @ u - np.eye(5))) < 1e-13

    def test_hermitian_route_matches_series(self):
        rng = np.random.default_rng(22)
        h = random_hermitian(rng, 4) * 0.1
        series = np.eye(4, dtype=complex)
        term = np.eye(4, dtype=complex)
        for k in range(1, 30):
            term = term @ h / k
            series = series + term
        assert np.max(np.abs(matrix_exp(h) - series)) < 1e-12

    def test_general_matrix_fallback(self):
        # nilpotent: exp([[0,1],[0,0]]) = [[1,1],[0,1]]
        n = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert np.allclose(matrix_exp(n), [[1.0, 1.0], [0.0, 1.0]], atol=1e-14)


class TestSolveNonlinear:
    def test_linear_system_root(self):
        a = np.array([[3.0, 1.0], [1.0, 2.0]])
        b = np.array([1.0, -1.0])
        expected = np.linalg.solve(a, b)
        res = solve_nonlinear(lambda x: a @ x - b, np.zeros(2))
        assert res.converged
        assert np.max(np.abs(res.x - expected)) < 1e-7
        assert res.residual_norm <= 1e-8

    def test_scalar_nonlinear_root(self):
        res = solve_nonlinear(lambda x: np.array([x[0] ** 3 - 8.0]), np.array([1.0]))
        assert res.converged
        assert abs(res.x[0] - 2.0) < 1e-7

    def test_failure_reports_best_iterate(self):
        # residual bounded away from zero: no root exists
        res = solve_nonlinear(
            lambda x: np.array([x[0] ** 2 + 1.0]), np.array([3.0]), max_evals=200
        )
        assert not res.converged
        assert res.residual_norm >= 1.0
        # best iterate should be near the minimizer x=0
        assert abs(res.x[0]) < 1.0
        assert res.n_evaluations <= 250

    def test_already_converged_short_circuit(self):
        calls = []

        def residual(x):
            calls.append(1)
            return np.zeros(2)

        res = solve_nonlinear(residual, np.array([1.0, 2.0]))
        assert res.converged and res.n_evaluations == 1
        assert np.allclose(res.x, [1.0, 2.0])


class TestRk45Integrate:
    def test_complex_rotation(self):
        # y' = i y  ->  y(t) = exp(i t)
        times = np.linspace(0.0, 2.0, 9)
        out = rk45_integrate(lambda t, y: 1j * y, np.array([1.0 + 0.0j]), (0.0, 2.0), times)
        assert np.allclose(out.times, times)
        assert np.max(np.abs(out.states[:, 0] - np.exp(1j * times))) < 1e-7

    def test_real_decay(self):
        times = np.linspace(0.0, 3.0, 7)
        out = rk45_integrate(lambda t, y: -y, np.array([1.0 + 0.0j]), (0.0, 3.0), times)
        assert np.max(np.abs(out.states[:, 0] - np.exp(-times))) < 1e-7

    def test_norm_conservation_hermitian_generator(self):
        rng = np.random.default_rng(31)
        h = random_hermitian(rng, 6)
        y0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        y0 /= np.linalg.norm(y0)
        out = rk45_integrate(lambda t, y: -1j * (h @ y), y0, (0.0, 5.0),
                             np.linspace(0.0, 5.0, 11))
        norms = np.linalg.norm(out.states, axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-7  # ~ rtol * t

    def test_matches_eigendecomposition_propagator(self):
        rng = np.random.default_rng(32)
        h = random_hermitian(rng, 5)
        y0 = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        vals, vecs = np.linalg.eigh(h)
        t = 1.7
        exact = (vecs * np.exp(-1j * vals * t)) @ (vecs.conj().T @ y0)
        out = rk45_integrate(lambda s, y: -1j * (h @ y), y0, (0.0, t))
        assert np.max(np.abs(out.states[-1] - exact)) < 1e-6

    def test_bad_span_rejected(self):
        with pytest.raises(ContractViolationError):
            rk45_integrate(lambda t, y: y, np.array([1.0]), (1.0, 0.0))

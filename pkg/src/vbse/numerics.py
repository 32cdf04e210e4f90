"""Dense complex linear-algebra and integration kernels.

All routines are pure functions of their inputs and are safe to call from
multiple threads.  Matrices are plain complex ``numpy.ndarray`` objects;
helpers here validate the contracts (finiteness, Hermiticity, shape) that the
rest of the package relies on.

Default tolerances: nonlinear root solves target 1e-8 in the residual
infinity norm, adaptive integration runs at rtol=1e-8 / atol=1e-10.  These
are tight enough that modelling error dominates numerical error everywhere
downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import root as scipy_root

from .errors import ContractViolationError, DegenerateBasisError, StiffnessError

DEFAULT_ROOT_TOL = 1e-8
DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10

ROOT_MAX_EVALS = 2000
ROOT_HISTORY = 10  # non-monotone line-search window of the spectral solver


def as_complex_matrix(a, name="matrix"):
    """Coerce ``a`` to a 2-D complex array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return m


def hermiticity_defect(a):
    """Largest absolute entry of a - a^dagger."""
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def hermitian_eig(a, tol=1e-10):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvectors as columns).  Raises
    ``ContractViolationError`` if ``a`` is not square Hermitian within
    ``tol`` (absolute, entrywise).
    """
    m = as_complex_matrix(a, "hermitian_eig input")
    if m.shape[0] != m.shape[1]:
        raise ContractViolationError(f"hermitian_eig needs a square matrix, got {m.shape}")
    if hermiticity_defect(m) > tol:
        raise ContractViolationError(
            f"matrix is not Hermitian within {tol:g} (defect {hermiticity_defect(m):.3e})"
        )
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def qr_orthonormalize(c, min_singular=1e-12):
    """Orthonormalize the columns of ``c`` preserving their span.

    Uses a reduced QR factorization with the phase convention diag(R) real
    positive, which makes the result deterministic and idempotent up to
    column phases.  Raises ``DegenerateBasisError`` on rank deficiency.
    """
    m = as_complex_matrix(c, "qr input")
    rows, cols = m.shape
    if cols > rows:
        raise ContractViolationError(f"qr_orthonormalize needs cols <= rows, got {m.shape}")
    smin = np.linalg.svd(m, compute_uv=False)[-1]
    if smin <= min_singular:
        raise DegenerateBasisError(
            f"columns are numerically dependent (smallest singular value {smin:.3e})"
        )
    q, r = np.linalg.qr(m)
    diag = np.diag(r).copy()
    phase = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * phase.conj()


def matrix_exp(a):
    """Matrix exponential exp(a).

    Hermitian and anti-Hermitian inputs take the eigendecomposition route
    (exactly unitary output for anti-Hermitian generators); everything else
    falls back to scaling-and-squaring Pade.
    """
    m = as_complex_matrix(a, "matrix_exp input")
    if m.shape[0] != m.shape[1]:
        raise ContractViolationError(f"matrix_exp needs a square matrix, got {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if hermiticity_defect(m) <= 1e-12 * scale:
        vals, vecs = np.linalg.eigh(m)
        return (vecs * np.exp(vals)) @ vecs.conj().T
    anti = float(np.max(np.abs(m + m.conj().T)))
    if anti <= 1e-12 * scale:
        # a = i h with h Hermitian
        vals, vecs = np.linalg.eigh(-1j * m)
        return (vecs * np.exp(1j * vals)) @ vecs.conj().T
    return scipy.linalg.expm(m)


@dataclass
class NonlinearSolveResult:
    """Outcome of :func:`solve_nonlinear`.

    ``x`` is the best iterate seen (the root when ``converged``), and
    ``residual_norm`` its residual infinity norm.
    """

    x: np.ndarray
    residual_norm: float
    converged: bool
    n_evaluations: int
    message: str = ""


def solve_nonlinear(residual, x0, tol=DEFAULT_ROOT_TOL, max_evals=ROOT_MAX_EVALS):
    """Solve residual(x) = 0 with the derivative-free spectral (DF-SANE) method.

    Non-convergence is reported, not raised: callers typically retry from a
    different initial guess.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(residual(x0), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise ContractViolationError("residual is not finite at the initial guess")

    best = {"x": x0.copy(), "norm": float(np.max(np.abs(f0))) if f0.size else 0.0, "n": 1}

    def tracked(x):
        r = np.asarray(residual(x), dtype=float)
        norm = float(np.max(np.abs(r))) if r.size else 0.0
        best["n"] += 1
        if norm < best["norm"]:
            best["norm"] = norm
            best["x"] = np.array(x, dtype=float, copy=True)
        return r

    if best["norm"] <= tol:
        return NonlinearSolveResult(x0, best["norm"], True, 1, "already converged")

    # push the inner iteration well past `tol`: downstream consumers divide
    # residuals by small regularized quantities, so slack is cheap insurance
    sol = scipy_root(
        tracked,
        x0,
        method="df-sane",
        options={
            "maxfev": max_evals,
            "M": ROOT_HISTORY,
            "ftol": 0.0,
            "fatol": tol * 1e-4,
        },
    )
    # Judge convergence by our own infinity-norm criterion, on the best
    # iterate seen rather than the last one.
    x_final = np.asarray(sol.x, dtype=float)
    norm_final = float(np.max(np.abs(np.asarray(residual(x_final), dtype=float))))
    if norm_final < best["norm"]:
        best["x"], best["norm"] = x_final, norm_final
    converged = best["norm"] <= tol
    return NonlinearSolveResult(
        best["x"], best["norm"], converged, best["n"],
        "converged" if converged else f"no root within tol ({sol.message})",
    )


@dataclass
class IntegrationResult:
    """Trajectory samples from :func:`rk45_integrate`."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), len(y0))


def rk45_integrate(derivative, y0, t_span, sample_times=None,
                   rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Adaptive embedded Runge-Kutta 4(5) on a complex state vector.

    ``sample_times`` selects the output grid (defaults to the span
    endpoints).  A step-size underflow raises ``StiffnessError`` carrying
    the last good state.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ContractViolationError(f"t_span must be increasing, got {t_span}")
    y0 = np.asarray(y0, dtype=complex)
    if sample_times is None:
        sample_times = np.array([t0, t1])
    sample_times = np.asarray(sample_times, dtype=float)

    sol = solve_ivp(
        derivative, (t0, t1), y0,
        method="RK45", t_eval=sample_times, rtol=rtol, atol=atol,
    )
    if not sol.success:
        last_t = sol.t[-1] if sol.t.size else t0
        last_y = sol.y[:, -1] if sol.t.size else y0
        raise StiffnessError(
            f"RK45 stalled at t={last_t:.6g}: {sol.message}",
            last_state=(last_t, last_y),
            partial=IntegrationResult(sol.t, sol.y.T),
        )
    return IntegrationResult(sol.t, sol.y.T)

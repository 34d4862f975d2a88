"""Dense Hermitian linear algebra used by the equalizer solvers.

Thin, contract-enforcing wrappers around LAPACK: smallest eigenpairs of
Hermitian matrices, positive-definite solves with a diagonal-ridge fallback,
and complex least squares via the normal equations.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError

log = logging.getLogger(__name__)

# Relative tolerance on the Hermitian-deviation check, in units of max|m|.
HERMITIAN_RTOL = 1e-9
# Relative residual accepted from a positive-definite solve.
RESIDUAL_RTOL = 1e-8
# Fallback ridge, in units of trace(m)/dim(m).
FALLBACK_RIDGE = 1e-10


def _as_matrix(m, name="m"):
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _as_hermitian(m, name="m"):
    m = _as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = np.abs(m).max()
    if scale > 0:
        dev = np.abs(m - m.conj().T).max()
        if dev > HERMITIAN_RTOL * scale:
            raise ValueError(
                f"{name} is not Hermitian within tolerance "
                f"(deviation {dev:.3e}, scale {scale:.3e})"
            )
    return 0.5 * (m + m.conj().T)


def _as_rhs(b, n, name="b"):
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim not in (1, 2):
        raise ValueError(f"{name} must be 1- or 2-dimensional, got shape {b.shape}")
    if b.shape[0] != n:
        raise ValueError(f"{name} has {b.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"{name} contains non-finite entries")
    return b


def hermitian_smallest_eigpair(m):
    """Smallest eigenvalue and a unit-norm eigenvector of a Hermitian matrix.

    Returns (value, vector) with value real.  The input is symmetrized before
    the decomposition; a Hermitian deviation beyond 1e-9 * max|m| is an error.
    """
    vals, vecs = hermitian_smallest_eigpairs(m, 1)
    return float(vals[0]), vecs[:, 0]


def hermitian_smallest_eigpairs(m, k):
    """The k algebraically smallest eigenpairs of a Hermitian matrix.

    Returns (values, vectors) with values ascending, shape (k,), and vectors
    orthonormal columns, shape (n, k).
    """
    m = _as_hermitian(m)
    n = m.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    vals, vecs = sla.eigh(m, subset_by_index=(0, k - 1))
    return vals, vecs


def _cholesky_solve(m, b):
    """Solve m x = b for Hermitian positive definite m, no fallback.

    Raises scipy.linalg.LinAlgError when the factorization fails.
    """
    c = sla.cho_factor(m, lower=True, check_finite=False)
    return sla.cho_solve(c, b, check_finite=False)


def _residual_ok(m, x, b):
    num = np.linalg.norm(m @ x - b)
    den = np.linalg.norm(b)
    if den == 0.0:
        return num == 0.0
    return num <= RESIDUAL_RTOL * den


def solve_hpd(m, b, ridge=0.0):
    """Solve (m + ridge*I) x = b for Hermitian positive semidefinite m.

    Uses a Cholesky factorization.  If the (possibly ridged) system is
    numerically singular or the relative residual exceeds 1e-8, the solve is
    retried once with an extra ridge of 1e-10 * trace(m)/dim, and the retry is
    logged.  A failure after the retry raises NumericalError.
    """
    m = _as_hermitian(m)
    n = m.shape[0]
    b = _as_rhs(b, n)
    if ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    target = m if ridge == 0.0 else m + ridge * np.eye(n)
    try:
        x = _cholesky_solve(target, b)
        if _residual_ok(target, x, b):
            return x
    except sla.LinAlgError:
        pass
    extra = FALLBACK_RIDGE * float(np.trace(m).real) / n
    log.debug("solve_hpd: fallback ridge %.3e engaged (ridge=%.3e, n=%d)", extra, ridge, n)
    target = m + (ridge + extra) * np.eye(n)
    try:
        x = _cholesky_solve(target, b)
    except sla.LinAlgError as exc:
        raise NumericalError(f"matrix of size {n} is indefinite beyond tolerance") from exc
    if not _residual_ok(target, x, b):
        raise NumericalError(f"ridged solve of size {n} failed the residual check")
    return x


def least_squares(a, b):
    """Minimum | a x - b | solution for a tall complex matrix a.

    Solved through the normal equations with the same ridge policy as
    solve_hpd, so a rank-deficient a yields the ridged (near minimum-norm)
    solution instead of an exception.
    """
    a = _as_matrix(a, "a")
    rows, cols = a.shape
    if rows < cols:
        raise ValueError(f"a must have at least as many rows as columns, got {a.shape}")
    b = _as_rhs(b, rows)
    ah = a.conj().T
    gram = ah @ a
    return solve_hpd(gram, ah @ b)

"""Sparse solves: direct factorization, CG, and extreme-eigenvalue estimates.

CSR storage and the LU factorization are backed by scipy (SuperLU with the
deterministic COLAMD ordering); conjugate gradients and the power/inverse
iterations are implemented here so breakdown and convergence reporting
match the solver contracts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class SingularMatrixError(RuntimeError):
    """Structural or numerical singularity, with pivot location when known."""


class CgBreakdownError(RuntimeError):
    """p^T A p <= 0 encountered: the operator is not SPD on this subspace."""


class CgConvergenceError(RuntimeError):
    """CG failed to reach the requested tolerance within maxit."""


def to_csr(matrix):
    """Canonical CSR: sorted column indices, duplicates summed."""
    out = sparse.csr_matrix(matrix)
    out.sum_duplicates()
    out.sort_indices()
    return out


def spmv(matrix, x):
    """Sparse matrix-vector product with a shape check."""
    x = np.asarray(x)
    if matrix.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: {matrix.shape} @ {x.shape}")
    return matrix @ x


@dataclass(eq=False)
class Factorization:
    """Opaque LU factors of a square sparse matrix; solves are reusable."""

    shape: tuple
    _lu: object

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"rhs length {b.shape[0]} does not match {self.shape}")
        return self._lu.solve(b)


def factorize(matrix):
    """LU-factorize a square sparse matrix (deterministic COLAMD ordering).

    Raises SingularMatrixError naming an empty row/column when the matrix is
    structurally singular, or relaying the pivot failure otherwise.
    """
    matrix = sparse.csc_matrix(matrix)
    n, m = matrix.shape
    if n != m:
        raise ValueError(f"cannot factorize non-square matrix {matrix.shape}")
    col_counts = np.diff(matrix.indptr)
    if (col_counts == 0).any():
        raise SingularMatrixError(
            f"structurally singular: column {int(np.argmin(col_counts))} is empty"
        )
    row_counts = np.bincount(matrix.indices, minlength=n)
    if (row_counts == 0).any():
        raise SingularMatrixError(
            f"structurally singular: row {int(np.argmin(row_counts))} is empty"
        )
    try:
        lu = splu(matrix)
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(f"numerically singular: {exc}") from exc
    return Factorization(shape=(n, m), _lu=lu)


def solve(factorization, b):
    return factorization.solve(b)


def cg_solve(matrix, b, tol=1e-10, maxit=None, preconditioner="none"):
    """Conjugate gradients for SPD systems.

    Returns (x, iterations) once the relative residual drops below tol.
    preconditioner: "none" or "jacobi". Raises CgBreakdownError when a
    search direction has non-positive curvature (non-SPD input) and
    CgConvergenceError when maxit is exhausted.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"shape mismatch: {matrix.shape} vs rhs {b.shape}")
    if maxit is None:
        maxit = 10 * n
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(n), 0

    if preconditioner == "jacobi":
        diag = matrix.diagonal()
        if (diag <= 0).any():
            raise CgBreakdownError("jacobi preconditioner needs a positive diagonal")
        apply_prec = lambda r: r / diag
    elif preconditioner == "none":
        apply_prec = lambda r: r
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    x = np.zeros(n)
    r = b.copy()
    z = apply_prec(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, maxit + 1):
        ap = matrix @ p
        pap = p @ ap
        if pap <= 0.0:
            raise CgBreakdownError(f"non-positive curvature p^T A p = {pap:g} at iteration {it}")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol * b_norm:
            return x, it
        z = apply_prec(r)
        rz_next = r @ z
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise CgConvergenceError(f"no convergence within {maxit} iterations")


@dataclass(eq=False)
class EigenEstimate:
    value: float
    converged: bool
    iterations: int
    residual: float  # last relative Rayleigh-quotient change


def _rayleigh_iteration(apply_op, n, tol, maxit, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rho = 0.0
    quiet = 0  # consecutive iterations below tol, to avoid stopping on a stall
    for it in range(1, maxit + 1):
        w = apply_op(v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return EigenEstimate(0.0, True, it, 0.0)
        rho_new = float(v @ w)
        change = abs(rho_new - rho) / max(abs(rho_new), np.finfo(float).tiny)
        v = w / norm
        rho = rho_new
        quiet = quiet + 1 if (it > 1 and change < tol) else 0
        if quiet >= 2:
            return EigenEstimate(rho, True, it, change)
    return EigenEstimate(rho, False, maxit, change)


def extreme_eigenvalue_estimates(matrix, factorization=None, tol=1e-9, maxit=20000, seed=1234):
    """Largest/smallest eigenvalue estimates of an SPD matrix.

    Power iteration on A gives lambda_max; inverse iteration through an LU
    factorization (computed here if not supplied) gives lambda_min. Both
    stop when the Rayleigh quotient's relative change drops below tol;
    non-convergence is flagged on the estimate, which is still returned.
    """
    n = matrix.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    lam_max = _rayleigh_iteration(lambda v: matrix @ v, n, tol, maxit, seed)
    if factorization is None:
        factorization = factorize(matrix)
    inv = _rayleigh_iteration(lambda v: factorization.solve(v), n, tol, maxit, seed + 1)
    lam_min = EigenEstimate(
        value=1.0 / inv.value if inv.value != 0.0 else np.inf,
        converged=inv.converged,
        iterations=inv.iterations,
        residual=inv.residual,
    )
    return lam_max, lam_min

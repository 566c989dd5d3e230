"""Compressed-row matrices and a Jacobi-preconditioned conjugate gradient solver."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp


class ConvergenceError(RuntimeError):
    """CG did not reach the requested residual reduction."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class SparseMatrix:
    """Square CSR matrix with sorted, unique column indices per row."""

    row_offsets: np.ndarray
    column_indices: np.ndarray
    values: np.ndarray
    n: int

    @classmethod
    def from_triplets(cls, rows, cols, vals, n: int) -> "SparseMatrix":
        """Sum duplicate ``(row, col)`` entries into a CSR matrix."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls.from_scipy(m)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.astype(float), m.shape[0])

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls.from_scipy(sp.identity(n, format="csr"))

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.column_indices, self.row_offsets), shape=(self.n, self.n))

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def submatrix(self, rows: np.ndarray, cols: np.ndarray):
        """Rectangular block as a scipy CSR matrix."""
        return self._csr[rows][:, cols]

    def principal_submatrix(self, idx: np.ndarray) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self._csr[idx][:, idx])

    def is_symmetric(self, rtol: float = 1e-14) -> bool:
        a = self._csr
        diff = abs(a - a.T)
        scale = abs(a).max() if a.nnz else 0.0
        return diff.nnz == 0 or diff.max() <= rtol * scale

    def __matmul__(self, x):
        return matvec(self, x)


def matvec(A: SparseMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, vector has shape {x.shape}")
    return A._csr @ x


@dataclass(frozen=True)
class CgConfig:
    rel_tolerance: float = 1e-12
    max_iterations: int | None = None  # None means 10 * n

    def __post_init__(self):
        if not 0.0 < self.rel_tolerance < 1.0:
            raise ValueError("rel_tolerance must lie in (0, 1)")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def solve_cg(A: SparseMatrix, b, config: CgConfig = CgConfig(), x0=None) -> tuple[np.ndarray, int]:
    """Preconditioned CG with the matrix diagonal as preconditioner.

    Stops once the true residual satisfies ``|b - A x| <= tol |b|``.  The
    recursively updated residual drifts from the true one, so on apparent
    convergence the true residual is recomputed and the iteration restarted
    from the current iterate if needed.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise ValueError(f"dimension mismatch: matrix is {A.n}x{A.n}, rhs has shape {b.shape}")
    max_it = config.max_iterations if config.max_iterations is not None else 10 * max(A.n, 1)
    a = A._csr
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(A.n), 0
    target = config.rel_tolerance * bnorm
    inv_diag = 1.0 / A.diagonal()

    r = b - a @ x if x0 is not None else b.copy()
    it = 0
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x, 0
    rnorm = np.inf
    while it < max_it:
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        while it < max_it:
            Ap = a @ p
            alpha = rz / (p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) <= target:
                break
            z = inv_diag * r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
        r = b - a @ x
        prev, rnorm = rnorm, np.linalg.norm(r)
        if rnorm <= target:
            return x, it
        if rnorm >= prev:
            # restarts no longer reduce the true residual: rounding floor
            break
    raise ConvergenceError(
        f"CG stopped after {it} iterations with relative residual {rnorm / bnorm:.3e}"
        f" (target {config.rel_tolerance:.1e})",
        iterations=it,
        residual=rnorm / bnorm,
    )


def solve_dense_oracle(A: SparseMatrix, b, max_size: int = 5000) -> np.ndarray:
    """Dense LU solve with partial pivoting, for cross-checking CG."""
    if A.n > max_size:
        raise ValueError(f"dense oracle limited to n <= {max_size}, got {A.n}")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as LinAlgError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A.to_dense(), check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        raise np.linalg.LinAlgError("singular matrix")
    return scipy.linalg.lu_solve((lu, piv), np.asarray(b, dtype=float))

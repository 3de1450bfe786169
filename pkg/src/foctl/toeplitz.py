"""Block-Toeplitz operators and solvers.

A block-Toeplitz matrix is stored through its two generator sequences (first
block column and first block row, sharing block (0,0)).  The matrix-vector
product runs block-row-wise off the generators in O(T^2 n^2) time with
O(T n^2) storage; the dense path materializes the matrix for factorization.

``LastRowCorrected`` wraps a block-Toeplitz operator whose final block row is
replaced outright, which is how the multiplier system looks when the terminal
state weight differs from the running one: the structured fast path is kept
and the rank-<=n correction rides along in both the matvec and the dense
materialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import IterativeSolveError, SingularSystemError

__all__ = ["BlockToeplitz", "LastRowCorrected", "matvec", "solve"]

_COND_LIMIT = 1e14


@dataclass(frozen=True)
class BlockToeplitz:
    """Block-Toeplitz matrix given by its first block column and first block row.

    Block (i, j) equals ``first_block_col[i - j]`` for i >= j and
    ``first_block_row[j - i]`` for j >= i.
    """

    first_block_col: np.ndarray
    first_block_row: np.ndarray

    def __post_init__(self):
        col = np.asarray(self.first_block_col, dtype=float)
        row = np.asarray(self.first_block_row, dtype=float)
        if col.ndim != 3 or row.ndim != 3:
            raise ValueError("generators must be stacks of square blocks, shape (T, n, n)")
        if col.shape != row.shape or col.shape[1] != col.shape[2]:
            raise ValueError(
                f"generator shapes disagree or blocks not square: {col.shape} vs {row.shape}"
            )
        if not np.array_equal(col[0], row[0]):
            raise ValueError("block (0, 0) must be shared by both generators")
        col = col.copy()
        row = row.copy()
        col.setflags(write=False)
        row.setflags(write=False)
        object.__setattr__(self, "first_block_col", col)
        object.__setattr__(self, "first_block_row", row)

    @property
    def num_blocks(self) -> int:
        return self.first_block_col.shape[0]

    @property
    def block_size(self) -> int:
        return self.first_block_col.shape[1]

    @property
    def dim(self) -> int:
        return self.num_blocks * self.block_size

    @classmethod
    def identity(cls, num_blocks: int, block_size: int) -> "BlockToeplitz":
        col = np.zeros((num_blocks, block_size, block_size))
        col[0] = np.eye(block_size)
        return cls(first_block_col=col, first_block_row=col.copy())

    @classmethod
    def from_dense(cls, dense: np.ndarray, block_size: int, atol: float = 0.0) -> "BlockToeplitz":
        """Rebuild the generator form of a genuinely block-Toeplitz dense matrix."""
        a = np.asarray(dense, dtype=float)
        n = int(block_size)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % n:
            raise ValueError(f"dense matrix of shape {a.shape} is not square in {n}-blocks")
        t = a.shape[0] // n
        col = np.stack([a[i * n : (i + 1) * n, :n] for i in range(t)])
        row = np.stack([a[:n, j * n : (j + 1) * n] for j in range(t)])
        out = cls(first_block_col=col, first_block_row=row)
        if not np.allclose(out.to_dense(), a, rtol=0.0, atol=atol):
            raise ValueError("matrix is not block Toeplitz at the requested block size")
        return out

    def block(self, i: int, j: int) -> np.ndarray:
        return self.first_block_col[i - j] if i >= j else self.first_block_row[j - i]

    def to_dense(self) -> np.ndarray:
        t, n = self.num_blocks, self.block_size
        out = np.empty((t * n, t * n))
        for i in range(t):
            for j in range(t):
                out[i * n : (i + 1) * n, j * n : (j + 1) * n] = self.block(i, j)
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        t, n = self.num_blocks, self.block_size
        if v.shape != (t * n,):
            raise ValueError(f"vector has shape {v.shape}, expected ({t * n},)")
        blocks = v.reshape(t, n)
        out = np.empty((t, n))
        for i in range(t):
            acc = np.zeros(n)
            for j in range(t):
                acc += self.block(i, j) @ blocks[j]
            out[i] = acc
        return out.reshape(t * n)


@dataclass(frozen=True)
class LastRowCorrected:
    """Block-Toeplitz operator with its last block row replaced."""

    base: BlockToeplitz
    last_block_row: np.ndarray

    def __post_init__(self):
        lbr = np.asarray(self.last_block_row, dtype=float).copy()
        n, dim = self.base.block_size, self.base.dim
        if lbr.shape != (n, dim):
            raise ValueError(f"last block row must have shape ({n}, {dim}), got {lbr.shape}")
        lbr.setflags(write=False)
        object.__setattr__(self, "last_block_row", lbr)

    @property
    def num_blocks(self) -> int:
        return self.base.num_blocks

    @property
    def block_size(self) -> int:
        return self.base.block_size

    @property
    def dim(self) -> int:
        return self.base.dim

    def to_dense(self) -> np.ndarray:
        out = self.base.to_dense()
        out[-self.block_size :, :] = self.last_block_row
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.base.matvec(v)
        out[-self.block_size :] = self.last_block_row @ np.asarray(v, dtype=float)
        return out


def matvec(operator, v: np.ndarray) -> np.ndarray:
    """Structured matrix-vector product (dispatches to the operator)."""
    return operator.matvec(v)


def solve(
    operator,
    rhs: np.ndarray,
    method: str = "dense",
    tol: float = 1e-10,
    restart: int = 50,
) -> np.ndarray:
    """Solve ``operator @ x = rhs``.

    ``method="dense"`` materializes and factorizes the matrix, rejecting
    singular or numerically unusable systems with a condition estimate.
    ``method="iterative"`` runs a restarted residual-minimizing Krylov
    iteration against the structured matvec, stopping at relative residual
    ``tol`` or after 10 * dim iterations.
    """
    rhs = np.asarray(rhs, dtype=float)
    dim = operator.dim
    if rhs.shape != (dim,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({dim},)")

    if method == "dense":
        dense = operator.to_dense()
        cond = np.linalg.cond(dense)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularSystemError(
                f"system is singular or too ill-conditioned to solve (cond ~ {cond:.3e})",
                cond_estimate=cond,
            )
        return np.linalg.solve(dense, rhs)

    if method == "iterative":
        rhs_norm = np.linalg.norm(rhs)
        if rhs_norm == 0.0:
            return np.zeros(dim)
        linop = spla.LinearOperator((dim, dim), matvec=operator.matvec)
        maxiter = 10 * dim
        x, info = spla.gmres(
            linop,
            rhs,
            rtol=tol,
            atol=0.0,
            restart=min(restart, dim),
            maxiter=maxiter,
        )
        residual = np.linalg.norm(operator.matvec(x) - rhs) / rhs_norm
        if info != 0 or not np.isfinite(residual) or residual > 10 * tol:
            raise IterativeSolveError(
                f"Krylov iteration stopped at relative residual {residual:.3e} "
                f"(target {tol:.1e}, info={info})",
                residual=residual,
                iterations=maxiter if info == 0 else info,
            )
        return x

    raise ValueError(f"unknown solve method {method!r}; use 'dense' or 'iterative'")

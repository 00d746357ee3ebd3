"""Symmetric positive-definite block-tridiagonal systems.

Factor once with a block Cholesky sweep, then solve by forward and backward
substitution: the two-pass pattern that makes each Gauss-Newton iteration
cost linear in the number of time steps. Only the sub-diagonal blocks are
stored; symmetry is structural.

Solves finish with up to two iterative-refinement passes using residuals
computed at the matrix's own dtype. Systems assembled by
:mod:`gnsmooth.statespace` carry extended-precision blocks, which keeps the
solution accurate even when extreme noise-scale ratios drive the normal
system's conditioning toward 1/eps.
"""

import contextlib
import contextvars
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite

_OPS: contextvars.ContextVar[dict | None] = contextvars.ContextVar("_OPS", default=None)

_REFINEMENT_PASSES = 2


@contextlib.contextmanager
def count_operations():
    """Count block-level operations performed by factor/solve.

    Yields a dict with keys ``cholesky``, ``triangular_solve`` and ``matmul``;
    used to assert that work grows linearly with the number of blocks.
    """
    counter = {"cholesky": 0, "triangular_solve": 0, "matmul": 0}
    token = _OPS.set(counter)
    try:
        yield counter
    finally:
        _OPS.reset(token)


def _tick(kind, amount=1):
    counter = _OPS.get()
    if counter is not None:
        counter[kind] += amount


@dataclass(frozen=True)
class BlockTridiagonalMatrix:
    """Block-tridiagonal symmetric matrix with M diagonal blocks of size n.

    ``offdiag[k]`` is the sub-diagonal block coupling row k+1 to column k;
    the super-diagonal is its transpose by symmetry.
    """

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag)
        off = np.asarray(self.offdiag)
        if diag.ndim != 3 or diag.shape[1] != diag.shape[2]:
            raise DimensionMismatch(f"diag must be (M, n, n), got {diag.shape}")
        M, n = diag.shape[0], diag.shape[1]
        if M < 1 or n < 1:
            raise DimensionMismatch("need M >= 1 and n >= 1")
        if off.shape != (M - 1, n, n):
            raise DimensionMismatch(
                f"offdiag must be ({M - 1}, {n}, {n}), got {off.shape}"
            )
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", off)

    @property
    def n(self) -> int:
        return self.diag.shape[1]

    @property
    def M(self) -> int:
        return self.diag.shape[0]

    def to_dense(self) -> np.ndarray:
        """Assemble the full symmetric matrix (for tests and small systems)."""
        n, M = self.n, self.M
        dense = np.zeros((n * M, n * M), dtype=self.diag.dtype)
        for k in range(M):
            dense[k * n : (k + 1) * n, k * n : (k + 1) * n] = self.diag[k]
        for k in range(M - 1):
            dense[(k + 1) * n : (k + 2) * n, k * n : (k + 1) * n] = self.offdiag[k]
            dense[k * n : (k + 1) * n, (k + 1) * n : (k + 2) * n] = self.offdiag[k].T
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Product A @ x at the matrix dtype, x given as a flat (n*M,) vector."""
        n, M = self.n, self.M
        xs = np.asarray(x, dtype=self.diag.dtype).reshape(M, n)
        out = np.einsum("kij,kj->ki", self.diag, xs)
        if M > 1:
            out[1:] += np.einsum("kij,kj->ki", self.offdiag, xs[:-1])
            out[:-1] += np.einsum("kji,kj->ki", self.offdiag, xs[1:])
        return out.reshape(-1)


@dataclass(frozen=True)
class BlockCholeskyFactor:
    """Block Cholesky factor: A = L_blk L_blk^T.

    L_blk is block lower-bidiagonal with lower-triangular diagonal blocks
    ``chol_diag[k]`` and sub-diagonal coupling blocks ``coupling[k]``. The
    source matrix is kept for residual refinement during solves, and the
    per-block triangular inverses are cached so substitution sweeps are
    plain small matrix products.
    """

    chol_diag: np.ndarray
    coupling: np.ndarray
    matrix: BlockTridiagonalMatrix = field(repr=False)
    chol_diag_inv: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.chol_diag.shape[1]

    @property
    def M(self) -> int:
        return self.chol_diag.shape[0]


def factor(A: BlockTridiagonalMatrix) -> BlockCholeskyFactor:
    """Block Cholesky factorization of an SPD block-tridiagonal matrix.

    Raises NotPositiveDefinite(k) if pivot block k has no Cholesky factor.
    Cost is linear in the number of blocks.
    """
    n, M = A.n, A.M
    diag = np.asarray(A.diag, dtype=np.float64)
    off = np.asarray(A.offdiag, dtype=np.float64)
    L = np.zeros((M, n, n))
    Linv = np.zeros((M, n, n))
    C = np.zeros((M - 1, n, n))
    eye = np.eye(n)
    pivot = diag[0]
    for k in range(M):
        try:
            L[k] = np.linalg.cholesky(pivot)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(k, str(exc)) from exc
        _tick("cholesky")
        Linv[k] = scipy.linalg.solve_triangular(L[k], eye, lower=True)
        if k + 1 < M:
            # C_k solves C_k L_k^T = B_k, i.e. C_k = B_k L_k^{-T}
            C[k] = off[k] @ Linv[k].T
            _tick("triangular_solve")
            pivot = diag[k + 1] - C[k] @ C[k].T
            _tick("matmul")
    return BlockCholeskyFactor(chol_diag=L, coupling=C, matrix=A, chol_diag_inv=Linv)


def reconstruct(factor: BlockCholeskyFactor) -> BlockTridiagonalMatrix:
    """Recompute L_blk L_blk^T, block-tridiagonal by construction."""
    L, C = factor.chol_diag, factor.coupling
    M = factor.M
    diag = np.einsum("kij,klj->kil", L, L)
    if M > 1:
        diag[1:] += np.einsum("kij,klj->kil", C, C)
    off = np.einsum("kij,klj->kil", C, L[:-1]) if M > 1 else C.copy()
    return BlockTridiagonalMatrix(diag=diag, offdiag=off)


def _substitute(fac: BlockCholeskyFactor, rhs_blocks: np.ndarray) -> np.ndarray:
    """Forward then backward substitution through the block factor."""
    Linv, C = fac.chol_diag_inv, fac.coupling
    n, M = fac.n, fac.M
    y = np.zeros((M, n))
    y[0] = Linv[0] @ rhs_blocks[0]
    _tick("triangular_solve")
    for k in range(1, M):
        y[k] = Linv[k] @ (rhs_blocks[k] - C[k - 1] @ y[k - 1])
        _tick("triangular_solve")
    x = np.zeros((M, n))
    x[M - 1] = Linv[M - 1].T @ y[M - 1]
    _tick("triangular_solve")
    for k in range(M - 2, -1, -1):
        x[k] = Linv[k].T @ (y[k] - C[k].T @ x[k + 1])
        _tick("triangular_solve")
    return x.reshape(-1)


def solve(factor: BlockCholeskyFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs using a previously computed factor.

    The initial two-pass substitution runs in float64; residual refinement
    then reuses the factor, with residuals evaluated at the source matrix's
    dtype.
    """
    n, M = factor.n, factor.M
    rhs = np.asarray(rhs)
    if rhs.shape != (n * M,):
        raise DimensionMismatch(f"rhs must have length {n * M}, got {rhs.shape}")
    A = factor.matrix
    rhs_w = rhs.astype(A.diag.dtype, copy=False)
    x = _substitute(factor, np.asarray(rhs, dtype=np.float64).reshape(M, n))
    for _ in range(_REFINEMENT_PASSES):
        residual = np.asarray(rhs_w - A.matvec(x), dtype=np.float64)
        delta = _substitute(factor, residual.reshape(M, n))
        x = x + delta
        # A small first correction means the solution is already close to
        # working precision; further passes cannot improve it.
        if np.linalg.norm(delta) <= 1e-10 * np.linalg.norm(x):
            break
    return x

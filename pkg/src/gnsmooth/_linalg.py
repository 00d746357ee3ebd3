"""Batched Cholesky and triangular substitution for stacks of small matrices.

LAPACK-backed routines only cover float64, while the normal-system assembly
runs in extended precision where the platform provides it. These helpers are
dtype-generic: they loop over the (small) matrix dimension and vectorize over
the stack axis.
"""

import numpy as np

from .errors import NotPositiveDefinite

# Extended-precision dtype used for assembling ill-conditioned quadratic
# forms. On platforms without a wider hardware type this aliases float64.
EXTENDED = np.longdouble


def cholesky_stack(mats: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of every matrix in a (K, n, n) stack.

    Raises NotPositiveDefinite with the index of the first failing entry.
    """
    mats = np.asarray(mats)
    K, n, _ = mats.shape
    L = np.zeros_like(mats)
    for j in range(n):
        pivot = mats[:, j, j] - np.einsum("kp,kp->k", L[:, j, :j], L[:, j, :j])
        bad = ~(pivot > 0)  # also catches NaN
        if np.any(bad):
            raise NotPositiveDefinite(int(np.argmax(bad)))
        L[:, j, j] = np.sqrt(pivot)
        if j + 1 < n:
            below = mats[:, j + 1 :, j] - np.einsum(
                "kip,kp->ki", L[:, j + 1 :, :j], L[:, j, :j]
            )
            L[:, j + 1 :, j] = below / L[:, j, j][:, None]
    return L


def solve_lower_stack(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve L Y = B per stack entry; B may be (K, n) vectors or (K, n, m)."""
    vec = B.ndim == 2
    if vec:
        B = B[..., None]
    out = np.zeros(B.shape, dtype=np.result_type(L, B))
    n = L.shape[1]
    for i in range(n):
        acc = B[:, i, :] - np.einsum("kp,kpm->km", L[:, i, :i], out[:, :i, :])
        out[:, i, :] = acc / L[:, i, i][:, None]
    return out[..., 0] if vec else out


def solve_lower_t_stack(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve L^T Y = B per stack entry (back substitution)."""
    vec = B.ndim == 2
    if vec:
        B = B[..., None]
    out = np.zeros(B.shape, dtype=np.result_type(L, B))
    n = L.shape[1]
    for i in range(n - 1, -1, -1):
        acc = B[:, i, :] - np.einsum("kp,kpm->km", L[:, i + 1 :, i], out[:, i + 1 :, :])
        out[:, i, :] = acc / L[:, i, i][:, None]
    return out[..., 0] if vec else out


def spd_solve_stack(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Apply (L L^T)^{-1} to B per stack entry, via two triangular solves."""
    return solve_lower_t_stack(L, solve_lower_stack(L, B))

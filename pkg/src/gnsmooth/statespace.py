"""Smoothing problem definition and Gauss-Newton system assembly.

A smoothing problem couples a Markov process model, a measurement model and
the observed data into one weighted nonlinear least-squares objective over
the whole state sequence:

    phi(x) = 1/2 |x_0 - x0bar|^2_{Q0^-1}
           + 1/2 sum_k |x_{k+1} - g(x_k)|^2_{Qk^-1}
           + 1/2 sum_k |h(x_k) - z_k|^2_{Rk^-1}

Linearizing the residuals at a current sequence yields a normal system whose
matrix couples only adjacent steps, i.e. a symmetric positive-definite
block-tridiagonal system solved by :mod:`gnsmooth.blocktridiag`. The right
hand side follows the convention that the solution of the assembled system
is the full updated state sequence (not the increment); callers form the
step as ``solution - current`` when they need it.

Covariance weights are applied through Cholesky solves of the stored
covariances, never through explicit inverses. Assembly runs in extended
precision (see :data:`gnsmooth._linalg.EXTENDED`) because the normal system
squares the conditioning of the underlying least-squares problem.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from ._linalg import (
    EXTENDED,
    cholesky_stack,
    solve_lower_stack,
    spd_solve_stack,
)
from .blocktridiag import BlockTridiagonalMatrix
from .errors import DimensionMismatch


@dataclass(frozen=True)
class StateSequence:
    """A full trajectory estimate: M state blocks of dimension n.

    Benchmark systems order each block as [acceleration, velocity, position].
    """

    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=np.float64)
        if blocks.ndim != 2 or blocks.shape[0] < 1:
            raise DimensionMismatch(f"blocks must be (M, n) with M >= 1, got {blocks.shape}")
        if not np.all(np.isfinite(blocks)):
            raise ValueError("state sequence contains non-finite entries")
        object.__setattr__(self, "blocks", blocks)

    @property
    def M(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    def as_vector(self) -> np.ndarray:
        return self.blocks.reshape(-1).copy()

    @classmethod
    def from_vector(cls, vec: np.ndarray, n: int) -> "StateSequence":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1 or vec.size % n != 0:
            raise DimensionMismatch(f"vector of size {vec.size} is not a multiple of n={n}")
        return cls(vec.reshape(-1, n))


@dataclass(frozen=True)
class ProcessModel:
    """Markov transition model plus the prior on the first state.

    ``transition`` and ``jacobian`` are vectorized over a stack of states:
    they map (K, n) arrays to (K, n) predictions and (K, n, n) Jacobians.
    ``transition_covs`` holds one SPD covariance per transition, so there are
    M - 1 of them for an M-step problem; the prior block has its own
    covariance, which is conventionally left unscaled by the noise-level
    parameters.
    """

    transition: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    transition_covs: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray

    def __post_init__(self):
        covs = np.asarray(self.transition_covs, dtype=np.float64)
        mean = np.asarray(self.prior_mean, dtype=np.float64)
        pcov = np.asarray(self.prior_cov, dtype=np.float64)
        n = mean.shape[0]
        if covs.ndim != 3 or covs.shape[1:] != (n, n):
            raise DimensionMismatch(f"transition_covs must be (M-1, {n}, {n}), got {covs.shape}")
        if pcov.shape != (n, n):
            raise DimensionMismatch(f"prior_cov must be ({n}, {n}), got {pcov.shape}")
        object.__setattr__(self, "transition_covs", covs)
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_cov", pcov)

    @property
    def n(self) -> int:
        return self.prior_mean.shape[0]


@dataclass(frozen=True)
class MeasurementModel:
    """Observation map, per-step SPD noise covariances and the data.

    ``observe`` and ``jacobian`` are vectorized like the process maps,
    returning (K, m) and (K, m, n) arrays.
    """

    observe: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    noise_covs: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        covs = np.asarray(self.noise_covs, dtype=np.float64)
        z = np.asarray(self.observations, dtype=np.float64)
        if z.ndim != 2:
            raise DimensionMismatch(f"observations must be (M, m), got {z.shape}")
        M, m = z.shape
        if covs.shape != (M, m, m):
            raise DimensionMismatch(f"noise_covs must be ({M}, {m}, {m}), got {covs.shape}")
        object.__setattr__(self, "noise_covs", covs)
        object.__setattr__(self, "observations", z)

    @property
    def M(self) -> int:
        return self.observations.shape[0]

    @property
    def m(self) -> int:
        return self.observations.shape[1]


class _Whiteners(NamedTuple):
    """Cholesky factors of all covariances, in working and extended precision."""

    prior: np.ndarray        # (1, n, n) float64
    trans: np.ndarray        # (M-1, n, n) float64
    noise: np.ndarray        # (M, m, m) float64
    prior_ext: np.ndarray
    trans_ext: np.ndarray
    noise_ext: np.ndarray


@dataclass(frozen=True)
class SmoothingProblem:
    """Immutable bundle of process model, measurement model and data."""

    process: ProcessModel
    measurement: MeasurementModel

    def __post_init__(self):
        if self.process.transition_covs.shape[0] != self.measurement.M - 1:
            raise DimensionMismatch(
                f"got {self.process.transition_covs.shape[0]} transition covariances "
                f"for {self.measurement.M} measurement steps"
            )

    @property
    def n(self) -> int:
        return self.process.n

    @property
    def m(self) -> int:
        return self.measurement.m

    @property
    def M(self) -> int:
        return self.measurement.M

    @cached_property
    def _whiteners(self) -> _Whiteners:
        prior = cholesky_stack(self.process.prior_cov[None])
        trans = cholesky_stack(self.process.transition_covs)
        noise = cholesky_stack(self.measurement.noise_covs)
        return _Whiteners(
            prior=prior,
            trans=trans,
            noise=noise,
            prior_ext=cholesky_stack(self.process.prior_cov[None].astype(EXTENDED)),
            trans_ext=cholesky_stack(self.process.transition_covs.astype(EXTENDED)),
            noise_ext=cholesky_stack(self.measurement.noise_covs.astype(EXTENDED)),
        )

    def _check_state(self, x: StateSequence):
        if x.M != self.M or x.n != self.n:
            raise DimensionMismatch(
                f"state sequence is ({x.M}, {x.n}), problem needs ({self.M}, {self.n})"
            )


def _residuals(problem: SmoothingProblem, blocks: np.ndarray):
    """Prior, transition and measurement residuals at a state stack."""
    prior_res = blocks[:1] - problem.process.prior_mean
    if problem.M > 1:
        trans_res = blocks[1:] - problem.process.transition(blocks[:-1])
    else:
        trans_res = np.zeros((0, problem.n))
    meas_res = problem.measurement.observe(blocks) - problem.measurement.observations
    return prior_res, trans_res, meas_res


def evaluate_objective(problem: SmoothingProblem, x: StateSequence) -> float:
    """Weighted least-squares objective phi(x); zero iff all residuals vanish."""
    problem._check_state(x)
    w = problem._whiteners
    prior_res, trans_res, meas_res = _residuals(problem, x.blocks)
    y0 = solve_lower_stack(w.prior, prior_res)
    value = 0.5 * float(np.sum(y0 * y0))
    if problem.M > 1:
        yt = solve_lower_stack(w.trans, trans_res)
        value += 0.5 * float(np.sum(yt * yt))
    ym = solve_lower_stack(w.noise, meas_res)
    value += 0.5 * float(np.sum(ym * ym))
    return value


def objective_gradient(problem: SmoothingProblem, x: StateSequence) -> np.ndarray:
    """Gradient of the objective as a flat (n*M,) vector."""
    problem._check_state(x)
    w = problem._whiteners
    blocks = x.blocks
    prior_res, trans_res, meas_res = _residuals(problem, blocks)
    grad = np.zeros((problem.M, problem.n))
    grad[:1] += spd_solve_stack(w.prior, prior_res)
    if problem.M > 1:
        A = problem.process.jacobian(blocks[:-1])
        u = spd_solve_stack(w.trans, trans_res)
        grad[1:] += u
        grad[:-1] -= np.einsum("kij,ki->kj", A, u)
    C = problem.measurement.jacobian(blocks)
    v = spd_solve_stack(w.noise, meas_res)
    grad += np.einsum("kij,ki->kj", C, v)
    return grad.reshape(-1)


def assemble_normal_system(
    problem: SmoothingProblem, x: StateSequence
) -> tuple[BlockTridiagonalMatrix, np.ndarray]:
    """Gauss-Newton normal system linearized at x.

    Returns the block-tridiagonal matrix and a right hand side such that the
    solution of the system is the updated state sequence. All quadratic-form
    products run in extended precision; the matrix and rhs keep that dtype so
    the solver can refine against them.
    """
    problem._check_state(x)
    w = problem._whiteners
    n, m, M = problem.n, problem.m, problem.M
    blocks = x.blocks.astype(EXTENDED)

    diag = np.zeros((M, n, n), dtype=EXTENDED)
    off = np.zeros((M - 1, n, n), dtype=EXTENDED)
    rhs = np.zeros((M, n), dtype=EXTENDED)

    eye = np.eye(n, dtype=EXTENDED)
    P = solve_lower_stack(w.prior_ext, eye[None])  # (1, n, n), prior whitener
    diag[0] += np.einsum("kij,kil->kjl", P, P)[0]
    rhs[0] += np.einsum("kij,ki->kj", P, solve_lower_stack(w.prior_ext, problem.process.prior_mean[None].astype(EXTENDED)))[0]

    if M > 1:
        A = np.asarray(problem.process.jacobian(blocks[:-1]), dtype=EXTENDED)
        pred = np.asarray(problem.process.transition(blocks[:-1]), dtype=EXTENDED)
        affine = pred - np.einsum("kij,kj->ki", A, blocks[:-1])
        U = solve_lower_stack(w.trans_ext, A)
        V = solve_lower_stack(w.trans_ext, np.broadcast_to(eye, (M - 1, n, n)))
        diag[:-1] += np.einsum("kij,kil->kjl", U, U)
        diag[1:] += np.einsum("kij,kil->kjl", V, V)
        off[:] = -np.einsum("kij,kil->kjl", V, U)
        u = solve_lower_stack(w.trans_ext, affine)
        rhs[:-1] -= np.einsum("kij,ki->kj", U, u)
        rhs[1:] += np.einsum("kij,ki->kj", V, u)

    C = np.asarray(problem.measurement.jacobian(blocks), dtype=EXTENDED)
    S = solve_lower_stack(w.noise_ext, C)
    diag += np.einsum("kij,kil->kjl", S, S)
    predicted = np.asarray(problem.measurement.observe(blocks), dtype=EXTENDED)
    target = (
        problem.measurement.observations.astype(EXTENDED)
        - predicted
        + np.einsum("kij,kj->ki", C, blocks)
    )
    s = solve_lower_stack(w.noise_ext, target)
    rhs += np.einsum("kij,ki->kj", S, s)

    return BlockTridiagonalMatrix(diag=diag, offdiag=off), rhs.reshape(-1)


def finite_difference_jacobian(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued function at x."""
    x = np.asarray(x, dtype=np.float64)
    fx = np.asarray(func(x), dtype=np.float64)
    jac = np.zeros((fx.size, x.size))
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        jac[:, j] = (np.asarray(func(x + step)) - np.asarray(func(x - step))) / (2.0 * h)
    return jac

"""Unscented Kalman filtering and Rauch-Tung-Striebel smoothing.

The filter represents each Gaussian belief by 2n+1 deterministically chosen
sigma points whose weighted sample mean and covariance reproduce the belief
exactly, propagates the points through the nonlinear maps, and reads the
predicted moments back off the samples. Both benchmark systems have additive
noise, so the non-augmented form applies: process and measurement noise
covariances are added to the propagated sample covariances.

The backward pass is the standard RTS recursion driven by the cross
covariances between consecutive states that the forward pass stores.

Numerical policy: every covariance produced by an update is re-symmetrized;
if its Cholesky factorization still fails when sigma points are drawn from
it, a single jitter of 1e-10 on the diagonal is tried before giving up.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite
from .gn import SmootherResult
from .statespace import SmoothingProblem, StateSequence

_JITTER = 1e-10


@dataclass(frozen=True)
class UTParams:
    """Unscented transform scaling parameters.

    ``alpha`` controls the spread of the sigma points around the mean,
    ``beta`` folds in prior knowledge about the distribution (2 is exact for
    Gaussians), and ``kappa`` is a secondary scale. The derived scale is
    lambda = alpha^2 (n + kappa) - n, and n + lambda must be positive so the
    point spread sqrt(n + lambda) is real.
    """

    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0

    def lam(self, n: int) -> float:
        return self.alpha**2 * (n + self.kappa) - n


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and SPD covariance of a Gaussian state estimate."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionMismatch(f"cov shape {cov.shape} does not match mean {mean.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


class SigmaPoints(NamedTuple):
    """2n+1 points with separate mean and covariance weights."""

    points: np.ndarray        # (2n+1, n)
    mean_weights: np.ndarray  # (2n+1,)
    cov_weights: np.ndarray   # (2n+1,)


@dataclass(frozen=True)
class FilteredTrajectory:
    """Forward-pass record: predicted and updated beliefs per step, plus the
    cross covariance between each state and its successor's prediction."""

    predicted_means: np.ndarray   # (M, n)
    predicted_covs: np.ndarray    # (M, n, n)
    filtered_means: np.ndarray    # (M, n)
    filtered_covs: np.ndarray     # (M, n, n)
    cross_covs: np.ndarray        # (M-1, n, n)

    @property
    def M(self) -> int:
        return self.filtered_means.shape[0]

    @property
    def n(self) -> int:
        return self.filtered_means.shape[1]


def sigma_points(belief: GaussianBelief, params: UTParams) -> SigmaPoints:
    """Sigma points of a belief: the mean plus symmetric excursions along the
    scaled columns of the covariance's Cholesky factor.

    The weighted sample mean reproduces the belief mean exactly (the
    excursions cancel pairwise) and the weighted sample covariance
    reproduces the covariance up to roundoff.
    """
    n = belief.mean.shape[0]
    lam = params.lam(n)
    scale = n + lam
    if scale <= 0:
        raise ValueError(f"alpha/kappa give n + lambda = {scale}, need > 0")
    try:
        chol = np.linalg.cholesky(belief.cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(detail="sigma point generation") from exc
    spread = np.sqrt(scale) * chol.T  # row i is the i-th excursion
    points = np.tile(belief.mean, (2 * n + 1, 1))
    points[1 : n + 1] += spread
    points[n + 1 :] -= spread
    mean_w = np.full(2 * n + 1, 0.5 / scale)
    mean_w[0] = lam / scale
    cov_w = mean_w.copy()
    cov_w[0] += 1.0 - params.alpha**2 + params.beta
    return SigmaPoints(points, mean_w, cov_w)


def _sample_moments(points, weights_mean, weights_cov, noise_cov=None):
    mean = weights_mean @ points
    dev = points - mean
    cov = np.einsum("i,ij,ik->jk", weights_cov, dev, dev)
    if noise_cov is not None:
        cov = cov + noise_cov
    return mean, 0.5 * (cov + cov.T)


def _belief_points(mean, cov, params):
    """Sigma points with the symmetrize-then-jitter fallback."""
    cov = 0.5 * (cov + cov.T)
    try:
        return sigma_points(GaussianBelief(mean, cov), params), cov
    except NotPositiveDefinite:
        jittered = cov + _JITTER * np.eye(cov.shape[0])
        return sigma_points(GaussianBelief(mean, jittered), params), jittered


def ukf_forward(
    problem: SmoothingProblem,
    init: GaussianBelief,
    params: UTParams | None = None,
) -> FilteredTrajectory:
    """Additive-noise unscented Kalman filter over all measurement steps.

    ``init`` is the belief about the first state before any data; the first
    measurement updates it directly, and each later step propagates sigma
    points through the transition, adds the process covariance, then updates
    with that step's measurement.
    """
    params = params or UTParams()
    n, M = problem.n, problem.M
    if init.mean.shape[0] != n:
        raise DimensionMismatch(f"init belief has dimension {init.mean.shape[0]}, problem has {n}")
    z = problem.measurement.observations
    predicted_means = np.zeros((M, n))
    predicted_covs = np.zeros((M, n, n))
    filtered_means = np.zeros((M, n))
    filtered_covs = np.zeros((M, n, n))
    cross_covs = np.zeros((max(M - 1, 0), n, n))

    mean, cov = init.mean, 0.5 * (init.cov + init.cov.T)
    for k in range(M):
        if k > 0:
            pts, cov = _belief_points(mean, cov, params)
            propagated = np.asarray(problem.process.transition(pts.points), dtype=np.float64)
            pred_mean, pred_cov = _sample_moments(
                propagated, pts.mean_weights, pts.cov_weights,
                noise_cov=problem.process.transition_covs[k - 1],
            )
            dev_in = pts.points - mean
            dev_out = propagated - pred_mean
            cross_covs[k - 1] = np.einsum("i,ij,ik->jk", pts.cov_weights, dev_in, dev_out)
            mean, cov = pred_mean, pred_cov

        pts, cov = _belief_points(mean, cov, params)
        predicted_means[k], predicted_covs[k] = mean, cov
        in_meas = np.asarray(problem.measurement.observe(pts.points), dtype=np.float64)
        z_mean, innovation_cov = _sample_moments(
            in_meas, pts.mean_weights, pts.cov_weights,
            noise_cov=problem.measurement.noise_covs[k],
        )
        dev_state = pts.points - mean
        dev_meas = in_meas - z_mean
        cross_xz = np.einsum("i,ij,ik->jk", pts.cov_weights, dev_state, dev_meas)
        gain = scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(innovation_cov, lower=True), cross_xz.T
        ).T
        mean = mean + gain @ (z[k] - z_mean)
        cov = cov - gain @ innovation_cov @ gain.T
        cov = 0.5 * (cov + cov.T)
        filtered_means[k], filtered_covs[k] = mean, cov

    return FilteredTrajectory(
        predicted_means=predicted_means,
        predicted_covs=predicted_covs,
        filtered_means=filtered_means,
        filtered_covs=filtered_covs,
        cross_covs=cross_covs,
    )


def smoothed_moments(filtered: FilteredTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """RTS backward recursion; returns smoothed means and covariances.

    The final step's smoothed belief equals its filtered belief exactly;
    earlier steps are corrected through the gain built from the stored
    state-to-prediction cross covariance.
    """
    M, n = filtered.M, filtered.n
    means = filtered.filtered_means.copy()
    covs = filtered.filtered_covs.copy()
    for k in range(M - 2, -1, -1):
        pred_cov = filtered.predicted_covs[k + 1]
        gain = scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(pred_cov, lower=True), filtered.cross_covs[k].T
        ).T
        means[k] = filtered.filtered_means[k] + gain @ (
            means[k + 1] - filtered.predicted_means[k + 1]
        )
        cov = filtered.filtered_covs[k] + gain @ (covs[k + 1] - pred_cov) @ gain.T
        covs[k] = 0.5 * (cov + cov.T)
    return means, covs


def urts_backward(filtered: FilteredTrajectory, problem: SmoothingProblem) -> SmootherResult:
    """Unscented RTS smoother result from a completed forward pass."""
    if filtered.M != problem.M or filtered.n != problem.n:
        raise DimensionMismatch(
            f"filtered trajectory is ({filtered.M}, {filtered.n}), "
            f"problem needs ({problem.M}, {problem.n})"
        )
    means, _ = smoothed_moments(filtered)
    return SmootherResult(
        estimate=StateSequence(means),
        objective_trace=[],
        iterations=0,
        converged=True,
    )

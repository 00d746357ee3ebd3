"""Independent reference implementations used to pin expected test values.

Everything here is deliberately naive and dense: explicit inverses, stacked
Jacobians, textbook filter recursions. None of it shares code with the
package paths it checks.
"""

import numpy as np


def random_spd_blocktridiag(rng, n, M, diag_boost=0.5):
    """Random SPD block-tridiagonal (diag, offdiag) stacks.

    Built as B B^T + c I with B block lower-bidiagonal, which is SPD and
    has exactly the block-tridiagonal sparsity.
    """
    D = rng.normal(size=(M, n, n))
    S = rng.normal(size=(M - 1, n, n))
    diag = np.einsum("kij,klj->kil", D, D) + diag_boost * np.eye(n)
    if M > 1:
        diag[1:] += np.einsum("kij,klj->kil", S, S)
    off = np.einsum("kij,klj->kil", S, D[:-1]) if M > 1 else np.zeros((0, n, n))
    return diag, off


def dense_from_blocks(diag, off):
    M, n, _ = diag.shape
    A = np.zeros((M * n, M * n))
    for k in range(M):
        A[k * n : (k + 1) * n, k * n : (k + 1) * n] = diag[k]
    for k in range(M - 1):
        A[(k + 1) * n : (k + 2) * n, k * n : (k + 1) * n] = off[k]
        A[k * n : (k + 1) * n, (k + 1) * n : (k + 2) * n] = off[k].T
    return A


def brute_force_objective(problem, blocks):
    """Objective by direct per-term summation with explicit inverses."""
    total = 0.0
    r0 = blocks[0] - problem.process.prior_mean
    total += 0.5 * r0 @ np.linalg.inv(problem.process.prior_cov) @ r0
    M = blocks.shape[0]
    for k in range(M - 1):
        pred = problem.process.transition(blocks[k][None])[0]
        r = blocks[k + 1] - pred
        total += 0.5 * r @ np.linalg.inv(problem.process.transition_covs[k]) @ r
    for k in range(M):
        h = problem.measurement.observe(blocks[k][None])[0]
        r = h - problem.measurement.observations[k]
        total += 0.5 * r @ np.linalg.inv(problem.measurement.noise_covs[k]) @ r
    return float(total)


def stacked_residual(problem, blocks):
    """All residuals [prior; transitions; measurements] as one flat vector."""
    parts = [blocks[0] - problem.process.prior_mean]
    M = blocks.shape[0]
    for k in range(M - 1):
        parts.append(blocks[k + 1] - problem.process.transition(blocks[k][None])[0])
    for k in range(M):
        parts.append(
            problem.measurement.observe(blocks[k][None])[0]
            - problem.measurement.observations[k]
        )
    return np.concatenate(parts)


def block_weight_matrix(problem):
    """Dense block-diagonal weight matrix of all covariance inverses."""
    M, n = problem.M, problem.n
    covs = [problem.process.prior_cov]
    covs += [problem.process.transition_covs[k] for k in range(M - 1)]
    covs += [problem.measurement.noise_covs[k] for k in range(M)]
    size = sum(c.shape[0] for c in covs)
    W = np.zeros((size, size))
    at = 0
    for c in covs:
        d = c.shape[0]
        W[at : at + d, at : at + d] = np.linalg.inv(c)
        at += d
    return W


def linear_map_solution(problem):
    """Exact least-squares solution for problems with linear g and h.

    Solves the whitened stacked system by QR (numpy lstsq); accurate even
    when the normal equations of the same problem are badly conditioned.
    """
    n, m, M = problem.n, problem.m, problem.M
    probe = np.zeros((1, n))
    G = problem.process.jacobian(probe)[0]
    g0 = problem.process.transition(probe)[0]
    H = problem.measurement.jacobian(probe)[0]
    h0 = problem.measurement.observe(probe)[0]
    rows = n + n * (M - 1) + m * M
    J = np.zeros((rows, n * M))
    c = np.zeros(rows)
    Wp = np.linalg.inv(np.linalg.cholesky(problem.process.prior_cov))
    J[:n, :n] = Wp
    c[:n] = Wp @ problem.process.prior_mean
    r = n
    for k in range(M - 1):
        Wq = np.linalg.inv(np.linalg.cholesky(problem.process.transition_covs[k]))
        J[r : r + n, n * k : n * (k + 1)] = -Wq @ G
        J[r : r + n, n * (k + 1) : n * (k + 2)] = Wq
        c[r : r + n] = Wq @ g0
        r += n
    for k in range(M):
        Wr = np.linalg.inv(np.linalg.cholesky(problem.measurement.noise_covs[k]))
        J[r : r + m, n * k : n * (k + 1)] = Wr @ H
        c[r : r + m] = Wr @ (problem.measurement.observations[k] - h0)
        r += m
    solution, *_ = np.linalg.lstsq(J, c, rcond=None)
    return solution.reshape(M, n)


def linear_kf_rts(problem):
    """Textbook Kalman filter plus RTS smoother for linear g and h.

    Returns (filtered_means, filtered_covs, smoothed_means, smoothed_covs).
    """
    n, M = problem.n, problem.M
    probe = np.zeros((1, n))
    G = problem.process.jacobian(probe)[0]
    g0 = problem.process.transition(probe)[0]
    H = problem.measurement.jacobian(probe)[0]
    h0 = problem.measurement.observe(probe)[0]
    z = problem.measurement.observations

    fm = np.zeros((M, n))
    fP = np.zeros((M, n, n))
    pm = np.zeros((M, n))
    pP = np.zeros((M, n, n))
    mean = problem.process.prior_mean.copy()
    cov = problem.process.prior_cov.copy()
    for k in range(M):
        if k > 0:
            mean = G @ mean + g0
            cov = G @ cov @ G.T + problem.process.transition_covs[k - 1]
        pm[k], pP[k] = mean, cov
        S = H @ cov @ H.T + problem.measurement.noise_covs[k]
        K = cov @ H.T @ np.linalg.inv(S)
        mean = mean + K @ (z[k] - (H @ mean + h0))
        cov = (np.eye(n) - K @ H) @ cov
        fm[k], fP[k] = mean, cov

    sm = fm.copy()
    sP = fP.copy()
    for k in range(M - 2, -1, -1):
        gain = fP[k] @ G.T @ np.linalg.inv(pP[k + 1])
        sm[k] = fm[k] + gain @ (sm[k + 1] - pm[k + 1])
        sP[k] = fP[k] + gain @ (sP[k + 1] - pP[k + 1]) @ gain.T
    return fm, fP, sm, sP


def fd_gradient(func, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.size):
        step = np.zeros_like(x)
        step[j] = h
        grad[j] = (func(x + step) - func(x - step)) / (2.0 * h)
    return grad

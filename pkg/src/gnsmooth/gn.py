"""Damped Gauss-Newton smoothing with Armijo backtracking.

``oks_smooth`` iterates: assemble the normal system at the current sequence,
solve it with the block-tridiagonal factorization, take the difference to the
current sequence as the search direction, and backtrack until the Armijo
sufficient-decrease condition holds. ``eks_smooth`` is exactly one such
iteration with a unit step and no line search, which is the classical
extended smoother recovered as the first step of the optimization.
"""

from dataclasses import dataclass, field

import numpy as np

from . import blocktridiag
from .errors import NotPositiveDefinite
from .statespace import (
    SmoothingProblem,
    StateSequence,
    assemble_normal_system,
    evaluate_objective,
    objective_gradient,
)


@dataclass(frozen=True)
class GNOptions:
    """Iteration and line-search controls.

    ``objective_tolerance`` is a relative decrease threshold: iteration stops
    once an accepted step reduces the objective by less than this fraction.
    ``line_search`` disables backtracking when False (every step is a unit
    step), which is how the single-iteration extended smoother runs.
    """

    max_iterations: int = 50
    objective_tolerance: float = 1e-9
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 40
    line_search: bool = True

    def __post_init__(self):
        if not (0.0 < self.armijo_c < 1.0):
            raise ValueError("armijo_c must lie in (0, 1)")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_iterations < 1 or self.max_backtracks < 1:
            raise ValueError("iteration budgets must be positive")


@dataclass(frozen=True)
class SmootherResult:
    """Smoothed trajectory plus a record of the optimization run.

    ``objective_trace`` holds one value per accepted iterate including the
    initial one and is non-increasing for line-searched runs. ``converged``
    is True when the relative-decrease test (or a vanishing directional
    derivative) ended the run, False when the iteration cap or a failed line
    search did.
    """

    estimate: StateSequence
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def gradient(problem: SmoothingProblem, x: StateSequence) -> np.ndarray:
    """Objective gradient at x, flat (n*M,); zero at stationary points."""
    return objective_gradient(problem, x)


def oks_smooth(
    problem: SmoothingProblem,
    init: StateSequence,
    opts: GNOptions | None = None,
) -> SmootherResult:
    """Gauss-Newton iteration on the smoothing objective, globalized by Armijo
    backtracking so the objective never increases between accepted iterates.

    A failed line search returns the best iterate found with
    ``converged=False`` rather than raising. NotPositiveDefinite propagates
    from the solver; it signals an indefinite normal system, which cannot
    occur for SPD process and measurement covariances.
    """
    opts = opts or GNOptions()
    x = init.blocks.copy()
    n, M = problem.n, problem.M
    f = evaluate_objective(problem, StateSequence(x))
    trace = [f]
    iterations = 0
    converged = False
    stationary_tol = opts.objective_tolerance * max(abs(f), 1.0)

    for _ in range(opts.max_iterations):
        current = StateSequence(x)
        system, rhs = assemble_normal_system(problem, current)
        fac = blocktridiag.factor(system)
        target = blocktridiag.solve(fac, np.asarray(rhs, dtype=np.float64))
        direction = target.reshape(M, n) - x

        step = 1.0
        if opts.line_search:
            slope = float(gradient(problem, current) @ direction.reshape(-1))
            if slope >= -stationary_tol:
                # No usable descent left: the quadratic model predicts less
                # decrease than the stopping tolerance.
                trace.append(f)
                converged = True
                break
            accepted = False
            for _ in range(opts.max_backtracks):
                candidate = x + step * direction
                f_new = evaluate_objective(problem, StateSequence(candidate))
                if f_new <= f + opts.armijo_c * step * slope:
                    accepted = True
                    break
                step *= opts.backtrack_factor
            if not accepted:
                converged = False
                break
        else:
            candidate = x + direction
            f_new = evaluate_objective(problem, StateSequence(candidate))

        x = candidate
        trace.append(f_new)
        iterations += 1
        if f - f_new <= opts.objective_tolerance * max(abs(f), 1.0):
            converged = True
            break
        f = f_new
        stationary_tol = opts.objective_tolerance * max(abs(f), 1.0)

    return SmootherResult(
        estimate=StateSequence(x),
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
    )


def eks_smooth(
    problem: SmoothingProblem,
    init: StateSequence,
    *,
    line_search: bool = False,
    opts: GNOptions | None = None,
) -> SmootherResult:
    """Extended Kalman smoother baseline: a single Gauss-Newton iteration.

    Takes a unit step by default; pass ``line_search=True`` for a damped
    variant. Identical to ``oks_smooth`` with ``max_iterations=1``.
    """
    base = opts or GNOptions()
    one_shot = GNOptions(
        max_iterations=1,
        objective_tolerance=base.objective_tolerance,
        armijo_c=base.armijo_c,
        backtrack_factor=base.backtrack_factor,
        max_backtracks=base.max_backtracks,
        line_search=line_search,
    )
    return oks_smooth(problem, init, one_shot)

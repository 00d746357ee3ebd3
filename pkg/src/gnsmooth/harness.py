"""Oracle parameter search, error metrics and result emission.

The oracle protocol scores each smoother against known ground truth over a
two-dimensional grid of measurement and process scale parameters and reports
the best achievable error per state component. It is a best-case comparison
protocol, not a deployable tuner: it requires the truth it is scored
against.

Errors are evaluated at the observation times only, which is the grid the
smoothers produce estimates on; no interpolation onto a finer truth grid is
performed. The per-cell "average" error is the arithmetic mean of the three
component errors.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .benchmarks import (
    ObservationSet,
    Trajectory,
    observations_to_csv,
    trajectory_to_csv,
)
from .errors import DegenerateTruth, DimensionMismatch, GNSmoothError
from .gn import GNOptions, eks_smooth, oks_smooth
from .statespace import SmoothingProblem, StateSequence
from .unscented import GaussianBelief, UTParams, ukf_forward, urts_backward

COMPONENTS = ("ddx", "dx", "x")
SMOOTHERS = ("eks", "uks", "oks")


@dataclass(frozen=True)
class ParameterGrid:
    """Positive, strictly increasing scale values for both noise parameters."""

    sigma_m2_values: np.ndarray
    sigma_p2_values: np.ndarray

    def __post_init__(self):
        for name in ("sigma_m2_values", "sigma_p2_values"):
            values = np.asarray(getattr(self, name), dtype=np.float64)
            if values.ndim != 1 or values.size == 0:
                raise ValueError(f"{name} must be a non-empty 1-D sequence")
            if np.any(values <= 0):
                raise ValueError(f"{name} must be positive")
            if np.any(np.diff(values) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, values)

    @classmethod
    def from_exponents(cls, exp_min: float, exp_max: float, exp_step: float) -> "ParameterGrid":
        """Log-spaced grid 10**exp over [exp_min, exp_max] for both axes."""
        if exp_step <= 0 or exp_max < exp_min:
            raise ValueError("need exp_step > 0 and exp_max >= exp_min")
        count = int(round((exp_max - exp_min) / exp_step)) + 1
        exps = exp_min + exp_step * np.arange(count)
        values = 10.0**exps
        return cls(sigma_m2_values=values, sigma_p2_values=values)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.sigma_m2_values.size, self.sigma_p2_values.size)


@dataclass(frozen=True)
class ArgminCell:
    """Location and value of a grid minimum."""

    m_index: int
    p_index: int
    sigma_m2: float
    sigma_p2: float
    error: float


@dataclass(frozen=True)
class GridSearchResult:
    """Per-cell scores for one smoother over the whole grid.

    All arrays are indexed [measurement-scale index, process-scale index].
    Cells that raised are flagged in ``failed`` and carry infinite errors.
    ``monotone`` records whether the run's objective trace was non-increasing
    (vacuously true for smoothers that do not iterate).
    """

    smoother: str
    sigma_m2_values: np.ndarray
    sigma_p2_values: np.ndarray
    component_errors: dict[str, np.ndarray]
    average_errors: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    failed: np.ndarray
    monotone: np.ndarray
    argmin: dict[str, ArgminCell]
    best_average_estimate: StateSequence | None
    times: np.ndarray

    def recompute_argmin(self, key: str) -> ArgminCell:
        """Argmin from the stored arrays; must match the recorded one."""
        errors = self.average_errors if key == "avg" else self.component_errors[key]
        flat = int(np.argmin(errors))
        i, j = np.unravel_index(flat, errors.shape)
        return ArgminCell(
            m_index=int(i),
            p_index=int(j),
            sigma_m2=float(self.sigma_m2_values[i]),
            sigma_p2=float(self.sigma_p2_values[j]),
            error=float(errors[i, j]),
        )


def relative_l2(series: np.ndarray, truth: np.ndarray) -> float:
    """||series - truth||_2 / ||truth||_2 over aligned samples."""
    series = np.asarray(series, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if series.shape != truth.shape:
        raise DimensionMismatch(f"series {series.shape} vs truth {truth.shape}")
    denom = float(np.sum(truth * truth))
    if denom == 0.0:
        raise DegenerateTruth("reference signal has zero norm")
    return float(np.sqrt(np.sum((series - truth) ** 2) / denom))


def observation_init(obs: ObservationSet) -> StateSequence:
    """Default smoother start: measured velocity/position, zero acceleration."""
    z = obs.measurements
    return StateSequence(np.column_stack([np.zeros(obs.M), z[:, 0], z[:, 1]]))


def perturbed_truth_init(truth_at_obs: np.ndarray, scale: float, seed: int) -> StateSequence:
    """Ground truth plus Gaussian perturbation, for convergence-radius studies."""
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 2)))
    return StateSequence(truth_at_obs + rng.normal(0.0, scale, size=truth_at_obs.shape))


def truth_at_observation_times(truth: Trajectory, obs: ObservationSet) -> np.ndarray:
    """Truth states subsampled onto the observation grid."""
    idx = np.searchsorted(truth.times, obs.times)
    idx = np.clip(idx, 0, truth.times.size - 1)
    if np.any(np.abs(truth.times[idx] - obs.times) > 1e-9):
        raise ValueError("observation times do not lie on the truth grid")
    return truth.states.blocks[idx]


def run_smoother(
    problem: SmoothingProblem,
    smoother: str,
    init: StateSequence,
    gn_options: GNOptions | None = None,
    ut_params: UTParams | None = None,
):
    """Dispatch one smoothing run; returns a SmootherResult."""
    name = smoother.lower()
    if name == "oks":
        return oks_smooth(problem, init, gn_options)
    if name == "eks":
        return eks_smooth(problem, init, opts=gn_options)
    if name == "uks":
        belief = GaussianBelief(problem.process.prior_mean, problem.process.prior_cov)
        filtered = ukf_forward(problem, belief, ut_params)
        return urts_backward(filtered, problem)
    raise ValueError(f"unknown smoother {smoother!r}; expected one of {SMOOTHERS}")


def _evaluate_cell(builder, sigma_m2, sigma_p2, smoother, init, truth_blocks, gn_options, ut_params):
    try:
        problem = builder(sigma_p2, sigma_m2)
        result = run_smoother(problem, smoother, init, gn_options, ut_params)
    except (GNSmoothError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        return {
            "errors": [math.inf] * 3,
            "avg": math.inf,
            "converged": False,
            "iterations": 0,
            "monotone": True,
            "failed": True,
            "estimate": None,
            "detail": str(exc),
        }
    est = result.estimate.blocks
    errors = [relative_l2(est[:, c], truth_blocks[:, c]) for c in range(3)]
    trace = np.asarray(result.objective_trace)
    monotone = bool(np.all(np.diff(trace) <= 0.0)) if trace.size > 1 else True
    return {
        "errors": errors,
        "avg": float(np.mean(errors)),
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "monotone": monotone,
        "failed": False,
        "estimate": result.estimate,
        "detail": "",
    }


def oracle_grid_search(
    builder,
    truth: Trajectory,
    obs: ObservationSet,
    grid: ParameterGrid,
    smoother: str,
    *,
    init: StateSequence | None = None,
    gn_options: GNOptions | None = None,
    ut_params: UTParams | None = None,
    workers: int = 1,
) -> GridSearchResult:
    """Score one smoother on every grid cell against ground truth.

    ``builder`` maps (sigma_p2, sigma_m2) to a SmoothingProblem on the given
    observations. Cell failures are recorded, not raised; a failed cell
    contributes infinite error. Cells are independent, so they may be
    evaluated concurrently; the assembled result does not depend on
    completion order.
    """
    smoother = smoother.lower()
    if smoother not in SMOOTHERS:
        raise ValueError(f"unknown smoother {smoother!r}; expected one of {SMOOTHERS}")
    truth_blocks = truth_at_observation_times(truth, obs)
    if init is None:
        init = observation_init(obs)

    nm, npp = grid.shape
    cells = [
        (i, j, float(grid.sigma_m2_values[i]), float(grid.sigma_p2_values[j]))
        for i in range(nm)
        for j in range(npp)
    ]

    def work(cell):
        i, j, s2m, s2p = cell
        return i, j, _evaluate_cell(
            builder, s2m, s2p, smoother, init, truth_blocks, gn_options, ut_params
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, cells))
    else:
        outcomes = [work(cell) for cell in cells]

    component_errors = {name: np.full((nm, npp), np.inf) for name in COMPONENTS}
    average_errors = np.full((nm, npp), np.inf)
    converged = np.zeros((nm, npp), dtype=bool)
    iterations = np.zeros((nm, npp), dtype=int)
    failed = np.zeros((nm, npp), dtype=bool)
    monotone = np.ones((nm, npp), dtype=bool)
    estimates: dict[tuple[int, int], StateSequence] = {}

    for i, j, out in outcomes:
        for c, name in enumerate(COMPONENTS):
            component_errors[name][i, j] = out["errors"][c]
        average_errors[i, j] = out["avg"]
        converged[i, j] = out["converged"]
        iterations[i, j] = out["iterations"]
        failed[i, j] = out["failed"]
        monotone[i, j] = out["monotone"]
        if out["estimate"] is not None:
            estimates[(i, j)] = out["estimate"]

    def argmin_of(errors):
        flat = int(np.argmin(errors))
        i, j = np.unravel_index(flat, errors.shape)
        return ArgminCell(
            m_index=int(i),
            p_index=int(j),
            sigma_m2=float(grid.sigma_m2_values[i]),
            sigma_p2=float(grid.sigma_p2_values[j]),
            error=float(errors[i, j]),
        )

    argmin = {name: argmin_of(component_errors[name]) for name in COMPONENTS}
    argmin["avg"] = argmin_of(average_errors)
    best_cell = (argmin["avg"].m_index, argmin["avg"].p_index)
    return GridSearchResult(
        smoother=smoother,
        sigma_m2_values=grid.sigma_m2_values,
        sigma_p2_values=grid.sigma_p2_values,
        component_errors=component_errors,
        average_errors=average_errors,
        converged=converged,
        iterations=iterations,
        failed=failed,
        monotone=monotone,
        argmin=argmin,
        best_average_estimate=estimates.get(best_cell),
        times=obs.times.copy(),
    )


# ---------------------------------------------------------------------------
# Result emission

_FMT = "%.17g"


def _grid_errors_csv(results) -> str:
    lines = ["smoother,sigma_m2,sigma_p2,err_ddx,err_dx,err_x,err_avg,converged,iterations"]
    for res in results:
        for i, s2m in enumerate(res.sigma_m2_values):
            for j, s2p in enumerate(res.sigma_p2_values):
                row = [res.smoother, _FMT % s2m, _FMT % s2p]
                row += [_FMT % res.component_errors[c][i, j] for c in COMPONENTS]
                row.append(_FMT % res.average_errors[i, j])
                row.append(str(int(res.converged[i, j])))
                row.append(str(int(res.iterations[i, j])))
                lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _heatmap_csv(res: GridSearchResult, key: str) -> str:
    errors = res.average_errors if key == "avg" else res.component_errors[key]
    lines = ["log10_sigma_m2,log10_sigma_p2,error"]
    for i, s2m in enumerate(res.sigma_m2_values):
        for j, s2p in enumerate(res.sigma_p2_values):
            lines.append(
                ",".join((_FMT % np.log10(s2m), _FMT % np.log10(s2p), _FMT % errors[i, j]))
            )
    return "\n".join(lines) + "\n"


def _estimate_csv(times: np.ndarray, estimate: StateSequence) -> str:
    lines = ["time,ddx,dx,x"]
    for t, row in zip(times, estimate.blocks):
        lines.append(",".join([_FMT % t] + [_FMT % v for v in row]))
    return "\n".join(lines) + "\n"


def emit_results(
    results,
    out_dir,
    *,
    truth: Trajectory | None = None,
    observations: ObservationSet | None = None,
    metadata: dict | None = None,
) -> list[str]:
    """Write grid scores, heatmap data, best-cell trajectories and a manifest.

    ``results`` is one GridSearchResult or a sequence of them. Returns the
    list of file names written (relative to out_dir). Output is byte-stable:
    rerunning with identical inputs reproduces identical files.
    """
    if isinstance(results, GridSearchResult):
        results = [results]
    results = list(results)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def emit(name: str, text: str):
        (out / name).write_text(text, newline="\n")
        written.append(name)

    emit("grid_errors.csv", _grid_errors_csv(results))
    for res in results:
        for key in COMPONENTS + ("avg",):
            emit(f"heatmap_{res.smoother}_{key}.csv", _heatmap_csv(res, key))
        if res.best_average_estimate is not None:
            emit(f"best_{res.smoother}.csv", _estimate_csv(res.times, res.best_average_estimate))
    if truth is not None:
        emit("truth.csv", trajectory_to_csv(truth))
    if observations is not None:
        emit("observations.csv", observations_to_csv(observations))

    manifest = dict(metadata or {})
    manifest["smoothers"] = [res.smoother for res in results]
    manifest["grid"] = {
        "sigma_m2_values": [float(v) for v in results[0].sigma_m2_values],
        "sigma_p2_values": [float(v) for v in results[0].sigma_p2_values],
    } if results else {}
    manifest["best_cells"] = {
        res.smoother: {
            key: {
                "sigma_m2": res.argmin[key].sigma_m2,
                "sigma_p2": res.argmin[key].sigma_p2,
                "error": res.argmin[key].error,
            }
            for key in ("avg",) + COMPONENTS
        }
        for res in results
    }
    manifest["files"] = sorted(written)
    text = yaml.safe_dump(manifest, sort_keys=True, default_flow_style=False)
    (out / "manifest.yaml").write_text(text, newline="\n")
    written.append("manifest.yaml")
    return written

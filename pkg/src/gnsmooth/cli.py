"""Command line interface.

Two subcommands:

``run``    generates a benchmark system, sweeps the oracle parameter grid for
           the requested smoothers and writes grid scores, heatmap data,
           best-cell trajectories and a manifest into the output directory.

``solve``  runs the smoothers once on an observation CSV at the fixed scale
           parameters from the model config; no ground truth, no search.

Both exit 0 on success and nonzero with a one-line reason on failure. All
outputs are deterministic given the configuration and seed.
"""

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .benchmarks import (
    build_linear_problem,
    build_nho_problem,
    generate_nho_truth,
    generate_sine_truth,
    observe,
    read_observations_csv,
)
from .config import RunConfig, SMOOTHER_CHOICES, config_to_mapping, load_config
from .errors import GNSmoothError
from .harness import (
    ParameterGrid,
    _estimate_csv,
    emit_results,
    observation_init,
    oracle_grid_search,
    perturbed_truth_init,
    run_smoother,
    truth_at_observation_times,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnsmooth",
        description="Nonlinear Kalman smoothing benchmarks and oracle parameter search",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate a benchmark and sweep the oracle grid")
    run.add_argument("--system", choices=("sine", "nho"), help="benchmark system")
    run.add_argument("--smoother", choices=SMOOTHER_CHOICES, default="all")
    run.add_argument("--config", type=Path, help="YAML config file")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument(
        "--sigma-m-true",
        type=float,
        dest="sigma_m_true",
        help="true measurement noise variance used for generation",
    )
    run.add_argument("--grid-exp-min", type=float, dest="grid_exp_min")
    run.add_argument("--grid-exp-max", type=float, dest="grid_exp_max")
    run.add_argument("--grid-exp-step", type=float, dest="grid_exp_step")
    run.add_argument("--workers", type=int, help="concurrent grid cells")

    solve = sub.add_parser("solve", help="single smoothing run on an observation CSV")
    solve.add_argument("--problem", type=Path, required=True, help="observations CSV")
    solve.add_argument("--model", type=Path, required=True, help="model config YAML")
    solve.add_argument("--smoother", choices=SMOOTHER_CHOICES, default="all")
    solve.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "system", None):
        cfg = replace(cfg, system=args.system)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "sigma_m_true", None) is not None:
        cfg = replace(cfg, sigma_m2_true=args.sigma_m_true)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)
    grid = cfg.grid
    if getattr(args, "grid_exp_min", None) is not None:
        grid = replace(grid, exp_min=args.grid_exp_min)
    if getattr(args, "grid_exp_max", None) is not None:
        grid = replace(grid, exp_max=args.grid_exp_max)
    if getattr(args, "grid_exp_step", None) is not None:
        grid = replace(grid, exp_step=args.grid_exp_step)
    return replace(cfg, grid=grid)


def _generate(cfg: RunConfig):
    sigma_m = math.sqrt(cfg.sigma_m2_true)
    if cfg.system == "sine":
        truth = generate_sine_truth(cfg.num_points)
        obs = observe(truth, sigma_m, 1, cfg.seed)
        builder = lambda s2p, s2m: build_linear_problem(obs, s2p, s2m)  # noqa: E731
    else:
        truth = generate_nho_truth(cfg.nho, cfg.num_steps, cfg.seed)
        obs = observe(truth, sigma_m, cfg.nho.obs_stride, cfg.seed)
        builder = lambda s2p, s2m: build_nho_problem(obs, cfg.nho, s2p, s2m)  # noqa: E731
    return truth, obs, builder


def _requested_smoothers(choice: str) -> list[str]:
    return ["eks", "uks", "oks"] if choice == "all" else [choice]


def _cmd_run(args) -> int:
    cfg = _load_run_config(args)
    truth, obs, builder = _generate(cfg)
    grid = ParameterGrid.from_exponents(cfg.grid.exp_min, cfg.grid.exp_max, cfg.grid.exp_step)
    if cfg.init.mode == "observations":
        init = observation_init(obs)
    else:
        init = perturbed_truth_init(
            truth_at_observation_times(truth, obs), cfg.init.perturbation, cfg.seed
        )
    results = [
        oracle_grid_search(
            builder,
            truth,
            obs,
            grid,
            name,
            init=init,
            gn_options=cfg.gn,
            ut_params=cfg.ut,
            workers=cfg.workers,
        )
        for name in _requested_smoothers(args.smoother)
    ]
    metadata = {
        "tool": {"name": "gnsmooth", "version": __version__},
        "config": config_to_mapping(cfg),
        "seeds": {"master": cfg.seed},
    }
    emit_results(results, args.out, truth=truth, observations=obs, metadata=metadata)
    return 0


def _cmd_solve(args) -> int:
    cfg = load_config(args.model)
    obs = read_observations_csv(args.problem)
    if cfg.system == "sine":
        problem = build_linear_problem(obs, cfg.solve.sigma_p2, cfg.solve.sigma_m2)
    else:
        problem = build_nho_problem(obs, cfg.nho, cfg.solve.sigma_p2, cfg.solve.sigma_m2)
    init = observation_init(obs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in _requested_smoothers(args.smoother):
        result = run_smoother(problem, name, init, cfg.gn, cfg.ut)
        fname = f"smoothed_{name}.csv"
        (out / fname).write_text(_estimate_csv(obs.times, result.estimate), newline="\n")
        written.append(fname)
    manifest = {
        "tool": {"name": "gnsmooth", "version": __version__},
        "config": config_to_mapping(cfg),
        "problem": str(args.problem),
        "files": sorted(written),
    }
    text = yaml.safe_dump(manifest, sort_keys=True, default_flow_style=False)
    (out / "manifest.yaml").write_text(text, newline="\n")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_solve(args)
    except (GNSmoothError, OSError, ValueError) as exc:
        print(f"gnsmooth: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration: YAML files with strict key checking.

The file mirrors the library's option objects section by section. Unknown
keys anywhere in the tree are rejected with the offending dotted path, so a
typo cannot silently fall back to a default.
"""

import dataclasses
from dataclasses import dataclass, field

import yaml

from .benchmarks import NHOParams
from .errors import ConfigError
from .gn import GNOptions
from .unscented import UTParams

SYSTEMS = ("sine", "nho")
SMOOTHER_CHOICES = ("eks", "uks", "oks", "all")
INIT_MODES = ("observations", "truth_perturbed")


@dataclass
class GridSettings:
    """Log10-spaced parameter grid bounds, shared by both axes."""

    exp_min: float = -2.0
    exp_max: float = 2.0
    exp_step: float = 0.2


@dataclass
class InitSettings:
    """Smoother initialization: from observations, or truth plus noise."""

    mode: str = "observations"
    perturbation: float = 0.01

    def __post_init__(self):
        if self.mode not in INIT_MODES:
            raise ConfigError(f"init.mode must be one of {INIT_MODES}, got {self.mode!r}")


@dataclass
class SolveSettings:
    """Fixed scale parameters for single runs without the oracle search."""

    sigma_m2: float = 1.0
    sigma_p2: float = 1.0


@dataclass
class RunConfig:
    system: str = "nho"
    seed: int = 0
    sigma_m2_true: float = 0.5
    num_points: int = 75
    num_steps: int = 60
    workers: int = 1
    nho: NHOParams = field(default_factory=NHOParams)
    grid: GridSettings = field(default_factory=GridSettings)
    ut: UTParams = field(default_factory=UTParams)
    gn: GNOptions = field(default_factory=GNOptions)
    init: InitSettings = field(default_factory=InitSettings)
    solve: SolveSettings = field(default_factory=SolveSettings)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"system must be one of {SYSTEMS}, got {self.system!r}")


_SECTIONS = {
    "nho": NHOParams,
    "grid": GridSettings,
    "ut": UTParams,
    "gn": GNOptions,
    "init": InitSettings,
    "solve": SolveSettings,
}


def _build(cls, mapping, path):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path or 'top level'} must be a mapping, got {type(mapping).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        dotted = f"{path}.{key}" if path else str(key)
        if key not in names:
            raise ConfigError(f"unknown key {dotted!r}")
        if key in _SECTIONS and cls is RunConfig:
            kwargs[key] = _build(_SECTIONS[key], value, dotted)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value under {path or 'top level'}: {exc}") from exc


def config_from_mapping(mapping: dict | None) -> RunConfig:
    """Build a RunConfig from a parsed mapping, rejecting unknown keys."""
    return _build(RunConfig, mapping or {}, "")


def load_config(path) -> RunConfig:
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_mapping(raw)


def config_to_mapping(cfg: RunConfig) -> dict:
    """Plain-dict form of a config, suitable for the run manifest."""
    return dataclasses.asdict(cfg)


def dump_config(cfg: RunConfig, path) -> None:
    text = yaml.safe_dump(config_to_mapping(cfg), sort_keys=True, default_flow_style=False)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)

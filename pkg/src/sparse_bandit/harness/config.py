"""Experiment configuration: JSON in, validated dataclasses out."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bandit import VARIANTS
from ..diagnostics import CovarianceSummary
from ..environment import STRATEGIES

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass
class InstanceConfig:
    d: int = 400
    k: int = 10
    m: int = 5
    reward_noise_sigma: float = 0.001
    theta_signs: str = "random"
    normalize_theta: bool = True
    # "per_repeat": fresh theta* per repeat; "shared": one theta* for the whole run
    theta_policy: str = "per_repeat"


@dataclass
class StrategyConfig:
    kind: str = "uniform01"
    pool: list | None = None
    pool_size: int | None = None
    replay: bool = True
    offset_scale: float = 0.05


@dataclass
class PerturbationConfig:
    sigma1: list = field(default_factory=lambda: [0.1])
    # common censor bound; None means 1 + 4 * sigma1
    q: float | None = None
    # None means ||q||_2
    energy_cap: float | None = None
    covariance_diag: list | None = None


@dataclass
class ScheduleConfig:
    delta: float = 0.05
    # None means: use the true reward noise / the perturbation's energy cap
    sigma: float | None = None
    R: float | None = None
    multiplier: float = 1.0


@dataclass
class DiagnosticsConfig:
    cadence: int = 10
    cone_samples: int = 10_000
    alpha: float = 3.0
    a: float = 1.0
    c: float = 1.0
    c_prime: float = 1.0
    c_dprime: float = 1.0
    fact1_trials: int = 1000
    chernoff_trials: int = 200


@dataclass
class PaperScaleConfig:
    d: int = 2000
    k: int = 20


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    instance: InstanceConfig = field(default_factory=InstanceConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    T: int = 150
    repeats: int = 10
    variants: list = field(default_factory=lambda: ["plain"])
    # paired: every variant and every sigma1 replays the same random streams
    paired_contexts: bool = True
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output_dir: str = "out"
    master_seed: int = 0
    paper_scale: PaperScaleConfig = field(default_factory=PaperScaleConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def at_paper_scale(self) -> "ExperimentConfig":
        cfg = dataclasses.replace(
            self,
            instance=dataclasses.replace(self.instance, d=self.paper_scale.d, k=self.paper_scale.k),
        )
        validate(cfg)
        return cfg


_SCALARS = {int: (int,), float: (int, float), bool: (bool,), str: (str,)}


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown key")
    kwargs = {}
    for name, value in data.items():
        where = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(hints[name], value, where)
    return cls(**kwargs)


def _coerce(hint, value, path):
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)
    args = typing.get_args(hint)
    if type(None) in args:
        if value is None:
            return None
        hint = next(a for a in args if a is not type(None))
    origin = typing.get_origin(hint) or hint
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return value
    allowed = _SCALARS.get(origin)
    if allowed is None:
        return value
    # bool is an int subclass; reject it where a number is expected
    if (isinstance(value, bool) and origin is not bool) or not isinstance(value, allowed):
        raise ConfigError(path, f"expected {origin.__name__}, got {value!r}")
    return float(value) if origin is float else value


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    inst = cfg.instance
    if inst.d < 1:
        raise ConfigError("instance.d", "must be positive")
    if not 1 <= inst.k <= inst.d:
        raise ConfigError("instance.k", "must satisfy 1 <= k <= d")
    if inst.m < 2:
        raise ConfigError("instance.m", "need at least 2 arms")
    if inst.reward_noise_sigma < 0:
        raise ConfigError("instance.reward_noise_sigma", "must be non-negative")
    if inst.theta_signs not in ("random", "positive"):
        raise ConfigError("instance.theta_signs", "must be 'random' or 'positive'")
    if inst.theta_policy not in ("per_repeat", "shared"):
        raise ConfigError("instance.theta_policy", "must be 'per_repeat' or 'shared'")

    st = cfg.strategy
    if st.kind not in STRATEGIES:
        raise ConfigError("strategy.kind", f"must be one of {STRATEGIES}")
    if st.pool is not None:
        pool = np.asarray(st.pool, dtype=float)
        if pool.ndim != 2 or pool.shape[1] != inst.d:
            raise ConfigError("strategy.pool", f"must be a list of length-{inst.d} vectors")
    if st.pool_size is not None and st.pool_size < 1:
        raise ConfigError("strategy.pool_size", "must be positive")

    pt = cfg.perturbation
    if not pt.sigma1:
        raise ConfigError("perturbation.sigma1", "need at least one value")
    for i, s in enumerate(pt.sigma1):
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not s > 0:
            raise ConfigError(f"perturbation.sigma1[{i}]", "must be a positive number")
    if pt.q is not None and not pt.q > 0:
        raise ConfigError("perturbation.q", "must be positive")
    if pt.energy_cap is not None and not pt.energy_cap > 0:
        raise ConfigError("perturbation.energy_cap", "must be positive")
    if pt.covariance_diag is not None:
        diag = np.asarray(pt.covariance_diag, dtype=float)
        if diag.shape != (inst.d,) or not np.all(diag > 0):
            raise ConfigError("perturbation.covariance_diag", f"must be {inst.d} positive numbers")
        try:
            CovarianceSummary.of(np.diag(diag))
        except ValueError as exc:
            raise ConfigError("perturbation.covariance_diag", str(exc)) from exc

    sc = cfg.schedule
    if not 0 < sc.delta < 1:
        raise ConfigError("schedule.delta", "must lie in (0, 1)")
    if sc.sigma is not None and sc.sigma < 0:
        raise ConfigError("schedule.sigma", "must be non-negative")
    if sc.R is not None and not sc.R > 0:
        raise ConfigError("schedule.R", "must be positive")
    if sc.multiplier < 0:
        raise ConfigError("schedule.multiplier", "must be non-negative")

    if cfg.T < 1:
        raise ConfigError("T", "must be at least 1")
    if cfg.repeats < 1:
        raise ConfigError("repeats", "must be at least 1")
    if not cfg.variants:
        raise ConfigError("variants", "need at least one variant")
    for i, v in enumerate(cfg.variants):
        if v not in VARIANTS:
            raise ConfigError(f"variants[{i}]", f"must be one of {VARIANTS}")
    if len(set(cfg.variants)) != len(cfg.variants):
        raise ConfigError("variants", "duplicate variant")
    dg = cfg.diagnostics
    if dg.cadence < 1:
        raise ConfigError("diagnostics.cadence", "must be at least 1")
    if dg.cone_samples < 1:
        raise ConfigError("diagnostics.cone_samples", "must be at least 1")
    if dg.alpha < 1:
        raise ConfigError("diagnostics.alpha", "must be >= 1")
    if dg.fact1_trials < 100:
        raise ConfigError("diagnostics.fact1_trials", "must be at least 100")
    if dg.chernoff_trials < 1:
        raise ConfigError("diagnostics.chernoff_trials", "must be at least 1")
    if cfg.master_seed < 0:
        raise ConfigError("master_seed", "must be non-negative")
    return cfg


def config_from_dict(data: dict) -> ExperimentConfig:
    return validate(_build(ExperimentConfig, data, ""))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)


def shipped_config(name: str) -> Path:
    """Path of a replication config bundled with the package, e.g. ``paper_fig1``."""
    path = CONFIG_DIR / (name if name.endswith(".json") else f"{name}.json")
    if not path.exists():
        raise FileNotFoundError(path)
    return path

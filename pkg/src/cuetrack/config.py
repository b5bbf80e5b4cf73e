"""Flat ``key = value`` run configuration."""
from __future__ import annotations

import typing
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from .assoc.features import parse_feature_set
from .errors import ConfigurationError
from .simulator import ScenarioConfig

SCENARIO_KEYS = tuple(f.name for f in fields(ScenarioConfig))
TRACKER_KEYS = ("stable_hits", "max_unobserved", "emit_tentative", "emit_coasting",
                "velocity_var_factor")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    features: Tuple[str, ...] = ("E", "KF", "C")
    stable_hits: int = 3
    max_unobserved: float = 0.5
    emit_tentative: bool = False
    emit_coasting: bool = True
    velocity_var_factor: float = 100.0
    iou_threshold: float = 0.5
    reg_c: float = 1.0
    epochs: int = 200
    # experiment: number of seeds, test scene seeds run from the base seed upward
    n_seeds: int = 20
    train_seed_offset: int = 100_000
    share_noise: bool = True
    # optional default paths; command-line flags take precedence
    out_gt: Optional[str] = None
    out_det: Optional[str] = None
    out: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "features", parse_feature_set(self.features))
        if self.n_seeds < 1:
            raise ConfigurationError("n_seeds must be positive")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigurationError("iou_threshold must lie in (0, 1]")

    def tracker_overrides(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in TRACKER_KEYS}

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        return replace(self, scenario=self.scenario.with_updates(seed=int(seed)))


def _convert(raw: str, hint, key: str, lineno: int):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if raw.lower() in ("none", ""):
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _convert(raw, inner, key, lineno)
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
        if origin is tuple:
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if args and args[-1] is not Ellipsis:
                if len(parts) != len(args):
                    raise ValueError(raw)
                return tuple(_convert(p, a, key, lineno) for p, a in zip(parts, args))
            inner = args[0] if args else str
            return tuple(_convert(p, inner, key, lineno) for p in parts)
    except ValueError:
        raise ConfigurationError(f"line {lineno}: bad value {raw!r} for {key}") from None
    raise ConfigurationError(f"line {lineno}: unsupported field type for {key}")


def _hints(cls) -> Dict[str, Any]:
    return typing.get_type_hints(cls)


def parse_config_text(text: str, base: Optional[ScenarioConfig] = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Scenario keys override ``base`` (the simulator defaults when omitted).
    """
    scen_hints = _hints(ScenarioConfig)
    run_hints = _hints(RunConfig)
    scen: Dict[str, Any] = {}
    run: Dict[str, Any] = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in SCENARIO_KEYS:
            scen[key] = _convert(value, scen_hints[key], key, lineno)
        elif key == "features":
            run[key] = tuple(p.strip() for p in value.split(",") if p.strip())
        elif key in run_hints and key != "scenario":
            run[key] = _convert(value, run_hints[key], key, lineno)
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
    scenario = (base or ScenarioConfig()).with_updates(**scen)
    return RunConfig(scenario=scenario, **run)


def load_config(path, base: Optional[ScenarioConfig] = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)

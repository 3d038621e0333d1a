"""Run configuration: defaults, config-file parsing, flag overrides.

Config files are flat ``key = value`` text with ``#`` comments. Every key
has a documented default matching the published constants (300 episodes
of 5400 s, exploration breakpoints 90/210/300, buffer 50,000, batch 64,
learning rate 0.001, 15 s greens, 4 s yellows, scenario volumes
600/3000/1500/1500). Command-line flags override file values; unknown
keys are rejected with their line number. Keys prefixed ``manifest.`` are
run metadata and are ignored on parse, which lets a run manifest be fed
back in as a config file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .agents import TrainingConfig
from .encoding import EncodingWeights

OUT_DIR_ENV = "TSCRL_OUT"
DEFAULT_OUT = "runs"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    agent: str = "time"            # turn | time | fixed
    scenario: str = "all"          # low | high | ew | ns | all
    seed: int = 0
    out: str = ""                  # empty: $TSCRL_OUT or ./runs
    model: str = ""                # weights path (input for eval/compare)
    episodes: int = 300
    episode_length: int = 5400
    gamma: float = 0.7
    lr: float = 0.001
    batch: int = 64
    buffer_capacity: int = 50_000
    base_green: int = 15
    yellow: int = 4
    eps_high_until: int = 90
    eps_decay_until: int = 210
    eps_final_episode: int = 300
    vehicles_low: int = 600
    vehicles_high: int = 3000
    vehicles_ew: int = 1500
    vehicles_ns: int = 1500
    straight_fraction: float = 0.6
    favored_fraction: float = 0.75
    weibull_shape: float = 2.0
    eval_episodes: int = 5
    encoding_weights: str = "11,10,10,9,8,7,6,5,4,3,2,1"
    trace: bool = False

    def out_dir(self) -> Path:
        if self.out:
            return Path(self.out)
        env = os.environ.get(OUT_DIR_ENV)
        return Path(env) if env else Path(DEFAULT_OUT)

    def volumes(self) -> dict[str, int]:
        return {"low": self.vehicles_low, "high": self.vehicles_high,
                "ew": self.vehicles_ew, "ns": self.vehicles_ns}

    def enc_weights(self) -> EncodingWeights:
        return EncodingWeights.from_columns(
            int(c) for c in self.encoding_weights.split(","))

    def scenario_names(self) -> list[str]:
        return ["low", "high", "ew", "ns"] if self.scenario == "all" else [self.scenario]

    def scenario_cfg(self, name: str):
        from .traffic import scenario_config

        return scenario_config(name, self.volumes()[name],
                               episode_length=self.episode_length,
                               straight_fraction=self.straight_fraction,
                               favored_fraction=self.favored_fraction,
                               weibull_shape=self.weibull_shape)

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            agent_kind=self.agent,
            episodes=self.episodes,
            episode_length=self.episode_length,
            gamma=self.gamma,
            lr=self.lr,
            batch_size=self.batch,
            buffer_capacity=self.buffer_capacity,
            base_green=self.base_green,
            yellow=self.yellow,
            epsilon_breakpoints=(self.eps_high_until, self.eps_decay_until,
                                 self.eps_final_episode),
            seed=self.seed,
            volumes=self.volumes(),
            straight_fraction=self.straight_fraction,
            favored_fraction=self.favored_fraction,
            weibull_shape=self.weibull_shape,
        )

    def as_lines(self) -> list[str]:
        """Serialize every field as ``key = value`` (manifest body)."""
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            out.append(f"{f.name} = {value}")
        return out


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_CHOICES = {
    "agent": ("turn", "time", "fixed"),
    "scenario": ("low", "high", "ew", "ns", "all"),
}

_RANGES: dict[str, tuple[float | None, float | None]] = {
    "seed": (0, None),
    "episodes": (0, None),
    "episode_length": (1, None),
    "gamma": (0.0, 1.0),
    "lr": (1e-12, None),
    "batch": (1, None),
    "buffer_capacity": (1, None),
    "base_green": (1, None),
    "yellow": (0, None),
    "eps_high_until": (1, None),
    "eps_decay_until": (2, None),
    "eps_final_episode": (3, None),
    "vehicles_low": (0, None),
    "vehicles_high": (0, None),
    "vehicles_ew": (0, None),
    "vehicles_ns": (0, None),
    "straight_fraction": (0.0, 1.0),
    "favored_fraction": (0.0, 1.0),
    "weibull_shape": (1e-12, None),
    "eval_episodes": (1, None),
}


def _convert(key: str, text: str, kind: type) -> Any:
    try:
        if kind is bool:
            value: Any = _parse_bool(text)
        elif kind is int:
            value = int(text)
        elif kind is float:
            value = float(text)
        else:
            value = text
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from None
    if key in _CHOICES and value not in _CHOICES[key]:
        raise ConfigError(f"key {key!r}: must be one of {_CHOICES[key]}, got {value!r}")
    if key in _RANGES:
        lo, hi = _RANGES[key]
        if (lo is not None and value < lo) or (hi is not None and value > hi):
            bound = f">= {lo}" if hi is None else f"in [{lo}, {hi}]"
            raise ConfigError(f"key {key!r}: value {value} out of range ({bound})")
    return value


def parse_config(path: str | Path | None = None,
                 overrides: dict[str, Any] | None = None) -> RunConfig:
    """Resolve defaults, then the config file, then explicit overrides."""
    field_types = {f.name: f.type if isinstance(f.type, type) else type(getattr(RunConfig(), f.name))
                   for f in fields(RunConfig)}
    values: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{p}:{lineno}: malformed line {raw!r} (expected key = value)")
            key, text = (part.strip() for part in line.split("=", 1))
            if key.startswith("manifest."):
                continue  # run metadata, not configuration
            if key not in field_types:
                raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _convert(key, text, field_types[key])
            except ConfigError as exc:
                raise ConfigError(f"{p}:{lineno}: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in field_types:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = _convert(key, str(value), field_types[key])
    config = replace(RunConfig(), **values)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if not config.eps_high_until < config.eps_decay_until < config.eps_final_episode:
        raise ConfigError("epsilon breakpoints must be strictly increasing")
    if config.batch > config.buffer_capacity:
        raise ConfigError("batch must not exceed buffer_capacity")
    try:
        config.enc_weights()
    except ValueError as exc:
        raise ConfigError(f"encoding_weights: {exc}") from None

"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from mfirl.envs import ENV_TAGS

MODELS = ("rp", "po", "rp-resolve", "random-baseline")
EVAL_MODES = ("greedy", "softmax")


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _auto_float(text: str) -> float | None:
    return None if text.strip() == "auto" else float(text)


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


@dataclass
class ExperimentConfig:
    env: str = "blackjack"
    models: tuple[str, ...] = ("rp", "po")
    episodes: tuple[int, ...] = (10, 100, 1000, 10000)
    runs: int | None = None  # None: 10 for gridworld, 200 otherwise
    seed: int = 0
    gamma: float | None = None  # LSTDQ discount; None uses the environment's
    env_gamma: float | None = None
    ridge: float | None = None
    include_terminal: bool = True
    beta: float = 1.0
    tol_grad: float = 1e-6
    max_iter: int = 500
    eval_mode: str = "greedy"
    scaling: str = "unit_interval"
    blackjack_features: int = 10
    demo_opponent: str = "random"
    record_timing: bool = False
    gridworld: dict = field(default_factory=dict)

    # config-file key -> (attribute, parser)
    KEYS = {
        "env": ("env", str.strip),
        "model": ("models", lambda v: tuple(m.strip() for m in v.split(",") if m.strip())),
        "fit.model": ("models", lambda v: tuple(m.strip() for m in v.split(",") if m.strip())),
        "episodes": ("episodes", _parse_int_list),
        "runs": ("runs", int),
        "seed": ("seed", int),
        "lstdq.gamma": ("gamma", _auto_float),
        "env.gamma": ("env_gamma", _auto_float),
        "lstdq.ridge": ("ridge", _auto_float),
        "lstdq.include_terminal": ("include_terminal", _parse_bool),
        "beta": ("beta", float),
        "fit.tol_grad": ("tol_grad", float),
        "fit.max_iter": ("max_iter", int),
        "eval.mode": ("eval_mode", str.strip),
        "features.scaling": ("scaling", str.strip),
        "features.blackjack_count": ("blackjack_features", int),
        "demo.opponent": ("demo_opponent", str.strip),
        "record_timing": ("record_timing", _parse_bool),
    }
    GRIDWORLD_KEYS = {"corner": int, "slip": float, "reward_inside": float,
                      "reward_outside": float, "episode_length": int}

    def __post_init__(self):
        self.validate()

    @property
    def n_runs(self) -> int:
        if self.runs is not None:
            return self.runs
        return 10 if self.env.startswith("gridworld") else 200

    def validate(self) -> None:
        if self.env not in ENV_TAGS and not self.env.startswith("gridworld"):
            raise ConfigError(f"unknown env {self.env!r}; choose from {', '.join(ENV_TAGS)}")
        for m in self.models:
            if m not in MODELS:
                raise ConfigError(f"unknown model {m!r}; choose from {', '.join(MODELS)}")
        if not self.models:
            raise ConfigError("no model selected")
        if not self.episodes or any(n <= 0 for n in self.episodes):
            raise ConfigError("episode counts must be positive")
        if list(self.episodes) != sorted(self.episodes):
            raise ConfigError("episode counts must be sorted")
        if self.runs is not None and self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.eval_mode not in EVAL_MODES:
            raise ConfigError(f"unknown eval mode {self.eval_mode!r}")
        if self.scaling not in ("unit_interval", "symmetric", "none"):
            raise ConfigError(f"unknown scaling {self.scaling!r}")
        if self.blackjack_features not in (10, 14):
            raise ConfigError("features.blackjack_count must be 10 or 14")
        if self.demo_opponent not in ("random", "minimax"):
            raise ConfigError(f"unknown demo opponent {self.demo_opponent!r}")
        for k in self.gridworld:
            if k not in self.GRIDWORLD_KEYS:
                raise ConfigError(f"unknown gridworld option {k!r}")

    def env_overrides(self) -> dict:
        out = {}
        if self.env_gamma is not None:
            out["gamma"] = self.env_gamma
        if self.env.startswith("gridworld"):
            out.update(self.gridworld)
        return out

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
        cfg = {f.name: getattr(base, f.name) for f in fields(cls)} if base else {}
        grid = dict(cfg.get("gridworld", {}))
        for key, raw in values.items():
            try:
                if key.startswith("gridworld."):
                    name = key.split(".", 1)[1]
                    if name not in cls.GRIDWORLD_KEYS:
                        raise ConfigError(f"unknown config key {key!r}")
                    grid[name] = cls.GRIDWORLD_KEYS[name](raw)
                    continue
                if key not in cls.KEYS:
                    raise ConfigError(f"unknown config key {key!r}")
                attr, parse = cls.KEYS[key]
                cfg[attr] = parse(raw)
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        cfg["gridworld"] = grid
        return cls(**cfg)

    @classmethod
    def from_file(cls, path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
        return cls.from_mapping(parse_config_text(Path(path).read_text(encoding="utf-8")), base)

    def echo(self) -> str:
        """Resolved configuration in the same ``key = value`` format."""
        lines = []
        for key, (attr, _) in self.KEYS.items():
            if key == "fit.model":
                continue
            value = getattr(self, attr)
            if attr == "runs":
                value = self.n_runs
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif value is None:
                value = "auto"
            lines.append(f"{key} = {value}")
        for k in sorted(self.gridworld):
            lines.append(f"gridworld.{k} = {self.gridworld[k]}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out

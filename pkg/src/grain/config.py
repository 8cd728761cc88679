"""Run configuration: typed flat keys, file parsing, validation."""
from __future__ import annotations

from dataclasses import dataclass, field

from .env import RewardConfig
from .td3 import Td3Config


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    """Everything the end-to-end pipeline needs, with desk-scale defaults."""

    seed: int = 0
    rl_steps: int = 5000          # T: environment steps in the policy phase
    rl_updates_per_step: int = 1  # K: agent updates per environment step
    rl_warmup_steps: int = 0      # uniform-random actions before the policy acts
    episode_len: int = 64         # walk length before resampling a start node
    snapshot_episodes: int = 4    # episodes each policy snapshot is scored over
    # the probe must be near-converged to rank action fields faithfully;
    # underfit probes rank by feature scale and optimization-path quirks
    inner_epochs: int = 60
    inner_lr: float = 0.5
    action_quantum: float = 0.1
    td3: Td3Config = field(default_factory=Td3Config)
    reward: RewardConfig = field(default_factory=RewardConfig)
    gnn_epochs: int = 200
    gnn_lr: float = 0.01
    weight_decay: float = 5e-4
    hidden: int = 64
    dropout: float = 0.5
    alpha: float = 0.2
    k_max: int = 8
    layers: int = 2
    run_gcn: bool = True
    run_mlp: bool = True

    def validate(self) -> None:
        for key, _, check, describe in _KEYS:
            if not check(_get(self, key)):
                raise ConfigError(f"{key} out of range: must be {describe}")
        self.td3.validate()
        self.reward.validate()


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit(x):
    return 0.0 <= x <= 1.0


def _frac_open(x):
    return 0.0 <= x < 1.0


# (flat key, type, range check, human description)
_KEYS = [
    ("seed", int, _nonneg, "a nonnegative integer"),
    ("rl.steps", int, _nonneg, "a nonnegative integer"),
    ("rl.updates_per_step", int, _positive, "a positive integer"),
    ("rl.warmup_steps", int, _nonneg, "a nonnegative integer"),
    ("rl.episode_len", int, _positive, "a positive integer"),
    ("rl.snapshot_episodes", int, _positive, "a positive integer"),
    ("env.inner_epochs", int, _positive, "a positive integer"),
    ("env.inner_lr", float, _positive, "a positive float"),
    ("env.action_quantum", float, _positive, "a positive float"),
    ("td3.gamma", float, _frac_open, "in [0, 1)"),
    ("td3.tau", float, lambda x: 0 < x <= 1, "in (0, 1]"),
    ("td3.policy_delay", int, _positive, "a positive integer"),
    ("td3.explore_noise", float, _nonneg, "a nonnegative float"),
    ("td3.target_noise", float, _nonneg, "a nonnegative float"),
    ("td3.noise_clip", float, _positive, "a positive float"),
    ("td3.batch_size", int, _positive, "a positive integer"),
    ("td3.buffer_capacity", int, _positive, "a positive integer"),
    ("td3.hidden", int, _positive, "a positive integer"),
    ("td3.lr", float, _positive, "a positive float"),
    ("td3.actor_weight_decay", float, _nonneg, "a nonnegative float"),
    ("reward.scale", float, _positive, "a positive float"),
    ("reward.window", int, _nonneg, "a nonnegative integer"),
    ("gnn.epochs", int, _positive, "a positive integer"),
    ("gnn.lr", float, _positive, "a positive float"),
    ("gnn.weight_decay", float, _nonneg, "a nonnegative float"),
    ("gnn.hidden", int, _positive, "a positive integer"),
    ("gnn.dropout", float, _frac_open, "in [0, 1)"),
    ("gnn.alpha", float, _unit, "in [0, 1]"),
    ("gnn.k_max", int, lambda x: x >= 1, "an integer >= 1"),
    ("gnn.layers", int, _positive, "a positive integer"),
    ("baselines.gcn", bool, lambda x: isinstance(x, bool), "true or false"),
    ("baselines.mlp", bool, lambda x: isinstance(x, bool), "true or false"),
]

_PATHS = {
    "seed": ("seed",),
    "rl.steps": ("rl_steps",),
    "rl.updates_per_step": ("rl_updates_per_step",),
    "rl.warmup_steps": ("rl_warmup_steps",),
    "rl.episode_len": ("episode_len",),
    "rl.snapshot_episodes": ("snapshot_episodes",),
    "env.inner_epochs": ("inner_epochs",),
    "env.inner_lr": ("inner_lr",),
    "env.action_quantum": ("action_quantum",),
    "td3.gamma": ("td3", "gamma"),
    "td3.tau": ("td3", "tau"),
    "td3.policy_delay": ("td3", "policy_delay"),
    "td3.explore_noise": ("td3", "explore_noise"),
    "td3.target_noise": ("td3", "target_noise"),
    "td3.noise_clip": ("td3", "noise_clip"),
    "td3.batch_size": ("td3", "batch_size"),
    "td3.buffer_capacity": ("td3", "buffer_capacity"),
    "td3.hidden": ("td3", "hidden"),
    "td3.lr": ("td3", "lr"),
    "td3.actor_weight_decay": ("td3", "actor_weight_decay"),
    "reward.scale": ("reward", "scale"),
    "reward.window": ("reward", "window"),
    "gnn.epochs": ("gnn_epochs",),
    "gnn.lr": ("gnn_lr",),
    "gnn.weight_decay": ("weight_decay",),
    "gnn.hidden": ("hidden",),
    "gnn.dropout": ("dropout",),
    "gnn.alpha": ("alpha",),
    "gnn.k_max": ("k_max",),
    "gnn.layers": ("layers",),
    "baselines.gcn": ("run_gcn",),
    "baselines.mlp": ("run_mlp",),
}


def _get(config: TrainConfig, key: str):
    obj = config
    for attr in _PATHS[key]:
        obj = getattr(obj, attr)
    return obj


def _set(config: TrainConfig, key: str, value) -> None:
    path = _PATHS[key]
    obj = config
    for attr in path[:-1]:
        obj = getattr(obj, attr)
    setattr(obj, path[-1], value)


def _parse_value(key: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def to_flat_dict(config: TrainConfig) -> dict:
    """Stable flat-key echo of every configurable value."""
    return {key: _get(config, key) for key, _, _, _ in _KEYS}


def load_config(path: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse a `key = value` file of flat dotted keys onto defaults.

    Unknown keys are rejected, and every value passes its typed range check
    before the config is returned.
    """
    config = base or TrainConfig()
    types = {key: typ for key, typ, _, _ in _KEYS}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {text!r}")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            _set(config, key, _parse_value(key, raw, types[key]))
    config.validate()
    return config

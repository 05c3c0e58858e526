"""Experiment configuration: JSON in, validated dataclass out, effective
config written back next to the outputs so a run can be reproduced."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..envs import env_suite_catalog
from ..estimators import ESTIMATOR_KINDS

__all__ = ["ExperimentConfig", "ConfigError"]


class ConfigError(ValueError):
    pass


_NETS_DEFAULTS = {
    "encoder": "linear",           # linear | mlp | cnn
    "encoder_hidden": (64,),
    "embed_width": 32,
    "lstm_width": 32,
    "policy_hidden": (32,),
    "value_hidden": (32,),
    "feed_prev_action": False,
}

_HINDSIGHT_DEFAULTS = {
    "variant": "backward_rnn",     # backward_rnn | attention
    "phi_width": 16,
    "rnn_width": 16,
    "backprop_window": None,
    "unroll": None,
    "attn_heads": 2,
    "attn_key_width": 16,
    "attn_value_width": 16,
    "attn_mlp_width": 64,
    "attn_dropout": 0.0,
    "grads_into_fs": True,
    "sees_actions": False,
    "sees_reward": True,
    "im_detach_policy": False,
}

_CLASSIFIER_DEFAULTS = {
    "hidden": (64, 64),
    "policy_residual": False,
}

_WEIGHTS_DEFAULTS = {
    "pg": 1.0,
    "fwd": 5e-2,
    "hs": 5e-2,
    "sup": 1e-2,
    "im": 1.0,
    "entropy": 5e-3,
    "beta_im": 0.1,
    "im_mode": "kl",
    "constraint": "entropy_scaled",
    "mode": "geco",
    "geco_step": 1e-2,
    "geco_literal": False,
    "lambda_min": 1e-6,
    "lambda_max": 1e6,
}

_SCHEDULE_DEFAULTS = {
    # fraction of training after which the entropy bonus decays linearly to 0
    "entropy_anneal_from": None,
    # extra classifier-only refits per update (inputs detached, so cheap)
    "classifier_inner_steps": 0,
    # fraction of training before the PG advantage switches from the forward
    # baseline to the hindsight baseline (lets the classifier and multiplier
    # settle before the policy trusts the conditional baseline)
    "hindsight_advantage_from": 0.0,
}

_OPTIMIZER_DEFAULTS = {
    "algo": "adam",
    "lr": 4e-4,
    "lr_omega_scale": 1.0,
    "decay": 0.99,
    "epsilon": 1e-8,
    "momentum": 0.0,
    "beta1": 0.9,
    "beta2": 0.999,
}

_ESTIMATOR_OPT_DEFAULTS = {
    "max_ratio": 100.0,
    "h_floor": 1e-6,
    "drop_leading_discount": False,
}


def _merge(defaults: dict, given: dict | None, label: str) -> dict:
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"{label}: unknown keys {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    for key, value in out.items():
        if isinstance(defaults[key], tuple) and isinstance(value, list):
            out[key] = tuple(value)
    return out


@dataclass
class ExperimentConfig:
    name: str
    env: str
    env_overrides: dict = field(default_factory=dict)
    estimator: str = "cca"
    estimator_opts: dict = field(default_factory=dict)
    gamma: float = 0.99
    total_episodes: int = 10_000
    episodes_per_update: int = 16
    metrics_every: int = 1
    eval_window: int = 500
    classifier_warmup: int = 0
    seeds: list = field(default_factory=lambda: [0])
    nets: dict = field(default_factory=dict)
    hindsight: dict = field(default_factory=dict)
    classifier: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    out_dir: str | None = None

    def __post_init__(self):
        if self.env not in env_suite_catalog():
            raise ConfigError(f"unknown environment {self.env!r}")
        valid = set(ESTIMATOR_KINDS)
        if self.estimator not in valid:
            raise ConfigError(f"estimator {self.estimator!r} not in {sorted(valid)}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma {self.gamma} outside (0, 1]")
        if self.total_episodes <= 0 or self.episodes_per_update <= 0:
            raise ConfigError("episode counts must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed required")
        self.nets = _merge(_NETS_DEFAULTS, self.nets, "nets")
        self.hindsight = _merge(_HINDSIGHT_DEFAULTS, self.hindsight, "hindsight")
        self.classifier = _merge(_CLASSIFIER_DEFAULTS, self.classifier,
                                 "classifier")
        self.weights = _merge(_WEIGHTS_DEFAULTS, self.weights, "weights")
        self.optimizer = _merge(_OPTIMIZER_DEFAULTS, self.optimizer, "optimizer")
        self.estimator_opts = _merge(_ESTIMATOR_OPT_DEFAULTS, self.estimator_opts,
                                     "estimator_opts")
        self.schedule = _merge(_SCHEDULE_DEFAULTS, self.schedule, "schedule")

    # -- serialization -------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "name" not in data or "env" not in data:
            raise ConfigError("config needs at least 'name' and 'env'")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def write_effective(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {obj!r}")

"""Named environment specs: the full-size tasks plus desk-scale variants
sized for CI acceptance runs."""

from __future__ import annotations

from dataclasses import replace

from .bandit import BanditEnv, BanditSpec, MultiBandit, MultiBanditSpec
from .interleaving import InterleavingEnv, InterleavingSpec
from .keytodoor import KeyToDoorEnv, KeyToDoorSpec

__all__ = ["env_suite_catalog", "make_env", "make_spec"]


def env_suite_catalog() -> dict:
    """Frozen named configurations."""
    return {
        "bandit": BanditSpec(n=10, k=64, sigma_r=1.0),
        "bandit-desk": BanditSpec(n=3, k=16, sigma_r=1.0),
        "multi-bandit": MultiBanditSpec(m=2, n=3, k=16),
        "ktd-low": KeyToDoorSpec(room_size=7, n_apples=10,
                                 apple_rewards=(1.0,), door_reward=1.0,
                                 phase_steps=(15, 40, 15)),
        "ktd-high": KeyToDoorSpec(room_size=7, n_apples=10,
                                  apple_rewards=(1.0, 10.0), door_reward=1.0,
                                  phase_steps=(15, 40, 15)),
        "ktd-desk": KeyToDoorSpec(room_size=5, n_apples=3,
                                  apple_rewards=(1.0, 10.0), door_reward=1.0,
                                  phase_steps=(7, 15, 7),
                                  randomize_layout=False),
        "ktd-desk-low": KeyToDoorSpec(room_size=5, n_apples=3,
                                      apple_rewards=(1.0,), door_reward=1.0,
                                      phase_steps=(7, 15, 7),
                                      randomize_layout=False),
        "interleave-2": InterleavingSpec(n_tasks=2),
        "interleave-4": InterleavingSpec(n_tasks=4),
        "interleave-6": InterleavingSpec(n_tasks=6),
        "interleave-desk": InterleavingSpec(n_tasks=2, episode_pairs=3,
                                            query_steps=2, answer_steps=1),
    }


def make_spec(name: str, overrides: dict | None = None):
    catalog = env_suite_catalog()
    if name not in catalog:
        raise KeyError(f"unknown environment {name!r}; "
                       f"catalog: {sorted(catalog)}")
    spec = catalog[name]
    if overrides:
        unknown = set(overrides) - set(spec.__dataclass_fields__)
        if unknown:
            raise KeyError(f"{name}: unknown spec overrides {sorted(unknown)}")
        typed = {}
        for key, value in overrides.items():
            if isinstance(value, list):
                value = tuple(value)
            typed[key] = value
        spec = replace(spec, **typed)
    return spec


def make_env(spec):
    if isinstance(spec, str):
        spec = make_spec(spec)
    if isinstance(spec, BanditSpec):
        return BanditEnv(spec)
    if isinstance(spec, MultiBanditSpec):
        return MultiBandit(spec)
    if isinstance(spec, KeyToDoorSpec):
        return KeyToDoorEnv(spec)
    if isinstance(spec, InterleavingSpec):
        return InterleavingEnv(spec)
    raise TypeError(f"unknown spec type {type(spec)!r}")

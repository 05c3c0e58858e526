"""Shared environment contract: seeded reset/step with event records."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Observation", "Environment", "EpisodeOverError", "substream"]


class EpisodeOverError(RuntimeError):
    """step() called after the episode finished."""


@dataclass
class Observation:
    layout: str                 # flat_vector | grid_onehot
    payload: np.ndarray
    prev_action: int = -1       # -1 at episode start
    prev_reward: float = 0.0


def substream(*key) -> np.random.Generator:
    """Counter-based generator for a named stream; the key mixes seeds and
    stream labels through a stable hash, so runs reproduce across
    processes and platforms."""
    words = [0, 0]
    for i, k in enumerate(key):
        v = zlib.crc32(k.encode()) if isinstance(k, str) else int(k) & (2**64 - 1)
        # mix with a distinct odd multiplier per position, splitmix-style
        words[i % 2] ^= (v * (0x9E3779B97F4A7C15 + 2 * i + 1)) & (2**64 - 1)
    return np.random.Generator(np.random.Philox(key=np.array(words,
                                                             dtype=np.uint64)))


class Environment:
    """Base reset/step contract; subclasses fill in the dynamics."""

    action_count: int
    obs_layout: str
    obs_shape: tuple

    def __init__(self):
        self._done = True

    def reset(self, episode_seed: int) -> Observation:
        raise NotImplementedError

    def step(self, action: int):
        """-> (Observation, reward, done, events)."""
        raise NotImplementedError

    def max_return(self) -> float:
        """Analytic bound on the episode return (noise-free part)."""
        raise NotImplementedError

    # shared guards -----------------------------------------------------------
    def _require_live(self):
        if self._done:
            raise EpisodeOverError("step() after episode end; call reset()")

    def _check_action(self, action: int):
        if not 0 <= int(action) < self.action_count:
            raise ValueError(f"action {action} outside [0, {self.action_count})")

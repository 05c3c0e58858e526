"""Small tabular MDPs with softmax policies, enumerable exactly.

Rewards may carry a per-episode exogenous noise term:
R_t = rewards[x, a] + weight[x, a] * eps, with eps drawn once per episode
from a finite support. The noise never touches transitions, so it is
conditionally independent of every action given any state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

__all__ = ["RewardNoise", "TabularMdp", "TabularPolicy", "load_fixture",
           "fixture_names"]


@dataclass
class RewardNoise:
    support: tuple[float, ...]
    probs: tuple[float, ...]
    weight: np.ndarray  # (S, A) multiplier

    def __post_init__(self):
        self.support = tuple(float(v) for v in self.support)
        self.probs = tuple(float(p) for p in self.probs)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if len(self.support) != len(self.probs):
            raise ValueError("noise support and probs lengths differ")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("noise probs must sum to 1")


@dataclass
class TabularMdp:
    transitions: np.ndarray   # (S, A, S)
    rewards: np.ndarray       # (S, A)
    horizon: int
    initial_state: int = 0
    noise: RewardNoise | None = None

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        s, a, s2 = self.transitions.shape
        if s != s2 or self.rewards.shape != (s, a):
            raise ValueError("inconsistent transition/reward table shapes")
        rows = self.transitions.sum(axis=2)
        if np.max(np.abs(rows - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    def reward(self, x: int, a: int, eps: float) -> float:
        base = float(self.rewards[x, a])
        if self.noise is None:
            return base
        return base + float(self.noise.weight[x, a]) * eps

    def noise_cells(self) -> list[tuple[float, float]]:
        """(eps value, probability) pairs; a single zero cell when noiseless."""
        if self.noise is None:
            return [(0.0, 1.0)]
        return list(zip(self.noise.support, self.noise.probs))


class TabularPolicy:
    """Softmax policy with one logit row per (step, state).

    The logits are a single differentiable parameter tensor, so estimator
    gradients over enumerated trajectories accumulate into one array of
    shape (horizon, S, A).
    """

    def __init__(self, mdp: TabularMdp, logits: np.ndarray | None = None):
        shape = (mdp.horizon, mdp.n_states, mdp.n_actions)
        if logits is None:
            logits = np.zeros(shape)
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != shape:
            raise ValueError(f"logits shape {logits.shape} != {shape}")
        self.n_states = mdp.n_states
        self.n_actions = mdp.n_actions
        self.horizon = mdp.horizon
        self.logits = ad.parameter(logits.copy(), name="policy/logits")
        self._cache: dict[tuple[int, int], tuple[Tensor, Tensor]] = {}

    def probs(self) -> np.ndarray:
        """(horizon, S, A) action probabilities, plain numpy."""
        z = self.logits.data - self.logits.data.max(axis=2, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=2, keepdims=True)

    def dist_tensors(self, t: int, x: int) -> tuple[Tensor, Tensor]:
        """(pi, log pi) tensors of shape (1, A) for state x at step t,
        cached so enumerated trajectories share subgraphs."""
        key = (t, x)
        if key not in self._cache:
            row = ad.reshape(ad.narrow(ad.narrow(self.logits, 0, t, 1), 1, x, 1),
                             (1, self.n_actions))
            self._cache[key] = (ad.softmax(row, axis=1), ad.log_softmax(row, axis=1))
        return self._cache[key]

    def clear_graph_cache(self) -> None:
        self._cache.clear()

    def params(self) -> list[Tensor]:
        return [self.logits]


_FIXTURE_DIR = Path(__file__).parent / "fixtures"


def fixture_names() -> list[str]:
    return sorted(p.stem for p in _FIXTURE_DIR.glob("*.json"))


def load_fixture(name: str) -> TabularMdp:
    """Load one of the JSON test MDPs shipped with the package."""
    path = _FIXTURE_DIR / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no MDP fixture named {name!r}; "
                                f"available: {fixture_names()}")
    spec = json.loads(path.read_text())
    noise = None
    if "noise" in spec:
        noise = RewardNoise(support=spec["noise"]["support"],
                            probs=spec["noise"]["probs"],
                            weight=np.asarray(spec["noise"]["weight"]))
    return TabularMdp(transitions=np.asarray(spec["transitions"]),
                      rewards=np.asarray(spec["rewards"]),
                      horizon=int(spec["horizon"]),
                      initial_state=int(spec.get("initial_state", 0)),
                      noise=noise)

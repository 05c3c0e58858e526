"""Trajectory records and hindsight annotations consumed by the estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..autodiff import Tensor

__all__ = ["StepRecord", "Trajectory", "HindsightAnnotation", "discounted_returns"]


@dataclass
class StepRecord:
    """One decision step: what was seen, what the policy said, what happened."""

    observation: Any
    agent_state: Any
    action: int
    reward: float
    log_prob: Tensor          # log pi(A_t | H_t), shape (1, 1)
    dist: Tensor              # full policy distribution pi(. | H_t), shape (1, A)
    log_dist: Tensor          # log pi(. | H_t), shape (1, A)


@dataclass
class Trajectory:
    """Full-episode record; the terminal observation (after the last action)
    is kept for hindsight networks but carries no decision."""

    steps: list[StepRecord]
    gamma: float
    terminal_observation: Any = None
    events: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"discount {self.gamma} outside (0, 1]")

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps])

    @property
    def actions(self) -> np.ndarray:
        return np.array([s.action for s in self.steps], dtype=np.int64)


@dataclass
class HindsightAnnotation:
    """Per-step hindsight quantities; any entry may come from learned
    networks (evaluated to numbers) or from exact enumeration tables."""

    phi: list | None = None                 # hindsight statistic per step
    values: np.ndarray | None = None        # V(X_t, Phi_t), shape (T,)
    log_h: list | None = None               # log h(. | X_t, Phi_t), (T, A)
    critic: list | None = None              # Q(X_t, Phi_t, .), (T, A)
    return_log_h: list | None = None        # log h(. | X_t, G_t) for return HCA
    state_log_h: list | None = None         # per t: {k >= 1: log h(. | X_t, X_{t+k})}

    def check_length(self, n: int) -> None:
        for name in ("phi", "values", "log_h", "critic", "return_log_h", "state_log_h"):
            item = getattr(self, name)
            if item is not None and len(item) != n:
                raise ValueError(f"annotation field {name} has length "
                                 f"{len(item)}, trajectory has {n}")


def discounted_returns(traj: Trajectory) -> np.ndarray:
    """Per-step discounted return by backward recursion G_t = R_t + gamma G_{t+1}."""
    rewards = traj.rewards
    out = np.zeros_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + traj.gamma * acc
        out[t] = acc
    return out

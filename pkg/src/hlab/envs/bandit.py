"""Contextual bandit with feedback, single- and multi-agent versions.

One decision step per episode: the agent sees a one-hot context C in
[-N, N], picks an action on the same range, and receives
R = -(C - A)^2 + eps_r. The terminal observation carries the feedback
vector F = U_C + V_A + W eps_r, whose tables are drawn once per spec seed
and frozen across episodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Environment, Observation, substream

__all__ = ["BanditSpec", "BanditEnv", "MultiBanditSpec", "MultiBandit",
           "multibandit_step"]


@dataclass
class BanditSpec:
    n: int = 10                # contexts/actions span -n..n
    k: int = 64                # feedback width
    sigma_r: float = 1.0       # reward noise std
    seed: int = 0              # freezes U, V, W

    @property
    def span(self) -> int:
        return 2 * self.n + 1


class BanditEnv(Environment):
    def __init__(self, spec: BanditSpec):
        super().__init__()
        self.spec = spec
        table_rng = substream(spec.seed, "bandit-tables")
        self.u = table_rng.standard_normal((spec.span, spec.k))
        self.v = table_rng.standard_normal((spec.span, spec.k))
        self.w = table_rng.standard_normal(spec.k)
        self.action_count = spec.span
        self.obs_layout = "flat_vector"
        self.obs_shape = (spec.span + spec.k,)

    def _obs(self, context_onehot, feedback, prev_action=-1, prev_reward=0.0):
        payload = np.concatenate([context_onehot, feedback])
        return Observation(layout="flat_vector", payload=payload,
                           prev_action=prev_action, prev_reward=prev_reward)

    def reset(self, episode_seed: int) -> Observation:
        rng = substream(self.spec.seed, "bandit-episode", episode_seed)
        self.context = int(rng.integers(0, self.spec.span))  # id of C in [-n, n]
        self.eps_r = float(rng.normal(0.0, self.spec.sigma_r)) \
            if self.spec.sigma_r > 0 else 0.0
        self._done = False
        onehot = np.zeros(self.spec.span)
        onehot[self.context] = 1.0
        return self._obs(onehot, np.zeros(self.spec.k))

    def step(self, action: int):
        self._require_live()
        self._check_action(action)
        self._done = True
        c_val = self.context - self.spec.n
        a_val = int(action) - self.spec.n
        reward = -float((c_val - a_val) ** 2) + self.eps_r
        feedback = self.u[self.context] + self.v[int(action)] + self.w * self.eps_r
        obs = self._obs(np.zeros(self.spec.span), feedback,
                        prev_action=int(action), prev_reward=reward)
        events = [{"type": "bandit", "context": c_val, "action": a_val,
                   "eps_r": self.eps_r}]
        return obs, reward, True, events

    def max_return(self) -> float:
        return 0.0  # informative part; the noise term is unbounded


@dataclass
class MultiBanditSpec:
    m: int = 2                 # number of coupled agents
    n: int = 3
    k: int = 16
    sigma_f: float = 0.0       # feedback noise std
    seed: int = 0

    @property
    def span(self) -> int:
        return 2 * self.n + 1


class MultiBandit:
    """M coupled bandits: feedback row i depends on every agent's context
    and action; the terminal reward is the joint sum, shared by all."""

    def __init__(self, spec: MultiBanditSpec):
        if spec.m < 2:
            raise ValueError("multi-bandit needs m >= 2")
        self.spec = spec
        rng = substream(spec.seed, "multibandit-tables")
        width = spec.m * spec.span
        self.w_c = rng.standard_normal((spec.m, spec.k, width))
        self.w_a = rng.standard_normal((spec.m, spec.k, width))
        self.action_count = spec.span
        self.obs_layout = "flat_vector"
        self.obs_shape = (spec.span + spec.k,)
        self._done = True

    def _onehot_block(self, ids) -> np.ndarray:
        block = np.zeros(self.spec.m * self.spec.span)
        for i, c in enumerate(ids):
            block[i * self.spec.span + c] = 1.0
        return block

    def reset(self, episode_seed: int) -> list[Observation]:
        rng = substream(self.spec.seed, "multibandit-episode", episode_seed)
        self.contexts = rng.integers(0, self.spec.span, size=self.spec.m)
        self.eps_f = (rng.standard_normal((self.spec.m, self.spec.k))
                      * self.spec.sigma_f)
        self._done = False
        out = []
        for i in range(self.spec.m):
            onehot = np.zeros(self.spec.span)
            onehot[self.contexts[i]] = 1.0
            out.append(Observation(layout="flat_vector",
                                   payload=np.concatenate(
                                       [onehot, np.zeros(self.spec.k)])))
        return out

    def step(self, joint_action):
        if self._done:
            raise RuntimeError("step() after episode end; call reset()")
        joint_action = np.asarray(joint_action, dtype=np.int64)
        if joint_action.shape != (self.spec.m,) or \
                np.any(joint_action < 0) or np.any(joint_action >= self.spec.span):
            raise ValueError(f"malformed joint action {joint_action}")
        self._done = True
        feedback = (self.w_c @ self._onehot_block(self.contexts)
                    + self.w_a @ self._onehot_block(joint_action)
                    + self.eps_f)
        c_vals = self.contexts - self.spec.n
        a_vals = joint_action - self.spec.n
        joint_reward = -float(np.sum((c_vals - a_vals) ** 2))
        observations = []
        rewards = []
        for i in range(self.spec.m):
            observations.append(Observation(
                layout="flat_vector",
                payload=np.concatenate([np.zeros(self.spec.span), feedback[i]]),
                prev_action=int(joint_action[i]), prev_reward=joint_reward))
            rewards.append(joint_reward)
        events = [{"type": "multibandit", "contexts": c_vals.tolist(),
                   "actions": a_vals.tolist()}]
        return observations, rewards, True, events

    def feedback_tensor_shape(self) -> tuple[int, int]:
        return (self.spec.m, self.spec.k)


def multibandit_step(env: MultiBandit, joint_action):
    return env.step(joint_action)

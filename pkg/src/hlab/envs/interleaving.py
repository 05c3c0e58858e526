"""Interleaved query/answer task rooms.

Each episode is a random interleaving of task instances; a query room
shows a task context and two colored squares (one rewarding for that
task), the paired answer room arrives later with the task reward and a
visual cue for the correct color. Which five of the ten colors pay for
each task is frozen per spec seed; episode composition resamples every
episode. Picking any square pays a small immediate bonus; the task reward
is deferred to the answer room.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Environment, Observation, substream

__all__ = ["InterleavingSpec", "InterleavingEnv", "TASK_REWARDS"]

TASK_REWARDS = (80.0, 4.0, 100.0, 6.0, 2.0, 10.0)


@dataclass
class InterleavingSpec:
    n_tasks: int = 6
    n_colors: int = 10
    rewarding_per_task: int = 5
    episode_pairs: int = 10
    query_steps: int = 9        # steps to reach a square
    answer_steps: int = 5
    pickup_bonus: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_tasks <= len(TASK_REWARDS):
            raise ValueError(f"n_tasks must be in 1..{len(TASK_REWARDS)}")

    @property
    def task_rewards(self) -> tuple:
        return TASK_REWARDS[:self.n_tasks]

    @property
    def episode_length(self) -> int:
        return self.episode_pairs * (self.query_steps + self.answer_steps)


class InterleavingEnv(Environment):
    """Flat symbolic observation:
    [room flags (query, answer), task one-hot, left color, right color,
    cue color]."""

    def __init__(self, spec: InterleavingSpec):
        super().__init__()
        self.spec = spec
        rng = substream(spec.seed, "interleave-colors")
        self.rewarding = [
            set(rng.choice(spec.n_colors, size=spec.rewarding_per_task,
                           replace=False).tolist())
            for _ in range(spec.n_tasks)]
        self.action_count = 2  # pick the left or the right square
        self.obs_layout = "flat_vector"
        self.obs_shape = (2 + spec.n_tasks + 3 * spec.n_colors,)

    # -- episode composition ---------------------------------------------------
    def _compose(self, rng: np.random.Generator) -> list[dict]:
        spec = self.spec
        instances = []
        for i in range(spec.episode_pairs):
            task = int(rng.integers(0, spec.n_tasks))
            good = int(rng.choice(sorted(self.rewarding[task])))
            bad = int(rng.choice(sorted(set(range(spec.n_colors))
                                        - self.rewarding[task])))
            left_good = bool(rng.integers(0, 2))
            instances.append({"task": task, "good": good, "bad": bad,
                              "left_good": left_good, "id": i})
        # interleave: random order with each query before its answer
        pending = list(range(len(instances)))
        queried: list[int] = []
        rooms = []
        while pending or queried:
            choices = []
            if pending:
                choices.append("q")
            if queried:
                choices.append("a")
            kind = choices[int(rng.integers(0, len(choices)))]
            if kind == "q":
                idx = pending.pop(0)
                rooms.append(("query", idx))
                queried.append(idx)
            else:
                rooms.append(("answer", queried.pop(0)))
        return instances, rooms

    def reset(self, episode_seed: int) -> Observation:
        rng = substream(self.spec.seed, "interleave-episode", episode_seed)
        self.instances, self.rooms = self._compose(rng)
        self.room_idx = 0
        self.step_in_room = 0
        self.choices: dict[int, int] = {}   # instance id -> picked color
        self._done = False
        self._prev_action = -1
        self._prev_reward = 0.0
        return self._observe()

    def _room_len(self, kind: str) -> int:
        return self.spec.query_steps if kind == "query" else self.spec.answer_steps

    def step(self, action: int):
        self._require_live()
        self._check_action(action)
        kind, idx = self.rooms[self.room_idx]
        inst = self.instances[idx]
        reward = 0.0
        events: list[dict] = []
        last_step_in_room = self.step_in_room == self._room_len(kind) - 1
        if kind == "query" and last_step_in_room:
            left, right = ((inst["good"], inst["bad"]) if inst["left_good"]
                           else (inst["bad"], inst["good"]))
            picked = left if int(action) == 0 else right
            self.choices[idx] = picked
            reward += self.spec.pickup_bonus
            events.append({"type": "query", "task": inst["task"],
                           "picked": picked, "correct": picked == inst["good"]})
        if kind == "answer" and self.step_in_room == 0:
            correct = self.choices.get(idx) == inst["good"]
            task_reward = self.spec.task_rewards[inst["task"]] if correct else 0.0
            reward += task_reward
            events.append({"type": "answer", "task": inst["task"],
                           "reward": task_reward})

        self.step_in_room += 1
        if self.step_in_room >= self._room_len(kind):
            self.room_idx += 1
            self.step_in_room = 0
            if self.room_idx >= len(self.rooms):
                self._done = True
        self._prev_action = int(action)
        self._prev_reward = reward
        return self._observe(), reward, self._done, events

    def _observe(self) -> Observation:
        spec = self.spec
        payload = np.zeros(self.obs_shape[0])
        if not self._done:
            kind, idx = self.rooms[self.room_idx]
            inst = self.instances[idx]
            payload[0 if kind == "query" else 1] = 1.0
            payload[2 + inst["task"]] = 1.0
            base = 2 + spec.n_tasks
            if kind == "query":
                left, right = ((inst["good"], inst["bad"]) if inst["left_good"]
                               else (inst["bad"], inst["good"]))
                payload[base + left] = 1.0
                payload[base + spec.n_colors + right] = 1.0
            else:
                payload[base + 2 * spec.n_colors + inst["good"]] = 1.0
        return Observation(layout="flat_vector", payload=payload,
                           prev_action=self._prev_action,
                           prev_reward=self._prev_reward)

    def max_return(self) -> float:
        best = max(self.spec.task_rewards)
        return self.spec.episode_pairs * (self.spec.pickup_bonus + best)

    @property
    def horizon(self) -> int:
        return self.spec.episode_length

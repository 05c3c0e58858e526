"""Key-To-Door gridworld family.

Three rooms visited on fixed time budgets with teleports in between: a key
room (no reward for the key), an apple room (immediate rewards, value
drawn once per episode), and a door room (door pays only when the key was
picked up earlier). Observations are egocentric one-hot channel windows;
cells beyond the walls read as wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import Environment, Observation, substream

__all__ = ["KeyToDoorSpec", "KeyToDoorEnv", "CHANNELS", "ACTIONS"]

CHANNELS = ("wall", "key", "apple", "door")
ACTIONS = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


@dataclass
class KeyToDoorSpec:
    room_size: int = 7                 # square rooms, outer ring is wall
    view_radius: int = 2
    n_apples: int = 10
    apple_rewards: tuple = (1.0, 10.0)  # sampled once per episode
    door_reward: float = 1.0
    phase_steps: tuple = (15, 40, 15)
    seed: int = 0
    randomize_layout: bool = True      # per-episode positions; else per-seed

    def __post_init__(self):
        interior = (self.room_size - 2) ** 2
        if self.n_apples + 2 > interior:
            raise ValueError("room too small for the requested apples")


class KeyToDoorEnv(Environment):
    def __init__(self, spec: KeyToDoorSpec):
        super().__init__()
        self.spec = spec
        self.action_count = 4
        self.obs_layout = "grid_onehot"
        side = 2 * spec.view_radius + 1
        self.obs_shape = (side, side, len(CHANNELS))

    # -- layout ----------------------------------------------------------------
    def _sample_layout(self, rng: np.random.Generator) -> dict:
        s = self.spec.room_size
        interior = [(r, c) for r in range(1, s - 1) for c in range(1, s - 1)]
        start = (s // 2, s // 2)
        free = [p for p in interior if p != start]

        def pick(n):
            idx = rng.choice(len(free), size=n, replace=False)
            return [free[i] for i in sorted(idx, reverse=True)]

        key_pos = pick(1)[0]
        free.remove(key_pos)
        apple_pos = pick(self.spec.n_apples)
        for p in apple_pos:
            free.remove(p)
        door_pos = pick(1)[0]
        return {"start": start, "key": key_pos, "apples": apple_pos,
                "door": door_pos}

    def reset(self, episode_seed: int, layout: dict | None = None) -> Observation:
        layout_rng = substream(self.spec.seed, "ktd-layout",
                               episode_seed if self.spec.randomize_layout else 0)
        value_rng = substream(self.spec.seed, "ktd-apple", episode_seed)
        self.layout = layout or self._sample_layout(layout_rng)
        self.apple_value = float(
            self.spec.apple_rewards[value_rng.integers(0, len(self.spec.apple_rewards))])
        self.phase = 0
        self.steps_in_phase = 0
        self.total_steps = 0
        self.key_held = False
        self.door_open = False
        self.apples_left = set(self.layout["apples"])
        self.key_present = True
        self.pos = self.layout["start"]
        self._done = False
        self._prev_action = -1
        self._prev_reward = 0.0
        return self._observe()

    # -- dynamics ----------------------------------------------------------------
    def step(self, action: int):
        self._require_live()
        self._check_action(action)
        events: list[dict] = []
        s = self.spec.room_size
        dr, dc = ACTIONS[int(action)]
        r, c = self.pos
        nr, nc = r + dr, c + dc
        if 1 <= nr <= s - 2 and 1 <= nc <= s - 2:
            self.pos = (nr, nc)
        reward = 0.0
        if self.phase == 0 and self.key_present and self.pos == self.layout["key"]:
            self.key_present = False
            self.key_held = True
            events.append({"type": "key_pickup", "step": self.total_steps})
        elif self.phase == 1 and self.pos in self.apples_left:
            self.apples_left.remove(self.pos)
            reward += self.apple_value
            events.append({"type": "apple_pickup", "step": self.total_steps,
                           "value": self.apple_value})
        elif self.phase == 2 and not self.door_open and \
                self.pos == self.layout["door"]:
            self.door_open = True
            if self.key_held:
                reward += self.spec.door_reward
                events.append({"type": "door_opened", "step": self.total_steps})
            else:
                events.append({"type": "door_locked", "step": self.total_steps})

        self.steps_in_phase += 1
        self.total_steps += 1
        if self.steps_in_phase >= self.spec.phase_steps[self.phase]:
            if self.phase == 2:
                self._done = True
            else:
                self.phase += 1
                self.steps_in_phase = 0
                self.pos = self.layout["start"]
                events.append({"type": "teleport", "room": self.phase})
        self._prev_action = int(action)
        self._prev_reward = reward
        return self._observe(), reward, self._done, events

    # -- observation ----------------------------------------------------------------
    def _visible_entities(self):
        if self.phase == 0:
            return {"key": [self.layout["key"]] if self.key_present else []}
        if self.phase == 1:
            return {"apple": list(self.apples_left)}
        return {"door": [] if self.door_open else [self.layout["door"]]}

    def _observe(self) -> Observation:
        rad = self.spec.view_radius
        side = 2 * rad + 1
        s = self.spec.room_size
        grid = np.zeros((side, side, len(CHANNELS)))
        entities = self._visible_entities()
        for i in range(side):
            for j in range(side):
                r = self.pos[0] - rad + i
                c = self.pos[1] - rad + j
                if not (1 <= r <= s - 2 and 1 <= c <= s - 2):
                    grid[i, j, CHANNELS.index("wall")] = 1.0
                    continue
                for name, cells in entities.items():
                    if (r, c) in cells:
                        grid[i, j, CHANNELS.index(name)] = 1.0
        return Observation(layout="grid_onehot", payload=grid,
                           prev_action=self._prev_action,
                           prev_reward=self._prev_reward)

    def max_return(self) -> float:
        return self.spec.n_apples * max(self.spec.apple_rewards) + \
            self.spec.door_reward

    @property
    def horizon(self) -> int:
        return sum(self.spec.phase_steps)

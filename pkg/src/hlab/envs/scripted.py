"""Scripted Key-To-Door controllers: breadth-first pathing to targets,
used for causal-gate tests and for reproducing hindsight-advantage tables
with perfect apple policies. When a phase has nothing to collect the
controller idles against a wall, steering around any pickup cells."""

from __future__ import annotations

from collections import deque

import numpy as np

from .keytodoor import ACTIONS, KeyToDoorEnv

__all__ = ["bfs_action", "run_scripted_episode"]


def _bfs_first_move(env: KeyToDoorEnv, targets: set, blocked: set) -> int | None:
    s = env.spec.room_size
    start = env.pos
    if start in targets:
        return 0
    prev: dict = {start: None}
    queue = deque([start])
    goal = None
    while queue:
        cell = queue.popleft()
        if cell in targets:
            goal = cell
            break
        for a, (dr, dc) in enumerate(ACTIONS):
            nxt = (cell[0] + dr, cell[1] + dc)
            if not (1 <= nxt[0] <= s - 2 and 1 <= nxt[1] <= s - 2):
                continue
            if nxt in blocked and nxt not in targets:
                continue
            if nxt not in prev:
                prev[nxt] = (cell, a)
                queue.append(nxt)
    if goal is None:
        return None
    cell = goal
    while prev[cell][0] != start:
        cell = prev[cell][0]
    return prev[cell][1]


def bfs_action(env: KeyToDoorEnv, targets: set, hazards: set = frozenset()) -> int:
    """First move along a shortest path to the nearest target, never moving
    through a hazard cell; with no targets, bump a wall (or reach one
    around the hazards) so nothing gets picked up by accident."""
    s = env.spec.room_size
    if targets:
        move = _bfs_first_move(env, targets, set(hazards))
        return 0 if move is None else move
    # idle: prefer an immediate wall bump
    r, c = env.pos
    for a, (dr, dc) in enumerate(ACTIONS):
        nr, nc = r + dr, c + dc
        if not (1 <= nr <= s - 2 and 1 <= nc <= s - 2):
            return a
    # otherwise walk toward any wall-adjacent safe cell, avoiding hazards
    edge = {(rr, cc) for rr in range(1, s - 1) for cc in range(1, s - 1)
            if (rr in (1, s - 2) or cc in (1, s - 2)) and (rr, cc) not in hazards}
    move = _bfs_first_move(env, edge, set(hazards))
    return 0 if move is None else move


def _phase_plan(env: KeyToDoorEnv, get_key: bool, open_door: bool,
                get_apples: bool) -> tuple[set, set]:
    if env.phase == 0:
        key = {env.layout["key"]} if env.key_present else set()
        return (key, set()) if get_key else (set(), key)
    if env.phase == 1:
        apples = set(env.apples_left)
        return (apples, set()) if get_apples else (set(), apples)
    door = set() if env.door_open else {env.layout["door"]}
    return (door, set()) if open_door else (set(), door)


def run_scripted_episode(env: KeyToDoorEnv, episode_seed: int,
                         get_key: bool, open_door: bool,
                         get_apples: bool = True) -> tuple[float, list]:
    """Roll one episode under a scripted policy; returns (undiscounted
    return, events)."""
    env.reset(episode_seed)
    total = 0.0
    events: list = []
    done = False
    while not done:
        targets, hazards = _phase_plan(env, get_key, open_door, get_apples)
        action = bfs_action(env, targets, hazards)
        _, reward, done, ev = env.step(action)
        total += reward
        events.extend(ev)
    return total, events

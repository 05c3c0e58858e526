"""Batched episode collection: lockstep rollout of same-horizon episodes
with actions sampled from the live forward pass; the unroll is reused as
the training graph."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..credit import AgentNets, EpisodeArrays
from ..envs import BanditEnv, Environment, InterleavingEnv, KeyToDoorEnv

__all__ = ["RolloutResult", "collect_batch", "domain_metrics",
           "record_golden_trace"]


@dataclass
class RolloutResult:
    data: EpisodeArrays
    unrolled: tuple            # (embeds, outs) from the live forward pass
    events: list               # per-episode event lists
    returns: np.ndarray        # undiscounted episode returns (B,)


def _sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    u = rng.random((probs.shape[0], 1))
    return (u < cum).argmax(axis=1)


def collect_batch(envs: list[Environment], nets: AgentNets,
                  episode_seeds: list[int], act_rng: np.random.Generator,
                  gamma: float) -> RolloutResult:
    """Roll one full episode in every environment instance simultaneously.

    All instances must share a fixed horizon so the batch stays rectangular.
    """
    from ..credit.pipeline import unroll_core  # local to avoid cycles

    b = len(envs)
    first = [env.reset(seed) for env, seed in zip(envs, episode_seeds)]
    obs_batch = [np.stack([o.payload for o in first])]

    embeds = []
    outs = []
    state = nets.core.initial_state(b)
    prev_rewards = np.zeros(b)
    prev_actions = np.full(b, -1, dtype=np.int64)
    actions_hist = []
    rewards_hist = []
    events = [[] for _ in range(b)]
    done_all = False
    t = 0
    while not done_all:
        emb = nets.core.encode(obs_batch[t])
        out = nets.core.step(emb, prev_rewards, state, prev_action=prev_actions)
        state = out.state
        embeds.append(emb)
        outs.append(out)
        acts = _sample_actions(out.probs.data, act_rng)
        step_rewards = np.zeros(b)
        payloads = []
        dones = []
        for i, env in enumerate(envs):
            obs, r, done, ev = env.step(int(acts[i]))
            payloads.append(obs.payload)
            step_rewards[i] = r
            dones.append(done)
            events[i].extend(ev)
        if any(dones) and not all(dones):
            raise RuntimeError("batched rollout needs a shared fixed horizon")
        done_all = all(dones)
        obs_batch.append(np.stack(payloads))
        actions_hist.append(acts)
        rewards_hist.append(step_rewards)
        prev_rewards = step_rewards
        prev_actions = acts
        t += 1
    # terminal step: feed the final observation through the core as well
    emb = nets.core.encode(obs_batch[t])
    out = nets.core.step(emb, prev_rewards, state, prev_action=prev_actions)
    embeds.append(emb)
    outs.append(out)

    data = EpisodeArrays(
        observations=np.stack(obs_batch, axis=1),
        rewards=np.stack(rewards_hist, axis=1),
        actions=np.stack(actions_hist, axis=1).astype(np.int64),
        gamma=gamma)
    return RolloutResult(data=data, unrolled=(embeds, outs), events=events,
                         returns=data.rewards.sum(axis=1))


EASY_TASKS = {0, 2}   # the two large-reward tasks


def domain_metrics(env: Environment, episode_events: list) -> dict:
    """Per-episode task metrics reconstructed from the event log."""
    if isinstance(env, KeyToDoorEnv):
        return {
            "door_prob": float(any(e["type"] == "door_opened"
                                   for e in episode_events)),
            "key_prob": float(any(e["type"] == "key_pickup"
                                  for e in episode_events)),
        }
    if isinstance(env, InterleavingEnv):
        easy = [e for e in episode_events
                if e["type"] == "query" and e["task"] in EASY_TASKS]
        hard = [e for e in episode_events
                if e["type"] == "query" and e["task"] not in EASY_TASKS]
        out = {}
        if easy:
            out["solve_easy"] = float(np.mean([e["correct"] for e in easy]))
        if hard:
            out["solve_hard"] = float(np.mean([e["correct"] for e in hard]))
        return out
    return {}


def record_golden_trace(env: Environment, episode_seed: int, actions,
                        path: str | Path) -> None:
    """Replay a fixed action sequence and append one JSON line per step."""
    path = Path(path)
    env.reset(episode_seed)
    rows = []
    for step, action in enumerate(actions):
        _, reward, done, events = env.step(int(action))
        rows.append({"step": step, "action": int(action), "reward": reward,
                     "events": events})
        if done:
            break
    with path.open("a") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

"""Episode forward pass: from raw episode arrays to the per-step tensors
the loss stack consumes, with all stop-gradient routing decided here.

Routing rules:
  - classifier training sees detached (H, Phi): its loss touches omega only;
  - independence losses see live (H, Phi) but frozen omega;
  - the hindsight pathway consumes H via a configurable boundary
    (hindsight_grads_into_fs) so baseline/IM gradients into the forward
    representation can be switched off;
  - PG advantages are computed from tensor values, never through the graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..nets import (
    AgentCore,
    ClassifierNet,
    HindsightCriticHead,
    HindsightNet,
    HindsightValueHead,
    Mlp,
)
from .losses import EpisodeBatch, LiveAnnotation

__all__ = ["AgentNets", "EpisodeArrays", "build_annotation", "unroll_core"]


@dataclass
class AgentNets:
    """Everything trainable, with parameter-group bookkeeping."""

    core: AgentCore
    hindsight: HindsightNet | None = None
    hs_value: HindsightValueHead | None = None
    classifier: ClassifierNet | None = None
    critic: HindsightCriticHead | None = None
    fwd_critic: Mlp | None = None
    hindsight_grads_into_fs: bool = True
    hindsight_sees_actions: bool = False
    hindsight_sees_reward: bool = True
    im_detach_policy: bool = False  # constrain Phi only, not the policy side
    classifier_on: str = "phi"     # phi | return | state-pair

    def named_params(self) -> dict[str, Tensor]:
        out = dict(self.core.named_params())
        for net in (self.hindsight, self.hs_value, self.classifier, self.critic,
                    self.fwd_critic):
            if net is not None:
                out.update(net.named_params())
        return out

    def param_groups(self) -> dict[str, list[Tensor]]:
        groups: dict[str, list[Tensor]] = {"fs": [], "v": [], "hs": [], "omega": []}
        for name, t in self.named_params().items():
            groups[name.split("/", 1)[0]].append(t)
        return groups

    def all_params(self) -> list[Tensor]:
        return list(self.named_params().values())


@dataclass
class EpisodeArrays:
    """Raw batched episode data; observations include the terminal one."""

    observations: np.ndarray   # (B, T+1, ...) payloads
    rewards: np.ndarray        # (B, T)
    actions: np.ndarray        # (B, T) int
    gamma: float
    extras: dict | None = None

    @property
    def batch(self) -> int:
        return self.rewards.shape[0]

    @property
    def length(self) -> int:
        return self.rewards.shape[1]

    def prev_rewards(self) -> np.ndarray:
        """(B, T+1): reward observed entering each step, 0 at t=0."""
        return np.concatenate([np.zeros((self.batch, 1)), self.rewards], axis=1)

    def episode_batch(self) -> EpisodeBatch:
        return EpisodeBatch(rewards=self.rewards, actions=self.actions,
                            gamma=self.gamma)


def _maybe_sg(t: Tensor, flow: bool) -> Tensor:
    return t if flow else ad.stop_gradient(t)


def unroll_core(nets: AgentNets, data: EpisodeArrays) -> tuple[list, list]:
    """Run the forward agent over every step including the terminal
    observation; returns (embeddings, policy outputs) per step."""
    b, t_dec = data.batch, data.length
    prev_r = data.prev_rewards()
    prev_a = np.concatenate([np.full((b, 1), -1, dtype=np.int64),
                             data.actions], axis=1)
    embeds = []
    outs = []
    state = nets.core.initial_state(b)
    for t in range(t_dec + 1):
        emb = nets.core.encode(data.observations[:, t])
        out = nets.core.step(emb, prev_r[:, t], state, prev_action=prev_a[:, t])
        state = out.state
        embeds.append(emb)
        outs.append(out)
    return embeds, outs


def build_annotation(nets: AgentNets, data: EpisodeArrays,
                     rng: np.random.Generator | None = None,
                     train: bool = False,
                     unrolled: tuple[list, list] | None = None,
                     ) -> tuple[EpisodeBatch, LiveAnnotation]:
    """Unroll the agent and hindsight networks over a batch of episodes."""
    b, t_dec = data.batch, data.length
    prev_r = data.prev_rewards()
    embeds, outs = unrolled if unrolled is not None else unroll_core(nets, data)

    dists = [outs[t].probs for t in range(t_dec)]
    log_dists = [outs[t].log_probs for t in range(t_dec)]
    fwd_values = [outs[t].value for t in range(t_dec)]

    annot = LiveAnnotation(dists=dists, log_dists=log_dists,
                           fwd_values=fwd_values)

    if nets.fwd_critic is not None:
        annot.fwd_critic = [nets.fwd_critic(outs[t].state[0])
                            for t in range(t_dec)]

    if nets.hindsight is not None:
        flow = nets.hindsight_grads_into_fs
        inputs = []
        for t in range(t_dec + 1):
            parts = [_maybe_sg(outs[t].state[0], flow),
                     _maybe_sg(embeds[t], flow)]
            if nets.hindsight_sees_reward:
                parts.insert(1, ad.constant(prev_r[:, t:t + 1]))
            if nets.hindsight_sees_actions:
                onehot = np.zeros((b, nets.core.cfg.n_actions))
                if t < t_dec:
                    onehot[np.arange(b), data.actions[:, t]] = 1.0
                parts.append(ad.constant(onehot))
            inputs.append(ad.concat(parts, axis=1))
        phis = nets.hindsight.forward(inputs, rng=rng, train=train)[:t_dec]
        annot.phi = phis

        h_for_hs = [_maybe_sg(outs[t].state[0], flow) for t in range(t_dec)]
        if nets.hs_value is not None:
            annot.hs_values = [nets.hs_value(fwd_values[t], h_for_hs[t], phis[t])
                               for t in range(t_dec)]
        if nets.critic is not None:
            annot.critic = [nets.critic(h_for_hs[t], phis[t])
                            for t in range(t_dec)]
        if nets.classifier is not None and nets.classifier_on == "phi":
            annot.hs_states = [outs[t].state[0].data for t in range(t_dec)]
            annot.log_h_train = [
                nets.classifier(ad.stop_gradient(outs[t].state[0]),
                                ad.stop_gradient(phis[t]),
                                policy_log_probs=log_dists[t]
                                if nets.classifier.policy_residual else None)
                for t in range(t_dec)]
            annot.log_h_frozen = [
                nets.classifier(h_for_hs[t], phis[t],
                                policy_log_probs=log_dists[t]
                                if nets.classifier.policy_residual else None,
                                frozen=True)
                for t in range(t_dec)]
            if nets.im_detach_policy:
                annot.im_dists = [ad.stop_gradient(d) for d in dists]
                annot.im_log_dists = [ad.stop_gradient(d) for d in log_dists]

    if nets.classifier is not None and nets.classifier_on == "return":
        # return-conditional classifier h(a | H_t, G_t); no hindsight net
        returns = data.episode_batch().returns()
        annot.log_h_train = [
            nets.classifier(ad.stop_gradient(outs[t].state[0]),
                            ad.constant(returns[:, t:t + 1]),
                            policy_log_probs=log_dists[t]
                            if nets.classifier.policy_residual else None)
            for t in range(t_dec)]

    if nets.classifier is not None and nets.classifier_on == "state-pair":
        # h(a | H_t, H_{t+k}) for every future step; keyed [t][k]
        pair_log_h: list[dict[int, Tensor]] = []
        for t in range(t_dec):
            per_k: dict[int, Tensor] = {}
            for k in range(1, t_dec - t):
                per_k[k] = nets.classifier(
                    ad.stop_gradient(outs[t].state[0]),
                    ad.stop_gradient(outs[t + k].state[0]),
                    policy_log_probs=log_dists[t]
                    if nets.classifier.policy_residual else None)
            pair_log_h.append(per_k)
        annot.log_h_train = pair_log_h  # type: ignore[assignment]

    return data.episode_batch(), annot

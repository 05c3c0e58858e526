"""Assemble the trainable networks an estimator needs for an environment."""

from __future__ import annotations

import numpy as np

from ..credit import AgentNets
from ..envs import Environment, MultiBandit
from ..nets import (
    AgentCore,
    AgentCoreConfig,
    ClassifierNet,
    HindsightConfig,
    HindsightCriticHead,
    HindsightNet,
    HindsightValueHead,
    Mlp,
)
from .config import ExperimentConfig

__all__ = ["build_agent"]


def build_agent(env: Environment, config: ExperimentConfig,
                rng: np.random.Generator) -> AgentNets:
    if isinstance(env, MultiBandit):
        raise NotImplementedError("multi-agent training is out of scope; "
                                  "the coupled bandit is exposed for analysis only")
    n = config.nets
    core = AgentCore(AgentCoreConfig(
        n_actions=env.action_count,
        obs_layout=env.obs_layout,
        obs_shape=tuple(env.obs_shape),
        encoder=n["encoder"],
        encoder_hidden=n["encoder_hidden"],
        embed_width=n["embed_width"],
        lstm_width=n["lstm_width"],
        policy_hidden=n["policy_hidden"],
        value_hidden=n["value_hidden"],
        feed_prev_action=n["feed_prev_action"],
    ), rng)

    kind = config.estimator
    h = config.hindsight
    c = config.classifier
    lstm_w = n["lstm_width"]
    nets = AgentNets(core=core,
                     hindsight_grads_into_fs=h["grads_into_fs"],
                     hindsight_sees_actions=h["sees_actions"],
                     hindsight_sees_reward=h["sees_reward"],
                     im_detach_policy=h["im_detach_policy"])

    needs_hindsight = kind in ("cca", "fc", "cca_all_action", "fc_all_action")
    if needs_hindsight:
        input_width = lstm_w + n["embed_width"] + \
            (1 if h["sees_reward"] else 0) + \
            (env.action_count if h["sees_actions"] else 0)
        nets.hindsight = HindsightNet(HindsightConfig(
            variant=h["variant"], input_width=input_width,
            phi_width=h["phi_width"], rnn_width=h["rnn_width"],
            backprop_window=h["backprop_window"], unroll=h["unroll"],
            attn_heads=h["attn_heads"], attn_key_width=h["attn_key_width"],
            attn_value_width=h["attn_value_width"],
            attn_mlp_width=h["attn_mlp_width"],
            attn_dropout=h["attn_dropout"]), rng)
        nets.classifier = ClassifierNet(rng, h_width=lstm_w,
                                        phi_width=h["phi_width"],
                                        n_actions=env.action_count,
                                        hidden=c["hidden"],
                                        policy_residual=c["policy_residual"])
        if kind in ("cca", "fc"):
            nets.hs_value = HindsightValueHead(rng, h_width=lstm_w,
                                               phi_width=h["phi_width"],
                                               hidden=n["value_hidden"])
        else:
            nets.critic = HindsightCriticHead(rng, h_width=lstm_w,
                                              phi_width=h["phi_width"],
                                              n_actions=env.action_count,
                                              hidden=n["value_hidden"])
    elif kind == "all_action":
        nets.fwd_critic = Mlp(rng, lstm_w, n["value_hidden"],
                              env.action_count, "v/fwd_critic")
    elif kind == "hca_return":
        nets.classifier = ClassifierNet(rng, h_width=lstm_w, phi_width=1,
                                        n_actions=env.action_count,
                                        hidden=c["hidden"],
                                        policy_residual=c["policy_residual"])
        nets.classifier_on = "return"
    elif kind == "hca_state":
        nets.classifier = ClassifierNet(rng, h_width=lstm_w, phi_width=lstm_w,
                                        n_actions=env.action_count,
                                        hidden=c["hidden"],
                                        policy_residual=c["policy_residual"])
        nets.classifier_on = "state-pair"
    return nets

"""Forward agent: observation encoder, recurrent state, policy and value heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .layers import Linear, LstmCell, Mlp

__all__ = ["AgentCoreConfig", "AgentCore", "PolicyOutput", "encode_observation", "agent_step"]


@dataclass
class AgentCoreConfig:
    n_actions: int
    obs_layout: str = "flat_vector"          # flat_vector | grid_onehot
    obs_shape: tuple = (8,)                  # flat width or (H, W, C)
    encoder: str = "linear"                  # linear | mlp | cnn
    encoder_hidden: tuple = (64,)            # mlp encoder hidden sizes
    cnn_channels: tuple = (16, 32)
    embed_width: int = 128
    lstm_width: int = 128
    policy_hidden: tuple = (64,)
    value_hidden: tuple = (128, 128, 128)
    feed_prev_action: bool = False


@dataclass
class PolicyOutput:
    logits: Tensor        # (B, A)
    log_probs: Tensor     # (B, A)
    probs: Tensor         # (B, A)
    value: Tensor         # (B, 1) forward baseline V(H_t)
    state: tuple          # (h, c) after the step; h is the agent state H_t


class AgentCore:
    """Encoder + forward LSTM + policy head + forward value head.

    Parameter groups: everything except the forward value head belongs to
    the representation/policy group ("fs"); the value head is its own
    group so baseline losses can be routed separately.
    """

    def __init__(self, cfg: AgentCoreConfig, rng: np.random.Generator):
        self.cfg = cfg
        if cfg.obs_layout == "grid_onehot":
            if cfg.encoder != "cnn":
                h, w, c = cfg.obs_shape
                flat = h * w * c
                self.encoder_mlp = (Linear(rng, flat, cfg.embed_width, "fs/enc")
                                    if cfg.encoder == "linear"
                                    else Mlp(rng, flat, cfg.encoder_hidden,
                                             cfg.embed_width, "fs/enc"))
                self.conv = None
            else:
                h, w, c = cfg.obs_shape
                c1, c2 = cfg.cnn_channels
                self.conv_k1 = ad.parameter(_glorot_conv(rng, 3, 3, c, c1), name="fs/conv1/k")
                self.conv_b1 = ad.parameter(np.zeros(c1), name="fs/conv1/b")
                self.conv_k2 = ad.parameter(_glorot_conv(rng, 3, 3, c1, c2), name="fs/conv2/k")
                self.conv_b2 = ad.parameter(np.zeros(c2), name="fs/conv2/b")
                self.post_conv = Linear(rng, h * w * c2, cfg.embed_width, "fs/enc")
                self.conv = True
                self.encoder_mlp = None
        else:
            (flat,) = cfg.obs_shape
            self.conv = None
            self.encoder_mlp = (Linear(rng, flat, cfg.embed_width, "fs/enc")
                                if cfg.encoder == "linear"
                                else Mlp(rng, flat, cfg.encoder_hidden,
                                         cfg.embed_width, "fs/enc"))
        lstm_in = cfg.embed_width + 1 + (cfg.n_actions if cfg.feed_prev_action else 0)
        self.lstm = LstmCell(rng, lstm_in, cfg.lstm_width, "fs/lstm")
        self.policy_head = Mlp(rng, cfg.lstm_width, cfg.policy_hidden,
                               cfg.n_actions, "fs/policy")
        self.value_head = Mlp(rng, cfg.lstm_width, cfg.value_hidden, 1, "v/forward")

    # -- parameter bookkeeping --------------------------------------------
    def named_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        if self.conv:
            for t in (self.conv_k1, self.conv_b1, self.conv_k2, self.conv_b2):
                out[t.name] = t
            out.update(self.post_conv.named_params())
        else:
            out.update(self.encoder_mlp.named_params())
        out.update(self.lstm.named_params())
        out.update(self.policy_head.named_params())
        out.update(self.value_head.named_params())
        return out

    def fs_params(self) -> list[Tensor]:
        return [t for n, t in self.named_params().items() if n.startswith("fs/")]

    def forward_value_params(self) -> list[Tensor]:
        return list(self.value_head.named_params().values())

    # -- forward passes ------------------------------------------------------
    def encode(self, obs_batch: np.ndarray) -> Tensor:
        """Observation batch to fixed-width embedding."""
        obs_batch = np.asarray(obs_batch, dtype=np.float64)
        if self.cfg.obs_layout == "grid_onehot":
            if obs_batch.ndim != 4 or obs_batch.shape[1:] != tuple(self.cfg.obs_shape):
                raise ValueError(
                    f"grid observation batch {obs_batch.shape} does not match "
                    f"configured {self.cfg.obs_shape}")
            if self.conv:
                x = ad.constant(obs_batch)
                x = ad.relu(ad.conv2d_same(x, self.conv_k1, self.conv_b1))
                x = ad.relu(ad.conv2d_same(x, self.conv_k2, self.conv_b2))
                flat = ad.reshape(x, (obs_batch.shape[0], int(np.prod(x.shape[1:]))))
                return self.post_conv(flat)
            flat = obs_batch.reshape(obs_batch.shape[0], -1)
            return self.encoder_mlp(ad.constant(flat))
        if obs_batch.ndim != 2 or obs_batch.shape[1] != self.cfg.obs_shape[0]:
            raise ValueError(
                f"flat observation batch {obs_batch.shape} does not match "
                f"configured width {self.cfg.obs_shape[0]}")
        return self.encoder_mlp(ad.constant(obs_batch))

    def initial_state(self, batch: int) -> tuple[Tensor, Tensor]:
        return self.lstm.initial_state(batch)

    def step(self, embedding: Tensor, prev_reward: np.ndarray,
             state: tuple[Tensor, Tensor],
             prev_action: np.ndarray | None = None) -> PolicyOutput:
        """One recurrent step: returns policy, forward value, and new state."""
        parts = [embedding, ad.constant(np.asarray(prev_reward, dtype=np.float64)
                                        .reshape(-1, 1))]
        if self.cfg.feed_prev_action:
            onehot = np.zeros((embedding.shape[0], self.cfg.n_actions))
            if prev_action is not None:
                live = np.asarray(prev_action) >= 0
                onehot[np.arange(len(onehot))[live],
                       np.asarray(prev_action)[live]] = 1.0
            parts.append(ad.constant(onehot))
        h, c = self.lstm.step(ad.concat(parts, axis=1), state)
        logits = self.policy_head(h)
        return PolicyOutput(
            logits=logits,
            log_probs=ad.log_softmax(logits, axis=1),
            probs=ad.softmax(logits, axis=1),
            value=self.value_head(h),
            state=(h, c),
        )


def _glorot_conv(rng: np.random.Generator, kh: int, kw: int,
                 cin: int, cout: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (kh * kw * cin + kh * kw * cout))
    return rng.uniform(-bound, bound, size=(kh, kw, cin, cout))


def encode_observation(core: AgentCore, obs_batch: np.ndarray) -> Tensor:
    return core.encode(obs_batch)


def agent_step(core: AgentCore, embedding: Tensor, prev_reward, state,
               prev_action=None) -> PolicyOutput:
    return core.step(embedding, prev_reward, state, prev_action)

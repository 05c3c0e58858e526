"""Hindsight networks: backward RNN and future-masked attention.

Both map a full-episode sequence of per-step inputs to one hindsight
feature per step. The backward RNN consumes the sequence in reverse time
order; attention lets step t attend over steps >= t only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .layers import Linear, LstmCell, Mlp, glorot

__all__ = ["HindsightConfig", "HindsightNet", "hindsight_forward",
           "HindsightValueHead", "HindsightCriticHead", "hindsight_value"]

_MASK_OFF = -1e9  # additive mask for disallowed (past) attention slots


@dataclass
class HindsightConfig:
    variant: str                     # backward_rnn | attention
    input_width: int
    phi_width: int = 128
    rnn_width: int = 128
    backprop_window: int | None = None   # truncate gradient flow through time
    unroll: int | None = None            # restart the backward state every k steps
    attn_heads: int = 2
    attn_key_width: int = 64
    attn_value_width: int = 64
    attn_mlp_width: int = 1024
    attn_dropout: float = 0.1
    attn_max_len: int = 256


class HindsightNet:
    def __init__(self, cfg: HindsightConfig, rng: np.random.Generator):
        self.cfg = cfg
        if cfg.variant == "backward_rnn":
            self.cell = LstmCell(rng, cfg.input_width, cfg.rnn_width, "hs/rnn")
            self.proj = Linear(rng, cfg.rnn_width, cfg.phi_width, "hs/proj")
        elif cfg.variant == "attention":
            d, heads = cfg.input_width, cfg.attn_heads
            self.wq = [ad.parameter(glorot(rng, d, cfg.attn_key_width),
                                    name=f"hs/attn/h{i}/wq") for i in range(heads)]
            self.wk = [ad.parameter(glorot(rng, d, cfg.attn_key_width),
                                    name=f"hs/attn/h{i}/wk") for i in range(heads)]
            self.wv = [ad.parameter(glorot(rng, d, cfg.attn_value_width),
                                    name=f"hs/attn/h{i}/wv") for i in range(heads)]
            self.rel = [ad.parameter(np.zeros((cfg.attn_max_len, 1)),
                                     name=f"hs/attn/h{i}/rel") for i in range(heads)]
            self.wo = Linear(rng, heads * cfg.attn_value_width, cfg.phi_width, "hs/attn/out")
            self.mlp = Mlp(rng, cfg.phi_width, (cfg.attn_mlp_width,),
                           cfg.phi_width, "hs/attn/mlp")
        else:
            raise ValueError(f"unknown hindsight variant {cfg.variant!r}")

    def named_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        if self.cfg.variant == "backward_rnn":
            out.update(self.cell.named_params())
            out.update(self.proj.named_params())
        else:
            for group in (self.wq, self.wk, self.wv, self.rel):
                for t in group:
                    out[t.name] = t
            out.update(self.wo.named_params())
            out.update(self.mlp.named_params())
        return out

    def params(self) -> list[Tensor]:
        return list(self.named_params().values())

    # -- forward -------------------------------------------------------------
    def forward(self, inputs: list[Tensor],
                rng: np.random.Generator | None = None,
                train: bool = False) -> list[Tensor]:
        """Per-step hindsight features for a full episode.

        ``inputs[t]`` has shape (B, input_width); returns one (B, phi_width)
        tensor per step.
        """
        if not inputs:
            raise ValueError("hindsight forward needs a non-empty sequence")
        if self.cfg.variant == "backward_rnn":
            return self._backward_rnn(inputs)
        return self._attention(inputs, rng, train)

    def _backward_rnn(self, inputs: list[Tensor]) -> list[Tensor]:
        n = len(inputs)
        unroll = self.cfg.unroll or n
        window = self.cfg.backprop_window
        phis: list[Tensor | None] = [None] * n
        batch = inputs[0].shape[0]
        state = self.cell.initial_state(batch)
        steps_in_state = 0
        for t in range(n - 1, -1, -1):
            if (t + 1) % unroll == 0:
                state = self.cell.initial_state(batch)
                steps_in_state = 0
            if window is not None and steps_in_state >= window:
                state = (ad.stop_gradient(state[0]), ad.stop_gradient(state[1]))
                steps_in_state = 0
            state = self.cell.step(inputs[t], state)
            steps_in_state += 1
            phis[t] = self.proj(state[0])
        return phis  # type: ignore[return-value]

    def _attention(self, inputs: list[Tensor],
                   rng: np.random.Generator | None, train: bool) -> list[Tensor]:
        cfg = self.cfg
        n = len(inputs)
        if n > cfg.attn_max_len:
            raise ValueError(f"sequence length {n} exceeds attn_max_len {cfg.attn_max_len}")
        batch = inputs[0].shape[0]
        mask = np.where(np.triu(np.ones((n, n))) > 0, 0.0, _MASK_OFF)
        offsets = np.clip(np.arange(n)[None, :] - np.arange(n)[:, None],
                          0, cfg.attn_max_len - 1)
        outs_per_b = []
        for b in range(batch):
            x = ad.concat([ad.reshape(ad.narrow(inp, 0, b, 1), (1, cfg.input_width))
                           for inp in inputs], axis=0)  # (n, d)
            heads = []
            for i in range(cfg.attn_heads):
                q = ad.matmul(x, self.wq[i])
                k = ad.matmul(x, self.wk[i])
                v = ad.matmul(x, self.wv[i])
                scores = ad.scale(ad.matmul(q, ad.transpose(k)),
                                  1.0 / np.sqrt(cfg.attn_key_width))
                rel_bias = ad.reshape(ad.take_rows(self.rel[i], offsets.reshape(-1)),
                                      (n, n))
                scores = ad.add(ad.add(scores, rel_bias), ad.constant(mask))
                attn = ad.softmax(scores, axis=1)
                if train and cfg.attn_dropout > 0.0:
                    if rng is None:
                        raise ValueError("attention dropout needs an explicit rng")
                    attn = ad.dropout(attn, cfg.attn_dropout, rng)
                heads.append(ad.matmul(attn, v))
            attended = self.wo(ad.concat(heads, axis=1))  # (n, phi)
            out = ad.add(attended, self.mlp(attended))
            outs_per_b.append(out)
        # regroup to per-step (B, phi) tensors
        return [ad.concat([ad.narrow(ob, 0, t, 1) for ob in outs_per_b], axis=0)
                for t in range(n)]


def hindsight_forward(net: HindsightNet, inputs: list[Tensor], **kw) -> list[Tensor]:
    return net.forward(inputs, **kw)


class HindsightValueHead:
    """Future-conditional baseline as forward value plus a learned residual.

    The forward value enters as a constant so this head (and the hindsight
    features feeding it) learn the residual between return and forward
    baseline.
    """

    def __init__(self, rng: np.random.Generator, h_width: int, phi_width: int,
                 hidden: tuple[int, ...] = (128, 128, 128),
                 detach_forward: bool = True):
        self.detach_forward = detach_forward
        self.mlp = Mlp(rng, h_width + phi_width, hidden, 1, "v/residual")

    def __call__(self, forward_value: Tensor, h: Tensor, phi: Tensor) -> Tensor:
        base = ad.stop_gradient(forward_value) if self.detach_forward else forward_value
        return ad.add(base, self.mlp(ad.concat([h, phi], axis=1)))

    def named_params(self) -> dict[str, Tensor]:
        return self.mlp.named_params()

    def params(self) -> list[Tensor]:
        return list(self.named_params().values())


class HindsightCriticHead:
    """Future-conditional critic Q(H, Phi, .) over all actions."""

    def __init__(self, rng: np.random.Generator, h_width: int, phi_width: int,
                 n_actions: int, hidden: tuple[int, ...] = (128, 128)):
        self.mlp = Mlp(rng, h_width + phi_width, hidden, n_actions, "v/critic")

    def __call__(self, h: Tensor, phi: Tensor) -> Tensor:
        return self.mlp(ad.concat([h, phi], axis=1))

    def named_params(self) -> dict[str, Tensor]:
        return self.mlp.named_params()

    def params(self) -> list[Tensor]:
        return list(self.named_params().values())


def hindsight_value(head: HindsightValueHead, forward_value: Tensor,
                    h: Tensor, phi: Tensor) -> Tensor:
    return head(forward_value, h, phi)

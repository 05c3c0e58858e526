"""Optimizers: sgd, rmsprop, adam over parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import GradientMap, Tensor

__all__ = ["OptimizerState", "optimizer_step", "MissingGradientError"]


class MissingGradientError(KeyError):
    """A parameter has no entry in the gradient map."""


@dataclass
class OptimizerState:
    """Per-parameter accumulators plus hyperparameters.

    rmsprop keeps epsilon inside the square root (nu update with 1-decay),
    adam uses the standard bias-corrected form.
    """

    algo: str = "sgd"
    lr: float = 1e-3
    decay: float = 0.99          # rmsprop second-moment decay
    epsilon: float = 1e-4
    momentum: float = 0.0
    beta1: float = 0.9           # adam
    beta2: float = 0.999
    step_count: int = 0
    slots: dict = field(default_factory=dict)

    def _slot(self, p: Tensor, name: str) -> np.ndarray:
        key = (id(p), name)
        if key not in self.slots:
            self.slots[key] = np.zeros_like(p.data)
        return self.slots[key]


def optimizer_step(params: list[Tensor], grads: GradientMap,
                   state: OptimizerState) -> tuple[list[Tensor], OptimizerState]:
    """Apply one update in place; returns the same params and state."""
    state.step_count += 1
    for p in params:
        if p not in grads:
            raise MissingGradientError(f"no gradient for parameter {p.name or id(p)}")
        g = grads[p].data
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape}")
        if state.algo == "sgd":
            p.data -= state.lr * g
        elif state.algo == "rmsprop":
            nu = state._slot(p, "nu")
            nu *= state.decay
            nu += (1.0 - state.decay) * g * g
            scaled = g / np.sqrt(nu + state.epsilon)
            if state.momentum > 0.0:
                buf = state._slot(p, "mom")
                buf *= state.momentum
                buf += scaled
                scaled = buf
            p.data -= state.lr * scaled
        elif state.algo == "adam":
            m = state._slot(p, "m")
            v = state._slot(p, "v")
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            mhat = m / (1.0 - state.beta1 ** state.step_count)
            vhat = v / (1.0 - state.beta2 ** state.step_count)
            p.data -= state.lr * mhat / (np.sqrt(vhat) + state.epsilon)
        else:
            raise ValueError(f"unknown optimizer {state.algo!r}")
    return params, state

"""Probabilistic hindsight classifier h(a | H_t, Phi_t)."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .layers import Mlp

__all__ = ["ClassifierNet", "classify_action"]


class ClassifierNet:
    """MLP from (H_t, Phi_t) to action logits, read out as log-probabilities.

    With policy_residual the policy's (frozen) log-probabilities are added
    to the logits so the classifier starts calibrated at h = pi.
    """

    def __init__(self, rng: np.random.Generator, h_width: int, phi_width: int,
                 n_actions: int, hidden: tuple[int, ...] = (256, 256, 256, 256),
                 policy_residual: bool = False):
        self.n_actions = n_actions
        self.policy_residual = policy_residual
        self.mlp = Mlp(rng, h_width + phi_width, hidden, n_actions, "omega/cls")

    def __call__(self, h: Tensor, phi: Tensor,
                 policy_log_probs: Tensor | None = None,
                 frozen: bool = False) -> Tensor:
        """Log-distribution over actions; ``frozen`` treats the classifier
        weights as constants (gradients still flow to the inputs)."""
        logits = self.mlp(ad.concat([h, phi], axis=1), frozen=frozen)
        if self.policy_residual:
            if policy_log_probs is None:
                raise ValueError("policy_residual classifier needs policy log-probs")
            logits = ad.add(logits, ad.stop_gradient(policy_log_probs))
        return ad.log_softmax(logits, axis=1)

    def named_params(self) -> dict[str, Tensor]:
        return self.mlp.named_params()

    def params(self) -> list[Tensor]:
        return list(self.named_params().values())


def classify_action(cls: ClassifierNet, h: Tensor, phi: Tensor, **kw) -> Tensor:
    return cls(h, phi, **kw)

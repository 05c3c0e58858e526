"""Lagrange-multiplier handling for the independence constraint."""

from __future__ import annotations

import numpy as np

from .losses import LossWeights

__all__ = ["geco_update", "constraint_target"]


def constraint_target(weights: LossWeights, observed_entropy: float) -> float:
    if weights.constraint == "entropy_scaled":
        return weights.beta_im * observed_entropy
    return weights.beta_im


def geco_update(weights: LossWeights, observed_im: float,
                observed_entropy: float) -> float:
    """One multiplier update; returns the new lambda (also written back).

    Default is the standard multiplicative ascent: the multiplier grows
    while the constraint is violated and shrinks once satisfied. The
    geco_literal flag keeps the additive rule with its published sign,
    which moves the multiplier the other way; it exists for comparison,
    not for enforcing the constraint.
    """
    if weights.mode != "geco":
        return weights.im
    violation = observed_im - constraint_target(weights, observed_entropy)
    if weights.geco_literal:
        new = weights.im - weights.geco_step * weights.im * violation
    else:
        new = weights.im * float(np.exp(weights.geco_step * violation))
    weights.im = float(np.clip(new, weights.lambda_min, weights.lambda_max))
    return weights.im

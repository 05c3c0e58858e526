"""Loss stack: hindsight baseline loss, classifier loss, independence
losses, entropy bonus, and their weighted composition.

All losses are sums over steps of batch means, built from per-step tensors
of shape (B, .); a single trajectory is the B=1 case. Gradient routing is
decided where tensors are built (see pipeline.py): classifier-loss inputs
are detached, independence losses see frozen classifier weights, PG
advantages are plain data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

__all__ = ["LossWeights", "LossBreakdown", "EpisodeBatch", "LiveAnnotation",
           "hindsight_baseline_loss", "classifier_loss", "im_loss_kl",
           "im_loss_mi", "policy_entropy"]


@dataclass
class LossWeights:
    pg: float = 1.0               # policy cost
    fwd: float = 5e-2             # forward baseline cost
    hs: float = 5e-2              # conditional (hindsight) baseline cost
    sup: float = 1e-2             # hindsight classifier cost
    im: float = 1.0               # action-independence cost (live value under GECO)
    entropy: float = 5e-3         # entropy bonus coefficient
    beta_im: float = 0.1          # constraint tolerance (scale for target)
    im_mode: str = "kl"           # kl | mi
    constraint: str = "entropy_scaled"  # target beta*H[A|H] | "constant" beta
    mode: str = "geco"            # geco | fixed_lambda
    geco_step: float = 1e-2
    geco_literal: bool = False    # use the additive rule with its literal sign
    lambda_min: float = 1e-6
    lambda_max: float = 1e6

    def __post_init__(self):
        for name in ("pg", "fwd", "hs", "sup", "im", "entropy", "beta_im"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")


@dataclass
class LossBreakdown:
    pg: float
    fwd: float
    hs: float
    sup: float
    im: float                 # sum over steps of per-step IM values
    entropy_mean: float       # mean over steps of H[A_t|H_t]
    entropy_sum: float
    lambda_im: float
    constraint_gap: float     # mean IM minus its target
    total: float
    im_per_step: np.ndarray = field(default_factory=lambda: np.zeros(0))
    diagnostics: dict = field(default_factory=dict)

    def recompose(self, w: LossWeights) -> float:
        """Weighted sum of the parts; must match ``total`` to 1e-12."""
        out = (w.pg * self.pg + w.fwd * self.fwd + w.hs * self.hs
               + w.sup * self.sup - w.entropy * self.entropy_sum)
        if len(self.im_per_step):
            target_sum = (w.beta_im * self.entropy_sum
                          if w.constraint == "entropy_scaled"
                          else w.beta_im * len(self.im_per_step))
            out += w.im * (self.im - target_sum)
        return out


@dataclass
class EpisodeBatch:
    """Raw outcomes of B same-length episodes."""

    rewards: np.ndarray        # (B, T)
    actions: np.ndarray        # (B, T) int
    gamma: float

    @property
    def batch(self) -> int:
        return self.rewards.shape[0]

    @property
    def length(self) -> int:
        return self.rewards.shape[1]

    def returns(self) -> np.ndarray:
        out = np.zeros_like(self.rewards)
        acc = np.zeros(self.batch)
        for t in range(self.length - 1, -1, -1):
            acc = self.rewards[:, t] + self.gamma * acc
            out[:, t] = acc
        return out


@dataclass
class LiveAnnotation:
    """Per-step graph tensors produced by the forward/hindsight pipeline."""

    dists: list            # (B, A) policy distributions
    log_dists: list        # (B, A)
    fwd_values: list       # (B, 1) forward baseline V(H_t)
    hs_values: list | None = None      # (B, 1) V(H_t, Phi_t)
    log_h_train: list | None = None    # (B, A): live classifier, detached inputs
    log_h_frozen: list | None = None   # (B, A): frozen classifier, live inputs
    critic: list | None = None         # (B, A) hindsight critic Q(H_t, Phi_t, .)
    fwd_critic: list | None = None     # (B, A) forward critic Q(H_t, .)
    phi: list | None = None            # (B, phi_width) hindsight features
    hs_states: list | None = None      # (B, lstm) detached H_t values
    im_dists: list | None = None       # policy tensors used by the IM term
    im_log_dists: list | None = None   # (detached when the constraint is
                                       # optimized with respect to Phi only)


def _batch_mean(t: Tensor) -> Tensor:
    return ad.tmean(t, axis=0)


def hindsight_baseline_loss(batch: EpisodeBatch, values: list) -> Tensor:
    """sum_t mean_B (G_t - V(H_t, Phi_t))^2."""
    returns = batch.returns()
    total = None
    for t, v in enumerate(values):
        err = ad.sub(ad.constant(returns[:, t:t + 1]), v)
        term = ad.tmean(ad.square(err))
        total = term if total is None else ad.add(total, term)
    return total


def classifier_loss(batch: EpisodeBatch, log_h: list) -> Tensor:
    """Negative log-likelihood of the taken actions under the classifier."""
    total = None
    for t, lh in enumerate(log_h):
        picked = ad.gather(lh, batch.actions[:, t:t + 1], axis=1)
        term = ad.scale(ad.tmean(picked), -1.0)
        total = term if total is None else ad.add(total, term)
    return total


def _kl_step(dist: Tensor, log_dist: Tensor, log_h: Tensor) -> Tensor:
    """sum_a pi(a|H)(log pi(a|H) - log h(a|H, Phi)), batch-meaned."""
    inner = ad.tsum(ad.mul(dist, ad.sub(log_dist, log_h)), axis=1, keepdims=True)
    return _batch_mean(ad.tsum(inner, axis=1, keepdims=True))


def _entropy_step(dist: Tensor, log_dist: Tensor) -> Tensor:
    inner = ad.tsum(ad.mul(dist, log_dist), axis=1, keepdims=True)
    return ad.scale(_batch_mean(inner), -1.0)


def _im_policy_tensors(annot: LiveAnnotation) -> tuple[list, list]:
    if annot.im_dists is not None:
        return annot.im_dists, annot.im_log_dists
    return annot.dists, annot.log_dists


def im_loss_kl(annot: LiveAnnotation) -> tuple[list, Tensor]:
    """Per-step KL(pi(.|H_t) || h(.|H_t, Phi_t)) and its mean."""
    dists, log_dists = _im_policy_tensors(annot)
    steps = [_kl_step(d, ld, lh) for d, ld, lh in
             zip(dists, log_dists, annot.log_h_frozen)]
    mean = ad.scale(_sum(steps), 1.0 / len(steps))
    return steps, mean


def im_loss_mi(annot: LiveAnnotation) -> tuple[list, Tensor]:
    """Per-step H[A_t|H_t] - H_h[A_t|H_t, Phi_t] (classifier entropy at the
    sampled Phi) and its mean."""
    dists, log_dists = _im_policy_tensors(annot)
    steps = []
    for d, ld, lh in zip(dists, log_dists, annot.log_h_frozen):
        pol_ent = _entropy_step(d, ld)
        h = ad.exp(lh)
        cls_ent = ad.scale(_batch_mean(ad.tsum(ad.mul(h, lh), axis=1,
                                               keepdims=True)), -1.0)
        steps.append(ad.sub(pol_ent, cls_ent))
    mean = ad.scale(_sum(steps), 1.0 / len(steps))
    return steps, mean


def policy_entropy(annot: LiveAnnotation) -> list:
    """Per-step batch-mean policy entropies H[A_t|H_t]."""
    return [_entropy_step(d, ld) for d, ld in zip(annot.dists, annot.log_dists)]


def _sum(tensors: list) -> Tensor:
    total = tensors[0]
    for t in tensors[1:]:
        total = ad.add(total, t)
    return total

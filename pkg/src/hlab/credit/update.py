"""Composite parameter update: PG surrogate plus the baseline, classifier,
independence, and entropy terms, with one backward pass over all groups."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import GradientMap, Tensor
from ..estimators import EstimatorConfig
from .geco import constraint_target
from .losses import (
    EpisodeBatch,
    LiveAnnotation,
    LossBreakdown,
    LossWeights,
    classifier_loss,
    hindsight_baseline_loss,
    im_loss_kl,
    im_loss_mi,
    policy_entropy,
)

__all__ = ["composite_update", "pg_surrogate_loss"]


def _values_data(values: list) -> np.ndarray:
    return np.concatenate([v.data.reshape(-1, 1) for v in values], axis=1)


def _gathered_log_probs(annot: LiveAnnotation, batch: EpisodeBatch) -> list:
    return [ad.gather(annot.log_dists[t], batch.actions[:, t:t + 1], axis=1)
            for t in range(batch.length)]


def _clip_ratio(pi_a: np.ndarray, h_a: np.ndarray,
                cfg: EstimatorConfig) -> tuple[np.ndarray, float]:
    h_a = np.maximum(h_a, cfg.h_floor)
    raw = pi_a / h_a
    clipped = float(np.mean(raw > cfg.max_ratio))
    return np.minimum(raw, cfg.max_ratio), clipped


def _advantages(batch: EpisodeBatch, annot: LiveAnnotation,
                cfg: EstimatorConfig) -> tuple[np.ndarray, dict]:
    """(B, T) advantage data for the score-function estimators."""
    returns = batch.returns()
    diag: dict = {}
    kind = cfg.kind
    if kind == "reinforce":
        adv = returns - _values_data(annot.fwd_values)
    elif kind == "cca":
        adv = returns - _values_data(annot.hs_values)
    elif kind == "fc":
        values = _values_data(annot.hs_values)
        adv = np.empty_like(returns)
        clip_rates = []
        for t in range(batch.length):
            pi = annot.dists[t].data
            h = np.exp(annot.log_h_frozen[t].data)
            rows = np.arange(batch.batch)
            ratio, clipped = _clip_ratio(pi[rows, batch.actions[:, t]],
                                         h[rows, batch.actions[:, t]], cfg)
            clip_rates.append(clipped)
            adv[:, t] = returns[:, t] - ratio * values[:, t]
        diag["clip_rate"] = float(np.mean(clip_rates))
    elif kind == "hca_return":
        adv = np.empty_like(returns)
        for t in range(batch.length):
            pi = annot.dists[t].data
            h = np.exp(annot.log_h_train[t].data)
            rows = np.arange(batch.batch)
            ratio, _ = _clip_ratio(pi[rows, batch.actions[:, t]],
                                   h[rows, batch.actions[:, t]], cfg)
            adv[:, t] = returns[:, t] * (1.0 - ratio)
    elif kind == "hca_state":
        adv = np.zeros_like(returns)
        rows = np.arange(batch.batch)
        for t in range(batch.length):
            pi_a = annot.dists[t].data[rows, batch.actions[:, t]]
            acc = batch.rewards[:, t].copy()
            for k in range(1, batch.length - t):
                h = np.exp(annot.log_h_train[t][k].data)
                ratio, _ = _clip_ratio(pi_a, h[rows, batch.actions[:, t]], cfg)
                acc += batch.gamma ** k * batch.rewards[:, t + k] * (1.0 - ratio)
            adv[:, t] = acc
    else:
        raise ValueError(f"estimator {kind!r} is not a score-function form")
    diag["mean_advantage"] = float(np.mean(adv))
    diag["adv_second_moment"] = float(np.mean(np.square(adv)))
    return adv, diag


def pg_surrogate_loss(batch: EpisodeBatch, annot: LiveAnnotation,
                      cfg: EstimatorConfig) -> tuple[Tensor, dict]:
    """Minimization-form PG loss; its negative gradient is the ascent
    direction of the matching estimator."""
    weights = (np.ones(batch.length) if cfg.drop_leading_discount
               else batch.gamma ** np.arange(batch.length))
    kind = cfg.kind
    if kind in ("all_action", "cca_all_action", "fc_all_action"):
        rows = []
        if kind == "all_action":
            source = annot.fwd_critic
        else:
            source = annot.critic
        total = None
        for t in range(batch.length):
            q = source[t].data
            if kind == "fc_all_action":
                q = q * np.exp(annot.log_h_frozen[t].data)
                score = annot.log_dists[t]
            else:
                score = annot.dists[t]
            term = ad.scale(ad.tmean(ad.tsum(ad.mul(score, ad.constant(q)),
                                             axis=1, keepdims=True)),
                            -weights[t])
            total = term if total is None else ad.add(total, term)
            rows.append(q)
        diag = {"mean_advantage": float(np.mean([r.mean() for r in rows])),
                "adv_second_moment": float(np.mean([np.mean(r ** 2) for r in rows]))}
        return total, diag

    adv, diag = _advantages(batch, annot, cfg)
    log_probs = _gathered_log_probs(annot, batch)
    total = None
    for t in range(batch.length):
        term = ad.scale(ad.tmean(ad.mul(log_probs[t],
                                        ad.constant(adv[:, t:t + 1]))),
                        -weights[t])
        total = term if total is None else ad.add(total, term)
    return total, diag


def composite_update(batch: EpisodeBatch, annot: LiveAnnotation,
                     weights: LossWeights, params: list[Tensor],
                     cfg: EstimatorConfig,
                     ) -> tuple[GradientMap, LossBreakdown]:
    """Assemble the weighted loss stack, run one backward pass, and report
    the per-part scalar breakdown."""
    returns = batch.returns()
    pg_loss, pg_diag = pg_surrogate_loss(batch, annot, cfg)

    fwd_loss = hindsight_baseline_loss(batch, annot.fwd_values)
    if annot.fwd_critic is not None:
        fwd_loss = ad.add(fwd_loss, _critic_regression(batch, annot.fwd_critic))

    hs_loss = None
    if annot.hs_values is not None:
        hs_loss = hindsight_baseline_loss(batch, annot.hs_values)
    if annot.critic is not None:
        crit = _critic_regression(batch, annot.critic)
        hs_loss = crit if hs_loss is None else ad.add(hs_loss, crit)

    sup_loss = None
    if annot.log_h_train is not None:
        if cfg.kind == "hca_state":
            sup_loss = _pairwise_classifier_loss(batch, annot.log_h_train)
        else:
            sup_loss = classifier_loss(batch, annot.log_h_train)

    entropies = policy_entropy(annot)
    entropy_sum = entropies[0]
    for e in entropies[1:]:
        entropy_sum = ad.add(entropy_sum, e)

    im_steps = None
    im_sum = None
    if annot.log_h_frozen is not None and weights.im > 0.0:
        im_fn = im_loss_kl if weights.im_mode == "kl" else im_loss_mi
        im_steps, _ = im_fn(annot)
        im_sum = im_steps[0]
        for s in im_steps[1:]:
            im_sum = ad.add(im_sum, s)

    total = ad.scale(pg_loss, weights.pg)
    total = ad.add(total, ad.scale(fwd_loss, weights.fwd))
    if hs_loss is not None:
        total = ad.add(total, ad.scale(hs_loss, weights.hs))
    if sup_loss is not None:
        total = ad.add(total, ad.scale(sup_loss, weights.sup))
    if im_sum is not None:
        if weights.constraint == "entropy_scaled":
            gap = ad.sub(im_sum, ad.scale(entropy_sum, weights.beta_im))
        else:
            gap = ad.sub(im_sum, ad.constant(
                np.array(weights.beta_im * batch.length).reshape(im_sum.shape)))
        total = ad.add(total, ad.scale(gap, weights.im))
    total = ad.sub(total, ad.scale(entropy_sum, weights.entropy))
    total_scalar = ad.tsum(total)

    grads = ad.backward(total_scalar, params)

    ent_sum_val = float(entropy_sum.data.reshape(()))
    im_per_step = (np.array([float(s.data.reshape(())) for s in im_steps])
                   if im_steps is not None else np.zeros(0))
    im_sum_val = float(im_per_step.sum()) if im_steps is not None else 0.0
    im_mean_val = float(im_per_step.mean()) if len(im_per_step) else 0.0
    breakdown = LossBreakdown(
        pg=float(pg_loss.data.reshape(())),
        fwd=float(fwd_loss.data.reshape(())),
        hs=float(hs_loss.data.reshape(())) if hs_loss is not None else 0.0,
        sup=float(sup_loss.data.reshape(())) if sup_loss is not None else 0.0,
        im=im_sum_val,
        entropy_mean=ent_sum_val / batch.length,
        entropy_sum=ent_sum_val,
        lambda_im=weights.im,
        constraint_gap=im_mean_val - constraint_target(
            weights, ent_sum_val / batch.length),
        total=float(total_scalar.data.reshape(())),
        im_per_step=im_per_step,
        diagnostics=pg_diag,
    )
    return grads, breakdown


def _critic_regression(batch: EpisodeBatch, critic: list) -> Tensor:
    returns = batch.returns()
    total = None
    for t in range(batch.length):
        picked = ad.gather(critic[t], batch.actions[:, t:t + 1], axis=1)
        err = ad.sub(ad.constant(returns[:, t:t + 1]), picked)
        term = ad.tmean(ad.square(err))
        total = term if total is None else ad.add(total, term)
    return total


def _pairwise_classifier_loss(batch: EpisodeBatch, pair_log_h: list) -> Tensor:
    total = None
    for t in range(batch.length):
        for _k, lh in pair_log_h[t].items():
            picked = ad.gather(lh, batch.actions[:, t:t + 1], axis=1)
            term = ad.scale(ad.tmean(picked), -1.0)
            total = term if total is None else ad.add(total, term)
    if total is None:
        total = ad.constant(np.zeros((1, 1)))
    return total

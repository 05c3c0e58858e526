"""The policy-gradient estimator family.

Every estimator returns the ascent direction for the expected discounted
return: the gradient of a surrogate whose advantage-like factors are
constants (data), so only the score terms carry gradient. Hindsight
quantities arrive through a HindsightAnnotation and may come from learned
networks or from exact enumeration tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff import GradientMap, Tensor
from .trajectory import HindsightAnnotation, Trajectory, discounted_returns

__all__ = [
    "EstimatorConfig",
    "GradEstimate",
    "DegenerateClassifierError",
    "reinforce_grad",
    "all_action_grad",
    "fc_single_action_grad",
    "fc_all_action_grad",
    "cca_single_action_grad",
    "cca_all_action_grad",
    "hca_grad",
    "estimate",
    "ESTIMATOR_KINDS",
]

ESTIMATOR_KINDS = ("reinforce", "all_action", "fc", "fc_all_action", "cca",
                   "cca_all_action", "hca_state", "hca_return")


class DegenerateClassifierError(RuntimeError):
    """Classifier probability of the taken action fell below the floor."""


@dataclass
class EstimatorConfig:
    kind: str = "reinforce"
    max_ratio: float = 100.0        # FC importance-ratio ceiling
    h_floor: float = 1e-6           # degenerate-classifier floor on h(A_t|.)
    force_ratio_one: bool = False   # bias-demonstration switch
    drop_leading_discount: bool = False


@dataclass
class GradEstimate:
    grads: GradientMap
    diagnostics: dict = field(default_factory=dict)


def _step_weights(traj: Trajectory, cfg: EstimatorConfig) -> np.ndarray:
    if cfg.drop_leading_discount:
        return np.ones(traj.length)
    return traj.gamma ** np.arange(traj.length)


def _advantage_diagnostics(adv: np.ndarray) -> dict:
    return {"mean_advantage": float(np.mean(adv)) if len(adv) else 0.0,
            "adv_second_moment": float(np.mean(np.square(adv))) if len(adv) else 0.0}


def _score_estimate(traj: Trajectory, advantages: np.ndarray,
                    params: list[Tensor], cfg: EstimatorConfig,
                    extra_diag: dict | None = None) -> GradEstimate:
    w = _step_weights(traj, cfg)
    terms = [ad.scale(ad.tsum(step.log_prob), w[t] * advantages[t])
             for t, step in enumerate(traj.steps)]
    total = terms[0]
    for term in terms[1:]:
        total = ad.add(total, term)
    diag = _advantage_diagnostics(advantages)
    if extra_diag:
        diag.update(extra_diag)
    return GradEstimate(ad.backward(total, params), diag)


def _all_action_estimate(traj: Trajectory, weight_rows: list[np.ndarray],
                         use_log_score: bool, params: list[Tensor],
                         cfg: EstimatorConfig) -> GradEstimate:
    """sum_t gamma^t sum_a <score term>_a * weight_rows[t][a].

    With use_log_score the score term is grad log pi(a|X_t) (FC critic
    form); otherwise it is grad pi(a|X_t) (all-action / CCA critic form).
    """
    w = _step_weights(traj, cfg)
    terms = []
    for t, step in enumerate(traj.steps):
        row = ad.constant(np.asarray(weight_rows[t], dtype=np.float64).reshape(1, -1))
        score = step.log_dist if use_log_score else step.dist
        terms.append(ad.scale(ad.tsum(ad.mul(score, row)), w[t]))
    total = terms[0]
    for term in terms[1:]:
        total = ad.add(total, term)
    flat = np.concatenate([np.ravel(r) for r in weight_rows])
    return GradEstimate(ad.backward(total, params), _advantage_diagnostics(flat))


def _ratio(pi_a: float, log_h_a: float, cfg: EstimatorConfig) -> tuple[float, bool]:
    h_a = float(np.exp(log_h_a))
    if h_a < cfg.h_floor:
        raise DegenerateClassifierError(
            f"classifier probability {h_a:.3e} below floor {cfg.h_floor:.1e}")
    if cfg.force_ratio_one:
        return 1.0, False
    raw = pi_a / h_a
    return min(raw, cfg.max_ratio), raw > cfg.max_ratio


# ---------------------------------------------------------------------------
# single-action estimators
# ---------------------------------------------------------------------------

def reinforce_grad(traj: Trajectory, baseline: np.ndarray,
                   params: list[Tensor],
                   cfg: EstimatorConfig | None = None) -> GradEstimate:
    """Score-function estimator with a forward baseline V(X_t)."""
    cfg = cfg or EstimatorConfig(kind="reinforce")
    baseline = np.asarray(baseline, dtype=np.float64)
    if baseline.shape != (traj.length,):
        raise ValueError(f"baseline shape {baseline.shape} != ({traj.length},)")
    adv = discounted_returns(traj) - baseline
    return _score_estimate(traj, adv, params, cfg)


def cca_single_action_grad(traj: Trajectory, annot: HindsightAnnotation,
                           params: list[Tensor],
                           cfg: EstimatorConfig | None = None) -> GradEstimate:
    """Hindsight baseline, no importance ratio: advantage G_t - V(X_t, Phi_t)."""
    cfg = cfg or EstimatorConfig(kind="cca")
    annot.check_length(traj.length)
    adv = discounted_returns(traj) - np.asarray(annot.values, dtype=np.float64)
    return _score_estimate(traj, adv, params, cfg)


def fc_single_action_grad(traj: Trajectory, annot: HindsightAnnotation,
                          params: list[Tensor],
                          cfg: EstimatorConfig | None = None) -> GradEstimate:
    """Hindsight baseline with the importance correction pi / h."""
    cfg = cfg or EstimatorConfig(kind="fc")
    annot.check_length(traj.length)
    if annot.log_h is None:
        raise ValueError("fc estimator needs classifier log-probabilities")
    returns = discounted_returns(traj)
    values = np.asarray(annot.values, dtype=np.float64)
    adv = np.zeros(traj.length)
    clips = 0
    ratios = []
    for t, step in enumerate(traj.steps):
        pi_a = float(step.dist.data[0, step.action])
        ratio, clipped = _ratio(pi_a, annot.log_h[t][step.action], cfg)
        clips += clipped
        ratios.append(ratio)
        adv[t] = returns[t] - ratio * values[t]
    extra = {"ratio_mean": float(np.mean(ratios)), "ratio_max": float(np.max(ratios)),
             "clip_rate": clips / traj.length}
    return _score_estimate(traj, adv, params, cfg, extra)


def hca_grad(traj: Trajectory, variant: str, annot: HindsightAnnotation,
             params: list[Tensor],
             cfg: EstimatorConfig | None = None) -> GradEstimate:
    """State/return hindsight credit assignment via the future-conditional
    reduction (Phi_t = G_t, or Phi_t = X_{t+k} per reward term).

    Both use the realized-reward form: the ratio-corrected term subtracts
    ratio * realized future reward, whose conditional mean is action
    independent whenever the classifier posterior has full support.
    """
    cfg = cfg or EstimatorConfig(kind=f"hca_{variant}")
    annot.check_length(traj.length)
    returns = discounted_returns(traj)
    rewards = traj.rewards
    gamma = traj.gamma
    adv = np.zeros(traj.length)
    ratios = []
    clips = 0
    if variant == "return":
        if annot.return_log_h is None:
            raise ValueError("return HCA needs log h(a | X_t, G_t)")
        for t, step in enumerate(traj.steps):
            pi_a = float(step.dist.data[0, step.action])
            ratio, clipped = _ratio(pi_a, annot.return_log_h[t][step.action], cfg)
            clips += clipped
            ratios.append(ratio)
            adv[t] = returns[t] * (1.0 - ratio)
    elif variant == "state":
        if annot.state_log_h is None:
            raise ValueError("state HCA needs log h(a | X_t, X_{t+k}) per lag")
        for t, step in enumerate(traj.steps):
            pi_a = float(step.dist.data[0, step.action])
            acc = rewards[t]
            for k in range(1, traj.length - t):
                ratio, clipped = _ratio(
                    pi_a, annot.state_log_h[t][k][step.action], cfg)
                clips += clipped
                ratios.append(ratio)
                acc += gamma ** k * rewards[t + k] * (1.0 - ratio)
            adv[t] = acc
    else:
        raise ValueError(f"unknown HCA variant {variant!r}")
    extra = {"ratio_mean": float(np.mean(ratios)) if ratios else 1.0,
             "ratio_max": float(np.max(ratios)) if ratios else 1.0,
             "clip_rate": clips / max(len(ratios), 1)}
    return _score_estimate(traj, adv, params, cfg, extra)


# ---------------------------------------------------------------------------
# all-action estimators
# ---------------------------------------------------------------------------

def all_action_grad(traj: Trajectory, critic: list, params: list[Tensor],
                    cfg: EstimatorConfig | None = None) -> GradEstimate:
    """sum_t gamma^t sum_a grad pi(a|X_t) Q(X_t, a)."""
    cfg = cfg or EstimatorConfig(kind="all_action")
    if len(critic) != traj.length:
        raise ValueError("critic rows must align with trajectory steps")
    return _all_action_estimate(traj, list(critic), use_log_score=False,
                                params=params, cfg=cfg)


def cca_all_action_grad(traj: Trajectory, annot: HindsightAnnotation,
                        params: list[Tensor],
                        cfg: EstimatorConfig | None = None) -> GradEstimate:
    """sum_t gamma^t sum_a grad pi(a|X_t) Q(X_t, Phi_t, a)."""
    cfg = cfg or EstimatorConfig(kind="cca_all_action")
    annot.check_length(traj.length)
    if annot.critic is None:
        raise ValueError("cca all-action needs a hindsight critic")
    return _all_action_estimate(traj, list(annot.critic), use_log_score=False,
                                params=params, cfg=cfg)


def fc_all_action_grad(traj: Trajectory, annot: HindsightAnnotation,
                       params: list[Tensor],
                       cfg: EstimatorConfig | None = None) -> GradEstimate:
    """sum_t gamma^t sum_a grad log pi(a|X_t) h(a|X_t, Phi_t) Q(X_t, Phi_t, a)."""
    cfg = cfg or EstimatorConfig(kind="fc_all_action")
    annot.check_length(traj.length)
    if annot.critic is None or annot.log_h is None:
        raise ValueError("fc all-action needs a hindsight critic and classifier")
    rows = [np.exp(np.asarray(annot.log_h[t])) * np.asarray(annot.critic[t])
            for t in range(traj.length)]
    return _all_action_estimate(traj, rows, use_log_score=True,
                                params=params, cfg=cfg)


def hca_return_all_action_grad(traj: Trajectory, annot: HindsightAnnotation,
                               params: list[Tensor],
                               cfg: EstimatorConfig | None = None) -> GradEstimate:
    """All-action return HCA: Phi_t = G_t, so Q(X_t, Phi_t, a) = G_t.

    Product form (h times G), so it stays valid when the return
    deterministically reveals the action and the single-action ratio
    form loses its support condition.
    """
    cfg = cfg or EstimatorConfig(kind="hca_return")
    annot.check_length(traj.length)
    if annot.return_log_h is None:
        raise ValueError("return HCA needs log h(a | X_t, G_t)")
    returns = discounted_returns(traj)
    rows = [np.exp(np.asarray(annot.return_log_h[t])) * returns[t]
            for t in range(traj.length)]
    return _all_action_estimate(traj, rows, use_log_score=True,
                                params=params, cfg=cfg)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def estimate(traj: Trajectory, annot: HindsightAnnotation | None,
             params: list[Tensor], cfg: EstimatorConfig,
             baseline: np.ndarray | None = None,
             critic: list | None = None) -> GradEstimate:
    kind = cfg.kind
    if kind == "reinforce":
        if baseline is None:
            baseline = np.zeros(traj.length)
        return reinforce_grad(traj, baseline, params, cfg)
    if kind == "all_action":
        return all_action_grad(traj, critic, params, cfg)
    if kind == "fc":
        return fc_single_action_grad(traj, annot, params, cfg)
    if kind == "fc_all_action":
        return fc_all_action_grad(traj, annot, params, cfg)
    if kind == "cca":
        return cca_single_action_grad(traj, annot, params, cfg)
    if kind == "cca_all_action":
        return cca_all_action_grad(traj, annot, params, cfg)
    if kind == "hca_state":
        return hca_grad(traj, "state", annot, params, cfg)
    if kind == "hca_return":
        return hca_grad(traj, "return", annot, params, cfg)
    raise ValueError(f"unknown estimator {kind!r}")

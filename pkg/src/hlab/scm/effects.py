"""Treatment-effect quantities on binary-treatment SCMs.

Sign conventions:
  - ite / ate are oriented treatment-minus-control, so averaging the
    counterfactually estimated ITE over evidence recovers the ATE;
  - cf_ite is likewise oriented per treatment arm (observed minus
    counterfactual under T=1, counterfactual minus observed under T=0);
  - counterfactual_advantage is the action-relative view (observed outcome
    minus posterior-mean counterfactual outcome in both arms): this is the
    quantity whose per-evidence-cell values and variance populate the
    worked-example tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Scm, ZeroProbabilityEvidence

__all__ = ["ite", "ate", "cf_ite", "counterfactual_advantage",
           "cf_ite_variance", "effect_table", "EffectCell"]


def _arms(scm: Scm) -> tuple:
    if scm.treatment is None or scm.outcome is None:
        raise ValueError("scm carries no treatment/outcome metadata")
    return scm.treatment, scm.outcome, scm.treatment_values


def _outcome_value(outcome) -> float:
    return float(outcome)


def ite(scm: Scm, exo_world: dict) -> float:
    """O(s, do(T=treated)) - O(s, do(T=control)) for one exogenous world."""
    t_var, o_var, (treated, control) = _arms(scm)
    o1 = scm.evaluate(exo_world, {t_var: treated})[o_var]
    o0 = scm.evaluate(exo_world, {t_var: control})[o_var]
    return _outcome_value(o1) - _outcome_value(o0)


def ate(scm: Scm, conditioning: dict | None = None) -> float:
    """E[O | h, do(T=treated)] - E[O | h, do(T=control)], exact."""
    t_var, o_var, (treated, control) = _arms(scm)
    worlds = (scm.posterior_worlds(conditioning) if conditioning
              else scm.exo_worlds())
    total = 0.0
    for world, prob in worlds:
        total += prob * ite(scm, world)
    return total


def _posterior_counterfactual_mean(scm: Scm, evidence: dict,
                                   counter_value) -> float:
    t_var, o_var, _ = _arms(scm)
    total = 0.0
    for world, prob in scm.posterior_worlds(evidence):
        total += prob * _outcome_value(
            scm.evaluate(world, {t_var: counter_value})[o_var])
    return total


def counterfactual_advantage(scm: Scm, evidence: dict) -> float:
    """Observed outcome minus the posterior-mean counterfactual outcome of
    switching the treatment; same orientation in both arms."""
    t_var, o_var, (treated, control) = _arms(scm)
    if t_var not in evidence or o_var not in evidence:
        raise ValueError("evidence must include treatment and outcome")
    counter = control if evidence[t_var] == treated else treated
    cf_v = _posterior_counterfactual_mean(scm, evidence, counter)
    return _outcome_value(evidence[o_var]) - cf_v


def cf_ite(scm: Scm, evidence: dict) -> float:
    """Counterfactually estimated ITE, oriented treatment-minus-control:
    its evidence average equals the ATE."""
    t_var, _, (treated, _) = _arms(scm)
    adv = counterfactual_advantage(scm, evidence)
    return adv if evidence[t_var] == treated else -adv


@dataclass
class EffectCell:
    evidence: dict
    prob: float
    posterior: dict          # exogenous-state name/value tuple -> prob
    cf_outcome_mean: float   # CF-V
    advantage: float         # table CF-ITE column (observed minus CF-V)
    cf_ite: float            # oriented value


def effect_table(scm: Scm, extra_evidence_vars: tuple = ()) -> list[EffectCell]:
    """Per-evidence-cell quantities over (treatment, outcome [, extras])."""
    t_var, o_var, (treated, control) = _arms(scm)
    ev_vars = (t_var, o_var, *extra_evidence_vars)
    cells: dict = {}
    for assignment, prob in scm.enumerate():
        key = tuple(assignment[v] for v in ev_vars)
        cells[key] = cells.get(key, 0.0) + prob
    out = []
    for key, prob in sorted(cells.items(), key=lambda kv: repr(kv[0])):
        if prob == 0.0:
            continue
        evidence = dict(zip(ev_vars, key))
        counter = control if evidence[t_var] == treated else treated
        posterior: dict = {}
        for world, p in scm.posterior_worlds(evidence):
            posterior[tuple(sorted(world.items()))] = p
        cf_v = _posterior_counterfactual_mean(scm, evidence, counter)
        adv = _outcome_value(evidence[o_var]) - cf_v
        out.append(EffectCell(
            evidence=evidence, prob=prob, posterior=posterior,
            cf_outcome_mean=cf_v, advantage=adv,
            cf_ite=adv if evidence[t_var] == treated else -adv))
    return out


def cf_ite_variance(scm: Scm, extra_evidence_vars: tuple = ()) -> float:
    """Variance of the per-cell counterfactual advantage under the prior
    probabilities of the evidence cells."""
    cells = effect_table(scm, extra_evidence_vars)
    probs = np.array([c.prob for c in cells])
    vals = np.array([c.advantage for c in cells])
    mean = float(np.sum(probs * vals))
    return float(np.sum(probs * (vals - mean) ** 2))

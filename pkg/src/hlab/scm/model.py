"""Discrete structural causal models, exact by exhaustive enumeration.

All randomness lives in mutually independent exogenous variables with
finite support; every model variable is a deterministic function of its
parents and designated exogenous inputs. Counterfactuals follow the
abduction / intervention / prediction recipe with exact posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = ["ExoVar", "ScmVariable", "Scm", "CounterfactualQuery",
           "ZeroProbabilityEvidence", "scm_enumerate", "counterfactual"]


class ZeroProbabilityEvidence(ValueError):
    """The supplied evidence has probability zero under the model."""


@dataclass(frozen=True)
class ExoVar:
    name: str
    values: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs):
            raise ValueError(f"{self.name}: values/probs length mismatch")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: probs must sum to 1")
        if any(p < 0 for p in self.probs):
            raise ValueError(f"{self.name}: negative probability")


@dataclass(frozen=True)
class ScmVariable:
    name: str
    parents: tuple
    exo: tuple
    fn: Callable[..., Any]   # fn(**parents, **exo) -> value

    def evaluate(self, assignment: dict) -> Any:
        kwargs = {p: assignment[p] for p in self.parents}
        kwargs.update({e: assignment[e] for e in self.exo})
        return self.fn(**kwargs)


@dataclass
class Scm:
    exogenous: list
    variables: list
    # optional effect metadata so treatment queries need no extra arguments
    treatment: str | None = None
    outcome: str | None = None
    treatment_values: tuple = (1, 0)
    name: str = ""

    def __post_init__(self):
        known = {e.name for e in self.exogenous}
        if len(known) != len(self.exogenous):
            raise ValueError("duplicate exogenous names")
        seen = set(known)
        for var in self.variables:
            for p in var.parents:
                if p not in seen:
                    raise ValueError(
                        f"{var.name}: parent {p} not defined before it (need a DAG order)")
            for e in var.exo:
                if e not in known:
                    raise ValueError(f"{var.name}: unknown exogenous {e}")
            if var.name in seen:
                raise ValueError(f"duplicate variable {var.name}")
            seen.add(var.name)

    def var(self, name: str) -> ScmVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    # -- sampling-order evaluation ----------------------------------------
    def evaluate(self, exo_assignment: dict,
                 interventions: dict | None = None) -> dict:
        """Compute all variables for one exogenous world, honoring do()."""
        assignment = dict(exo_assignment)
        interventions = interventions or {}
        for var in self.variables:
            if var.name in interventions:
                assignment[var.name] = interventions[var.name]
            else:
                assignment[var.name] = var.evaluate(assignment)
        return assignment

    def exo_worlds(self) -> list[tuple[dict, float]]:
        worlds = [({}, 1.0)]
        for exo in self.exogenous:
            nxt = []
            for partial, prob in worlds:
                for value, p in zip(exo.values, exo.probs):
                    if p == 0.0:
                        continue
                    w = dict(partial)
                    w[exo.name] = value
                    nxt.append((w, prob * p))
            worlds = nxt
        return worlds

    def enumerate(self, interventions: dict | None = None) -> list[tuple[dict, float]]:
        """Exhaustive joint distribution (assignments include exogenous)."""
        return [(self.evaluate(world, interventions), prob)
                for world, prob in self.exo_worlds()]

    def posterior_worlds(self, evidence: dict) -> list[tuple[dict, float]]:
        """Abduction: exogenous worlds consistent with endogenous evidence."""
        matching = []
        total = 0.0
        for world, prob in self.exo_worlds():
            full = self.evaluate(world)
            if all(full[k] == v for k, v in evidence.items()):
                matching.append((world, prob))
                total += prob
        if total <= 0.0:
            raise ZeroProbabilityEvidence(f"evidence {evidence} has probability 0")
        return [(w, p / total) for w, p in matching]


@dataclass
class CounterfactualQuery:
    evidence: dict          # observed endogenous assignments
    intervention: dict      # variable -> forced value
    target: str


def scm_enumerate(scm: Scm) -> list[tuple[dict, float]]:
    return scm.enumerate()


def counterfactual(scm: Scm, query: CounterfactualQuery) -> dict:
    """Distribution of the target under the three-step procedure:
    infer the exogenous worlds from the evidence, force the intervention,
    re-evaluate with the worlds held fixed."""
    out: dict = {}
    for world, prob in scm.posterior_worlds(query.evidence):
        value = scm.evaluate(world, query.intervention)[query.target]
        out[value] = out.get(value, 0.0) + prob
    return out

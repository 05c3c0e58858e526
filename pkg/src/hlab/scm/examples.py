"""Worked-example SCMs: the fair-coin guessing game and the three-genotype
treatment model, each in two structurally different but observationally
equivalent versions."""

from __future__ import annotations

from .model import ExoVar, Scm, ScmVariable

__all__ = ["coin_scm", "medical_scm"]


def coin_scm(version: str) -> Scm:
    """Guess the outcome of a fair coin; win pays 1.

    Version I scores the guess against the coin (the counterfactual guess
    flips the outcome); version II ignores the guess entirely (outcome is
    whether the coin landed heads). Both share every observable
    distribution.
    """
    if version not in ("I", "II"):
        raise ValueError("coin model version must be 'I' or 'II'")
    exos = [ExoVar("coin", ("h", "t"), (0.5, 0.5)),
            ExoVar("pick", ("h", "t"), (0.5, 0.5))]
    guess = ScmVariable("guess", parents=(), exo=("pick",),
                        fn=lambda pick: pick)
    if version == "I":
        outcome = ScmVariable("win", parents=("guess",), exo=("coin",),
                              fn=lambda guess, coin: int(guess == coin))
    else:
        outcome = ScmVariable("win", parents=("guess",), exo=("coin",),
                              fn=lambda guess, coin: int(coin == "h"))
    return Scm(exogenous=exos, variables=[guess, outcome],
               treatment="guess", outcome="win", treatment_values=("h", "t"),
               name=f"coin-{version}")


def medical_scm(version: str) -> Scm:
    """Three equally likely genotypes, binary drug decision, binary cure.

    Version I: type A always recovers, type C never, type B only with the
    drug. Version II: A and B recover exactly with the drug, C exactly
    without. Both give the drug a 2/3 cure rate versus 1/3 untreated.
    """
    if version not in ("I", "II"):
        raise ValueError("medical model version must be 'I' or 'II'")
    exos = [ExoVar("gene", ("A", "B", "C"), (1 / 3, 1 / 3, 1 / 3)),
            ExoVar("coin", (1, 0), (0.5, 0.5))]
    treat = ScmVariable("drug", parents=(), exo=("coin",),
                        fn=lambda coin: coin)
    if version == "I":
        table = {("A", 1): 1, ("B", 1): 1, ("C", 1): 0,
                 ("A", 0): 1, ("B", 0): 0, ("C", 0): 0}
    else:
        table = {("A", 1): 1, ("B", 1): 1, ("C", 1): 0,
                 ("A", 0): 0, ("B", 0): 0, ("C", 0): 1}
    cured = ScmVariable("cured", parents=("drug",), exo=("gene",),
                        fn=lambda drug, gene: table[(gene, drug)])
    return Scm(exogenous=exos, variables=[treat, cured],
               treatment="drug", outcome="cured", treatment_values=(1, 0),
               name=f"medical-{version}")

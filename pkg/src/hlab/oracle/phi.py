"""Hindsight labeling functions for enumerated trajectories.

Each map assigns one hashable label per decision step; the theorems'
conditions are toggled by the choice of map (noise labels are
conditionally independent of actions, action labels are maximally
dependent, future-state labels sit in between).
"""

from __future__ import annotations

from .exact import RETURN_KEY_DECIMALS, EnumTraj

__all__ = ["phi_constant", "phi_noise", "phi_action", "make_phi_return",
           "phi_future_state", "phi_future_states_and_noise", "phi_everything"]


def phi_constant(tr: EnumTraj) -> list:
    return [0] * len(tr.actions)


def phi_noise(tr: EnumTraj) -> list:
    """The per-episode exogenous reward noise; independent of all actions."""
    return [tr.eps] * len(tr.actions)


def phi_action(tr: EnumTraj) -> list:
    """Maximal dependence: the taken action itself."""
    return list(tr.actions)


def make_phi_return(gamma: float):
    def _phi(tr: EnumTraj) -> list:
        rets = tr.returns(gamma)
        return [round(float(g), RETURN_KEY_DECIMALS) for g in rets]
    return _phi


def phi_future_state(k: int):
    """X_{t+k}, with a sentinel when the horizon is exceeded."""
    def _phi(tr: EnumTraj) -> list:
        labels = []
        for t in range(len(tr.actions)):
            labels.append(tr.states[t + k] if t + k < len(tr.states) else "end")
        return labels
    return _phi


def phi_future_states_and_noise(tr: EnumTraj) -> list:
    """Everything from t+1 on (states, actions after t, noise) except A_t:
    conditioning on it plus the action pins the return exactly."""
    labels = []
    for t in range(len(tr.actions)):
        labels.append((tr.states[t + 1:], tr.actions[t + 1:], tr.eps))
    return labels


def phi_everything(tr: EnumTraj) -> list:
    """Full future including A_t: the hindsight value equals the return."""
    labels = []
    for t in range(len(tr.actions)):
        labels.append((tr.states[t:], tr.actions[t:], tr.eps))
    return labels

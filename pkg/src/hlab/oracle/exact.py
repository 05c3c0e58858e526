"""Exact enumeration over small MDPs: trajectory distributions, exact
gradients, conditional value tables and hindsight posteriors.

Everything here is ground truth for the estimator tests: expectations are
computed by summing over every (noise, action, transition) branch, never
by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..estimators import (
    EstimatorConfig,
    HindsightAnnotation,
    StepRecord,
    Trajectory,
    estimate,
)
from .mdp import TabularMdp, TabularPolicy

__all__ = ["EnumTraj", "enumerate_trajectories", "to_trajectory",
           "expected_return", "exact_gradient", "ExactTables", "exact_values",
           "state_posteriors", "return_posteriors", "advantage_second_moments",
           "ExpectationReport", "estimator_expectation", "sample_episodes",
           "EnumerationLimitError", "RETURN_KEY_DECIMALS"]

RETURN_KEY_DECIMALS = 10  # float returns become hashable labels at this rounding


class EnumerationLimitError(RuntimeError):
    """The trajectory space exceeds the exactness cap."""


@dataclass
class EnumTraj:
    states: tuple[int, ...]     # length T+1
    actions: tuple[int, ...]    # length T
    eps: float                  # per-episode exogenous reward noise
    prob: float
    rewards: tuple[float, ...]  # length T

    def returns(self, gamma: float) -> np.ndarray:
        out = np.zeros(len(self.rewards))
        acc = 0.0
        for t in range(len(self.rewards) - 1, -1, -1):
            acc = self.rewards[t] + gamma * acc
            out[t] = acc
        return out


def enumerate_trajectories(mdp: TabularMdp, policy: TabularPolicy,
                           cap: int = 2_000_000) -> list[EnumTraj]:
    """Exhaustive trajectory distribution; probabilities sum to 1."""
    bound = len(mdp.noise_cells()) * (mdp.n_actions * mdp.n_states) ** mdp.horizon
    if bound > cap:
        raise EnumerationLimitError(
            f"trajectory bound {bound} exceeds the exactness cap {cap}")
    pi = policy.probs()
    out: list[EnumTraj] = []

    def recurse(t, x, prob, states, actions, rewards, eps):
        if t == mdp.horizon:
            out.append(EnumTraj(tuple(states), tuple(actions), eps, prob,
                                tuple(rewards)))
            return
        for a in range(mdp.n_actions):
            pa = pi[t, x, a]
            if pa == 0.0:
                continue
            r = mdp.reward(x, a, eps)
            for y in range(mdp.n_states):
                pxy = mdp.transitions[x, a, y]
                if pxy == 0.0:
                    continue
                recurse(t + 1, y, prob * pa * pxy,
                        states + [y], actions + [a], rewards + [r], eps)

    for eps, peps in mdp.noise_cells():
        recurse(0, mdp.initial_state, peps, [mdp.initial_state], [], [], eps)
    return out


def to_trajectory(tr: EnumTraj, policy: TabularPolicy, gamma: float) -> Trajectory:
    """Adapt an enumerated trajectory for the estimator interfaces; the
    policy tensors come from the shared differentiable logits."""
    steps = []
    for t, (x, a, r) in enumerate(zip(tr.states, tr.actions, tr.rewards)):
        dist, log_dist = policy.dist_tensors(t, x)
        from .. import autodiff as ad
        steps.append(StepRecord(observation=x, agent_state=x, action=a,
                                reward=r,
                                log_prob=ad.narrow(log_dist, 1, a, 1),
                                dist=dist, log_dist=log_dist))
    return Trajectory(steps=steps, gamma=gamma,
                      terminal_observation=tr.states[-1])


def expected_return(mdp: TabularMdp, policy: TabularPolicy, gamma: float) -> float:
    total = 0.0
    for tr in enumerate_trajectories(mdp, policy):
        g0 = sum(gamma ** t * r for t, r in enumerate(tr.rewards))
        total += tr.prob * g0
    return total


def exact_gradient(mdp: TabularMdp, policy: TabularPolicy,
                   gamma: float) -> np.ndarray:
    """d E[G] / d logits, shape (horizon, S, A), via the analytic softmax
    score accumulated over the enumerated trajectory distribution."""
    pi = policy.probs()
    grad = np.zeros_like(pi)
    for tr in enumerate_trajectories(mdp, policy):
        g0 = sum(gamma ** t * r for t, r in enumerate(tr.rewards))
        for t, (x, a) in enumerate(zip(tr.states, tr.actions)):
            score = -pi[t, x]
            score[a] += 1.0
            grad[t, x] += tr.prob * g0 * score
    return grad


# ---------------------------------------------------------------------------
# conditional tables
# ---------------------------------------------------------------------------

@dataclass
class ExactTables:
    v: dict                 # (t, x) -> V
    q: dict                 # (t, x, a) -> Q
    v_phi: dict             # (t, x, phi) -> V
    q_phi: dict             # (t, x, phi, a) -> Q
    posterior: dict         # (t, x, phi) -> (A,) action posterior
    cell_prob: dict         # (t, x, phi) -> probability mass
    n_actions: int

    def log_posterior(self, key) -> np.ndarray:
        p = self.posterior[key]
        with np.errstate(divide="ignore"):
            return np.where(p > 0.0, np.log(np.maximum(p, 1e-300)), -np.inf)


def exact_values(mdp: TabularMdp, policy: TabularPolicy, gamma: float,
                 phi_map: Callable[[EnumTraj], list]) -> ExactTables:
    """Conditional expectations from the enumerated joint distribution.

    phi_map labels every step of a trajectory with a hashable value; empty
    conditioning cells simply do not appear in the tables.
    """
    wx: dict = {}
    gx: dict = {}
    wxa: dict = {}
    gxa: dict = {}
    wxp: dict = {}
    gxp: dict = {}
    wxpa: dict = {}
    gxpa: dict = {}
    for tr in enumerate_trajectories(mdp, policy):
        labels = phi_map(tr)
        if len(labels) != len(tr.actions):
            raise ValueError("phi_map must label every decision step")
        rets = tr.returns(gamma)
        for t, (x, a, phi) in enumerate(zip(tr.states, tr.actions, labels)):
            g = rets[t]
            w = tr.prob
            wx[(t, x)] = wx.get((t, x), 0.0) + w
            gx[(t, x)] = gx.get((t, x), 0.0) + w * g
            wxa[(t, x, a)] = wxa.get((t, x, a), 0.0) + w
            gxa[(t, x, a)] = gxa.get((t, x, a), 0.0) + w * g
            wxp[(t, x, phi)] = wxp.get((t, x, phi), 0.0) + w
            gxp[(t, x, phi)] = gxp.get((t, x, phi), 0.0) + w * g
            wxpa[(t, x, phi, a)] = wxpa.get((t, x, phi, a), 0.0) + w
            gxpa[(t, x, phi, a)] = gxpa.get((t, x, phi, a), 0.0) + w * g
    posterior = {}
    for (t, x, phi), w in wxp.items():
        p = np.zeros(mdp.n_actions)
        for a in range(mdp.n_actions):
            p[a] = wxpa.get((t, x, phi, a), 0.0) / w
        posterior[(t, x, phi)] = p
    return ExactTables(
        v={k: gx[k] / wx[k] for k in wx},
        q={k: gxa[k] / wxa[k] for k in wxa},
        v_phi={k: gxp[k] / wxp[k] for k in wxp},
        q_phi={k: gxpa[k] / wxpa[k] for k in wxpa},
        posterior=posterior,
        cell_prob=dict(wxp),
        n_actions=mdp.n_actions,
    )


def state_posteriors(mdp: TabularMdp, policy: TabularPolicy) -> dict:
    """P(A_t = a | X_t = x, X_{t+k} = y) for every lag k >= 1."""
    w: dict = {}
    for tr in enumerate_trajectories(mdp, policy):
        for t, (x, a) in enumerate(zip(tr.states, tr.actions)):
            for k in range(1, len(tr.actions) - t + 1):
                y = tr.states[t + k]
                key = (t, k, x, y)
                row = w.setdefault(key, np.zeros(mdp.n_actions))
                row[a] += tr.prob
    out = {}
    for key, row in w.items():
        out[key] = row / row.sum()
    return out


def return_posteriors(mdp: TabularMdp, policy: TabularPolicy, gamma: float) -> dict:
    """P(A_t = a | X_t = x, G_t = g); returns keyed by rounded value."""
    w: dict = {}
    for tr in enumerate_trajectories(mdp, policy):
        rets = tr.returns(gamma)
        for t, (x, a) in enumerate(zip(tr.states, tr.actions)):
            key = (t, x, round(float(rets[t]), RETURN_KEY_DECIMALS))
            row = w.setdefault(key, np.zeros(mdp.n_actions))
            row[a] += tr.prob
    return {key: row / row.sum() for key, row in w.items()}


def advantage_second_moments(mdp: TabularMdp, policy: TabularPolicy,
                             gamma: float,
                             phi_map: Callable[[EnumTraj], list]) -> tuple[np.ndarray, np.ndarray]:
    """Per-step E[(G_t - V(X_t))^2] and E[(G_t - V(X_t, Phi_t))^2], exact."""
    tables = exact_values(mdp, policy, gamma, phi_map)
    fwd = np.zeros(mdp.horizon)
    hind = np.zeros(mdp.horizon)
    for tr in enumerate_trajectories(mdp, policy):
        labels = phi_map(tr)
        rets = tr.returns(gamma)
        for t, (x, phi) in enumerate(zip(tr.states, labels)):
            g = rets[t]
            fwd[t] += tr.prob * (g - tables.v[(t, x)]) ** 2
            hind[t] += tr.prob * (g - tables.v_phi[(t, x, phi)]) ** 2
    return fwd, hind


# ---------------------------------------------------------------------------
# estimator expectations
# ---------------------------------------------------------------------------

@dataclass
class ExpectationReport:
    expected: np.ndarray
    exact: np.ndarray
    max_abs_distance: float
    diagnostics: dict = field(default_factory=dict)


def _safe_log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(p > 0.0, np.log(np.maximum(p, 1e-300)), -np.inf)


def estimator_expectation(mdp: TabularMdp, policy: TabularPolicy, gamma: float,
                          cfg: EstimatorConfig,
                          phi_map: Callable[[EnumTraj], list] | None = None,
                          annotate: Callable[[EnumTraj, Trajectory], HindsightAnnotation] | None = None,
                          baseline: Callable[[int, int], float] | None = None,
                          ) -> ExpectationReport:
    """Exact expectation of an estimator over the trajectory distribution.

    Hindsight ingredients default to the exact tables for the given
    phi_map; ``annotate`` overrides them (e.g. with learned networks).
    The unbiasedness verdict is the max-norm distance to exact_gradient.
    """
    policy.clear_graph_cache()
    trajectories = enumerate_trajectories(mdp, policy)
    tables = None
    pair_post = None
    ret_post = None
    if annotate is None and cfg.kind in ("fc", "fc_all_action", "cca", "cca_all_action"):
        if phi_map is None:
            raise ValueError(f"estimator {cfg.kind} needs a phi_map")
        tables = exact_values(mdp, policy, gamma, phi_map)
    if annotate is None and cfg.kind == "hca_state":
        pair_post = state_posteriors(mdp, policy)
    if annotate is None and cfg.kind == "hca_return":
        ret_post = return_posteriors(mdp, policy, gamma)
    value_tables = exact_values(mdp, policy, gamma, lambda tr: [0] * len(tr.actions))

    expected = np.zeros((mdp.horizon, mdp.n_states, mdp.n_actions))
    diag_acc: dict = {}
    for tr in trajectories:
        traj = to_trajectory(tr, policy, gamma)
        annot = None
        base = None
        critic = None
        if annotate is not None:
            annot = annotate(tr, traj)
        elif cfg.kind in ("fc", "fc_all_action", "cca", "cca_all_action"):
            labels = phi_map(tr)
            values = np.array([tables.v_phi[(t, tr.states[t], labels[t])]
                               for t in range(len(labels))])
            log_h = [tables.log_posterior((t, tr.states[t], labels[t]))
                     for t in range(len(labels))]
            crit = [np.array([tables.q_phi.get((t, tr.states[t], labels[t], a),
                                               0.0)
                              for a in range(mdp.n_actions)])
                    for t in range(len(labels))]
            annot = HindsightAnnotation(phi=labels, values=values, log_h=log_h,
                                        critic=crit)
        elif cfg.kind == "hca_state":
            state_log_h = []
            for t in range(len(tr.actions)):
                per_k = {}
                for k in range(1, len(tr.actions) - t):
                    per_k[k] = _safe_log(
                        pair_post[(t, k, tr.states[t], tr.states[t + k])])
                state_log_h.append(per_k)
            annot = HindsightAnnotation(state_log_h=state_log_h)
        elif cfg.kind == "hca_return":
            rets = tr.returns(gamma)
            return_log_h = [
                _safe_log(ret_post[(t, tr.states[t],
                                    round(float(rets[t]), RETURN_KEY_DECIMALS))])
                for t in range(len(tr.actions))]
            annot = HindsightAnnotation(return_log_h=return_log_h)

        if cfg.kind == "reinforce":
            if baseline is None:
                base = np.array([value_tables.v[(t, x)] for t, x in
                                 enumerate(tr.states[:-1])])
            else:
                base = np.array([baseline(t, x) for t, x in
                                 enumerate(tr.states[:-1])])
        if cfg.kind == "all_action":
            critic = [np.array([value_tables.q[(t, x, a)]
                                for a in range(mdp.n_actions)])
                      for t, x in enumerate(tr.states[:-1])]

        result = estimate(traj, annot, policy.params(), cfg,
                          baseline=base, critic=critic)
        expected += tr.prob * result.grads[policy.logits].data
        for key, val in result.diagnostics.items():
            diag_acc[key] = diag_acc.get(key, 0.0) + tr.prob * val

    exact = exact_gradient(mdp, policy, gamma)
    return ExpectationReport(
        expected=expected,
        exact=exact,
        max_abs_distance=float(np.max(np.abs(expected - exact))),
        diagnostics=diag_acc,
    )


def sample_episodes(mdp: TabularMdp, policy: TabularPolicy, n: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Monte-Carlo rollout; returns (states (n, T+1), actions (n, T)).

    Used to cross-check enumerated probabilities against frequencies.
    """
    pi = policy.probs()
    states = np.full((n, mdp.horizon + 1), mdp.initial_state, dtype=np.int64)
    actions = np.zeros((n, mdp.horizon), dtype=np.int64)
    for t in range(mdp.horizon):
        x = states[:, t]
        cum_pi = np.cumsum(pi[t][x], axis=1)
        actions[:, t] = (rng.random((n, 1)) < cum_pi).argmax(axis=1)
        cum_p = np.cumsum(mdp.transitions[x, actions[:, t]], axis=1)
        states[:, t + 1] = (rng.random((n, 1)) < cum_p).argmax(axis=1)
    return states, actions

"""Tabular MDPs reparameterized as SCMs: all randomness becomes explicit
uniform noise mapped through inverse CDFs, so counterfactual rollouts with
common random numbers, abduction posteriors, and the model-based policy
gradient estimators are all exact finite sums.

The exogenous world for credit at step t holds the transition noise from
step t on, the policy noise strictly after t (the step-t action is the
quantity being credited), and the per-episode reward noise. Abduction
conditions on the observed future states given the factual action, the
literal future-state observation; conditioning on rewards as well is
available as a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..oracle import TabularMdp, TabularPolicy, enumerate_trajectories, exact_gradient

__all__ = ["ScmMdp", "model_based_cf_pg", "fcvf_baseline_check",
           "CF_VARIANTS", "FvfReport"]

CF_VARIANTS = ("one_point", "two_point", "k_point", "counterfactual",
               "counterfactual_model_only", "biased_naive")


def _partition(rows: list[np.ndarray]) -> list[tuple[float, float]]:
    """Refine [0,1) by the cumulative sums of every row, so each cell maps
    to one choice per row."""
    points = {0.0, 1.0}
    for row in rows:
        c = 0.0
        for p in row[:-1]:
            c += float(p)
            points.add(round(c, 12))
    pts = sorted(points)
    return [(lo, hi) for lo, hi in zip(pts[:-1], pts[1:]) if hi - lo > 1e-12]


def _choose(row: np.ndarray, u: float) -> int:
    c = 0.0
    for i, p in enumerate(row):
        c += float(p)
        if u < c - 1e-15:
            return i
    return len(row) - 1


@dataclass(frozen=True)
class EpsWorld:
    """One exogenous cell: representative uniforms plus the reward noise."""

    trans_u: tuple          # per offset step from t: uniform for transitions
    pol_u: tuple            # per offset step from t+1: uniform for actions
    reward_eps: float
    prob: float


class ScmMdp:
    def __init__(self, mdp: TabularMdp, policy: TabularPolicy, gamma: float):
        self.mdp = mdp
        self.gamma = gamma
        self.pi = policy.probs()
        self.trans_cells = _partition(
            [mdp.transitions[x, a] for x in range(mdp.n_states)
             for a in range(mdp.n_actions)])
        self.pol_cells = [
            _partition([self.pi[t, x] for x in range(mdp.n_states)])
            for t in range(mdp.horizon)]

    # -- noise enumeration --------------------------------------------------
    def noise_worlds(self, t_from: int) -> list[EpsWorld]:
        t_steps = self.mdp.horizon - t_from
        worlds = [((), (), 1.0)]
        for _ in range(t_steps):
            worlds = [(tu + ((lo + hi) / 2.0,), pu, p * (hi - lo))
                      for tu, pu, p in worlds for lo, hi in self.trans_cells]
        for k in range(1, t_steps):
            cells = self.pol_cells[t_from + k]
            worlds = [(tu, pu + ((lo + hi) / 2.0,), p * (hi - lo))
                      for tu, pu, p in worlds for lo, hi in cells]
        out = []
        for tu, pu, p in worlds:
            for eps, peps in self.mdp.noise_cells():
                out.append(EpsWorld(trans_u=tu, pol_u=pu, reward_eps=eps,
                                    prob=p * peps))
        return out

    # -- deterministic rollout under one exogenous world --------------------
    def resim(self, t0: int, x0: int, a0: int, eps: EpsWorld):
        """States after t0, actions and rewards from t0, all deterministic."""
        states, actions, rewards = [], [], []
        x, a = x0, a0
        for k in range(self.mdp.horizon - t0):
            t = t0 + k
            if k > 0:
                a = _choose(self.pi[t, x], eps.pol_u[k - 1])
            actions.append(a)
            rewards.append(self.mdp.reward(x, a, eps.reward_eps))
            x = _choose(self.mdp.transitions[x, actions[-1]], eps.trans_u[k])
            states.append(x)
        return tuple(states), tuple(actions), tuple(rewards)

    def g(self, t0: int, x0: int, a0: int, eps: EpsWorld) -> float:
        _, _, rewards = self.resim(t0, x0, a0, eps)
        return float(sum(self.gamma ** k * r for k, r in enumerate(rewards)))

    # -- abduction -----------------------------------------------------------
    def posterior(self, t0: int, x0: int, a0: int,
                  observed_states: tuple,
                  observed_rewards: tuple | None = None) -> list[tuple[EpsWorld, float]]:
        """Exogenous worlds consistent with the observed future states
        (and rewards, when given) under the factual action."""
        matches = []
        total = 0.0
        for eps in self.noise_worlds(t0):
            states, _, rewards = self.resim(t0, x0, a0, eps)
            if states != observed_states:
                continue
            if observed_rewards is not None and not np.allclose(
                    rewards, observed_rewards, atol=1e-12):
                continue
            matches.append(eps)
            total += eps.prob
        if total <= 0.0:
            raise ValueError("observed future has probability zero under the model")
        return [(e, e.prob / total) for e in matches]

    def posterior_action_marginal(self, t0: int, x0: int,
                                  observed_states: tuple) -> list[tuple[EpsWorld, float]]:
        """Naive abduction that ignores which action produced the future:
        worlds are weighted by the policy-marginal likelihood of the states.
        The resulting noise estimate carries action information, which is
        exactly what breaks the factual-score counterfactual estimator."""
        weighted = []
        total = 0.0
        for eps in self.noise_worlds(t0):
            like = 0.0
            for a in range(self.mdp.n_actions):
                states, _, _ = self.resim(t0, x0, a, eps)
                if states == observed_states:
                    like += self.pi[t0, x0, a]
            if like == 0.0:
                continue
            w = eps.prob * like
            weighted.append((eps, w))
            total += w
        if total <= 0.0:
            raise ValueError("observed future has probability zero under the model")
        return [(e, w / total) for e, w in weighted]

    # -- helpers -------------------------------------------------------------
    def state_visit_probs(self) -> np.ndarray:
        d = np.zeros((self.mdp.horizon, self.mdp.n_states))
        d[0, self.mdp.initial_state] = 1.0
        for t in range(self.mdp.horizon - 1):
            for x in range(self.mdp.n_states):
                if d[t, x] == 0.0:
                    continue
                for a in range(self.mdp.n_actions):
                    d[t + 1] += d[t, x] * self.pi[t, x, a] * \
                        self.mdp.transitions[x, a]
        return d

    def score(self, t: int, x: int, a: int) -> np.ndarray:
        s = -self.pi[t, x].copy()
        s[a] += 1.0
        return s


def model_based_cf_pg(mdp: TabularMdp, policy: TabularPolicy, gamma: float,
                      variant: str, k_samples: int = 3,
                      condition_on_rewards: bool = False) -> dict:
    """Exact expectation of one model-based estimator, with the max-norm
    distance to the exact gradient as the verdict."""
    if variant not in CF_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {CF_VARIANTS}")
    scm = ScmMdp(mdp, policy, gamma)
    grad = np.zeros((mdp.horizon, mdp.n_states, mdp.n_actions))

    if variant in ("one_point", "two_point", "k_point"):
        visits = scm.state_visit_probs()
        for t in range(mdp.horizon):
            for x in range(mdp.n_states):
                w_tx = visits[t, x] * gamma ** t
                if w_tx == 0.0:
                    continue
                for eps in scm.noise_worlds(t):
                    returns = np.array([scm.g(t, x, a, eps)
                                        for a in range(mdp.n_actions)])
                    pi = scm.pi[t, x]
                    if variant == "one_point":
                        for a in range(mdp.n_actions):
                            for a2 in range(mdp.n_actions):
                                grad[t, x] += w_tx * eps.prob * pi[a] * pi[a2] * \
                                    (returns[a] - returns[a2]) * scm.score(t, x, a)
                    elif variant == "two_point":
                        for a in range(mdp.n_actions):
                            for a2 in range(mdp.n_actions):
                                y = scm.score(t, x, a) - scm.score(t, x, a2)
                                grad[t, x] += 0.5 * w_tx * eps.prob * pi[a] * \
                                    pi[a2] * (returns[a] - returns[a2]) * y
                    else:
                        grad[t, x] += w_tx * eps.prob * _k_point_term(
                            scm, t, x, returns, k_samples)
    else:
        for tr in enumerate_trajectories(mdp, policy):
            rets = tr.returns(gamma)
            for t in range(mdp.horizon):
                x, a_fact = tr.states[t], tr.actions[t]
                if variant == "biased_naive":
                    post = scm.posterior_action_marginal(t, x, tr.states[t + 1:])
                else:
                    post = scm.posterior(
                        t, x, a_fact, tr.states[t + 1:],
                        tr.rewards[t:] if condition_on_rewards else None)
                for eps, q in post:
                    w = tr.prob * q * gamma ** t
                    if variant == "counterfactual_model_only":
                        g_base = scm.g(t, x, a_fact, eps)
                    else:
                        g_base = float(rets[t])
                    for a2 in range(mdp.n_actions):
                        g_cf = scm.g(t, x, a2, eps)
                        pa2 = scm.pi[t, x, a2]
                        if variant == "biased_naive":
                            grad[t, x] += w * pa2 * (g_base - g_cf) * \
                                scm.score(t, x, a_fact)
                        else:
                            grad[t, x] += w * pa2 * (g_cf - g_base) * \
                                scm.score(t, x, a2)

    exact = exact_gradient(mdp, policy, gamma)
    return {"expected": grad, "exact": exact,
            "max_abs_distance": float(np.max(np.abs(grad - exact)))}


def _k_point_term(scm: ScmMdp, t: int, x: int, returns: np.ndarray,
                  k: int) -> np.ndarray:
    n = len(returns)
    pi = scm.pi[t, x]
    term = np.zeros(n)
    combos = [[]]
    for _ in range(k):
        combos = [c + [a] for c in combos for a in range(n)]
    for combo in combos:
        p = float(np.prod([pi[a] for a in combo]))
        g = returns[np.array(combo)]
        for i, a in enumerate(combo):
            delta = g[i] - (g.sum() - g[i]) / (k - 1)
            term += (p / k) * delta * scm.score(t, x, a)
    return term


@dataclass
class FvfReport:
    zero_mean_max: float
    fwd_moment: np.ndarray   # per-step E[(G_t - V(X_t))^2]
    fvf_moment: np.ndarray   # per-step E[(G_t - V(X_t, E_{t+}))^2]


def fcvf_baseline_check(mdp: TabularMdp, policy: TabularPolicy,
                        gamma: float) -> FvfReport:
    """Exact check that the noise-conditional value function is a valid
    baseline: the score term has zero mean, and the residual second moment
    never exceeds the forward one."""
    scm = ScmMdp(mdp, policy, gamma)
    visits = scm.state_visit_probs()
    zero_mean = np.zeros((mdp.horizon, mdp.n_states, mdp.n_actions))
    fwd = np.zeros(mdp.horizon)
    fvf = np.zeros(mdp.horizon)
    for t in range(mdp.horizon):
        for x in range(mdp.n_states):
            if visits[t, x] == 0.0:
                continue
            pi = scm.pi[t, x]
            v_x = 0.0
            cells = []
            for eps in scm.noise_worlds(t):
                g_all = np.array([scm.g(t, x, a, eps)
                                  for a in range(mdp.n_actions)])
                v_eps = float(pi @ g_all)
                cells.append((eps.prob, g_all, v_eps))
                v_x += eps.prob * v_eps
            for prob, g_all, v_eps in cells:
                for a in range(mdp.n_actions):
                    w = visits[t, x] * prob * pi[a]
                    zero_mean[t, x] += w * v_eps * scm.score(t, x, a)
                    fwd[t] += w * (g_all[a] - v_x) ** 2
                    fvf[t] += w * (g_all[a] - v_eps) ** 2
    return FvfReport(zero_mean_max=float(np.max(np.abs(zero_mean))),
                     fwd_moment=fwd, fvf_moment=fvf)

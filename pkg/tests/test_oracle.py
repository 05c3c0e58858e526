import numpy as np
import pytest

from hlab import oracle
from hlab.oracle import (
    EnumerationLimitError,
    TabularMdp,
    TabularPolicy,
    advantage_second_moments,
    enumerate_trajectories,
    exact_gradient,
    exact_values,
    expected_return,
    load_fixture,
    sample_episodes,
)

from helpers import central_difference, relative_error

GAMMA = 0.9


def seeded_policy(mdp, seed=0, spread=0.5):
    rng = np.random.default_rng(seed)
    return TabularPolicy(mdp, rng.normal(0.0, spread,
                                         (mdp.horizon, mdp.n_states, mdp.n_actions)))


def one_state_bandit(rewards):
    rewards = np.asarray(rewards, dtype=float).reshape(1, -1)
    n = rewards.shape[1]
    return TabularMdp(transitions=np.ones((1, n, 1)), rewards=rewards, horizon=1)


class TestEnumeration:
    def test_single_state_two_actions(self):
        mdp = one_state_bandit([1.0, 0.0])
        policy = TabularPolicy(mdp, np.array([[[0.4, -0.4]]]))
        trajs = enumerate_trajectories(mdp, policy)
        assert len(trajs) == 2
        pi = policy.probs()[0, 0]
        got = {tr.actions[0]: tr.prob for tr in trajs}
        assert abs(got[0] - pi[0]) < 1e-15
        assert abs(got[1] - pi[1]) < 1e-15

    def test_deterministic_chain_single_trajectory(self):
        mdp = TabularMdp(transitions=np.array([[[0.0, 1.0]], [[0.0, 1.0]]]),
                         rewards=np.array([[1.0], [2.0]]), horizon=3)
        policy = TabularPolicy(mdp)
        trajs = enumerate_trajectories(mdp, policy)
        assert len(trajs) == 1
        assert trajs[0].prob == 1.0
        assert trajs[0].states == (0, 1, 1, 1)

    @pytest.mark.parametrize("name", ["chain2", "noisy_chain", "splitter",
                                      "noisy_bandit"])
    def test_probabilities_sum_to_one(self, name):
        mdp = load_fixture(name)
        policy = seeded_policy(mdp, seed=3)
        total = sum(tr.prob for tr in enumerate_trajectories(mdp, policy))
        assert abs(total - 1.0) < 1e-12

    def test_monte_carlo_frequencies_match_enumeration(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=1)
        trajs = enumerate_trajectories(mdp, policy)
        n = 1_000_000
        states, actions = sample_episodes(mdp, policy, n,
                                          np.random.default_rng(0))
        keys = {}
        for tr in trajs:
            keys[(tr.states, tr.actions)] = tr.prob
        sampled = {}
        for s_row, a_row in zip(states, actions):
            k = (tuple(s_row), tuple(a_row))
            sampled[k] = sampled.get(k, 0) + 1
        for key, p in keys.items():
            count = sampled.get(key, 0)
            sigma = np.sqrt(n * p * (1 - p))
            assert abs(count - n * p) < 3.0 * sigma + 1e-9, key

    def test_cap_enforced(self):
        mdp = TabularMdp(transitions=np.full((4, 4, 4), 0.25),
                         rewards=np.zeros((4, 4)), horizon=3)
        policy = TabularPolicy(mdp)
        with pytest.raises(EnumerationLimitError):
            enumerate_trajectories(mdp, policy, cap=1000)


class TestExactGradient:
    def test_uniform_policy_symmetric_rewards_zero_gradient(self):
        mdp = one_state_bandit([1.0, 1.0])
        policy = TabularPolicy(mdp)  # uniform
        grad = exact_gradient(mdp, policy, GAMMA)
        assert np.max(np.abs(grad)) < 1e-15

    @pytest.mark.parametrize("name", ["chain2", "noisy_chain", "splitter"])
    def test_finite_difference_agreement(self, name):
        mdp = load_fixture(name)
        policy = seeded_policy(mdp, seed=7)
        grad = exact_gradient(mdp, policy, GAMMA)
        fd = central_difference(
            lambda: expected_return(mdp, policy, GAMMA),
            [policy.logits.data], h=1e-6)[0]
        assert np.max(np.abs(grad - fd)) < 1e-8

    def test_score_function_expectation_equals_exact_gradient(self):
        from hlab.estimators import EstimatorConfig
        mdp = load_fixture("splitter")
        policy = seeded_policy(mdp, seed=2)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="reinforce"),
            baseline=lambda t, x: 0.0)
        assert report.max_abs_distance < 1e-10


class TestExactValues:
    def test_constant_phi_matches_forward_values(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=4)
        tables = exact_values(mdp, policy, GAMMA, oracle.phi_constant)
        for (t, x, _phi), v in tables.v_phi.items():
            assert abs(v - tables.v[(t, x)]) < 1e-12

    def test_full_future_with_action_pins_return(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=5)
        tables = exact_values(mdp, policy, GAMMA, oracle.phi_everything)
        for tr in enumerate_trajectories(mdp, policy):
            rets = tr.returns(GAMMA)
            labels = oracle.phi_everything(tr)
            for t in range(len(tr.actions)):
                v = tables.v_phi[(t, tr.states[t], labels[t])]
                assert abs(v - rets[t]) < 1e-12

    def test_future_without_action_pins_q_residual(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=5)
        tables = exact_values(mdp, policy, GAMMA,
                              oracle.phi_future_states_and_noise)
        for tr in enumerate_trajectories(mdp, policy):
            rets = tr.returns(GAMMA)
            labels = oracle.phi_future_states_and_noise(tr)
            for t, a in enumerate(tr.actions):
                q = tables.q_phi[(t, tr.states[t], labels[t], a)]
                assert abs(q - rets[t]) < 1e-12

    def test_tower_property(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=6)
        tables = exact_values(mdp, policy, GAMMA, oracle.phi_noise)
        by_tx: dict = {}
        for (t, x, phi), w in tables.cell_prob.items():
            acc = by_tx.setdefault((t, x), [0.0, 0.0])
            acc[0] += w
            acc[1] += w * tables.v_phi[(t, x, phi)]
        for key, (w, gv) in by_tx.items():
            assert abs(gv / w - tables.v[key]) < 1e-12

    def test_empty_conditioning_cell_raises(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=4)
        tables = exact_values(mdp, policy, GAMMA, oracle.phi_constant)
        with pytest.raises(KeyError):
            tables.v_phi[(0, 0, "never-seen-label")]


class TestVarianceTheorem:
    PHI_MAPS = {
        "noise": oracle.phi_noise,
        "future_state_1": oracle.phi_future_state(1),
        "future_states_and_noise": oracle.phi_future_states_and_noise,
    }

    @pytest.mark.parametrize("name", ["chain2", "noisy_chain", "splitter",
                                      "noisy_bandit"])
    @pytest.mark.parametrize("phi_name", list(PHI_MAPS))
    def test_hindsight_never_increases_advantage_moment(self, name, phi_name):
        mdp = load_fixture(name)
        policy = seeded_policy(mdp, seed=8)
        fwd, hind = advantage_second_moments(mdp, policy, GAMMA,
                                             self.PHI_MAPS[phi_name])
        assert np.all(hind <= fwd + 1e-12)

    def test_strict_reduction_with_informative_noise(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=8)
        fwd, hind = advantage_second_moments(mdp, policy, GAMMA,
                                             oracle.phi_noise)
        assert np.all(hind < fwd - 1e-6)

    def test_equality_with_constant_phi(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=8)
        fwd, hind = advantage_second_moments(mdp, policy, GAMMA,
                                             oracle.phi_constant)
        assert np.max(np.abs(fwd - hind)) < 1e-12

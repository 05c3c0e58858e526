import numpy as np
import pytest

from hlab import oracle
from hlab.oracle import RewardNoise, TabularMdp, TabularPolicy
from hlab.scm import ScmMdp, fcvf_baseline_check, model_based_cf_pg

GAMMA = 0.9


def two_step_mdp(noise=False):
    """2-state 2-action horizon-2 MDP with quarter-quantized transitions;
    next states carry information about the taken action."""
    transitions = np.array([
        [[0.75, 0.25], [0.25, 0.75]],
        [[0.5, 0.5], [0.25, 0.75]],
    ])
    rewards = np.array([[1.0, 0.0], [2.0, -1.0]])
    kwargs = {}
    if noise:
        kwargs["noise"] = RewardNoise(support=(0.0, 3.0), probs=(0.5, 0.5),
                                      weight=np.ones((2, 2)))
    return TabularMdp(transitions=transitions, rewards=rewards, horizon=2,
                      **kwargs)


def seeded_policy(mdp, seed=0):
    rng = np.random.default_rng(seed)
    return TabularPolicy(mdp, rng.normal(0, 0.5,
                                         (mdp.horizon, mdp.n_states, mdp.n_actions)))


class TestReparameterization:
    def test_resim_distribution_matches_kernel(self):
        # pushing the uniform cells through the inverse CDF reproduces the
        # transition and policy probabilities exactly
        mdp = two_step_mdp()
        policy = seeded_policy(mdp, 1)
        scm = ScmMdp(mdp, policy, GAMMA)
        for x in range(2):
            for a in range(2):
                mass = np.zeros(2)
                for eps in scm.noise_worlds(0):
                    states, _, _ = scm.resim(0, x, a, eps)
                    mass[states[0]] += eps.prob
                assert np.allclose(mass, mdp.transitions[x, a], atol=1e-12)

    def test_common_noise_couples_counterfactuals(self):
        # with every exogenous cell fixed, switching the first action leaves
        # downstream policy noise identical (inverse-CDF coupling)
        mdp = two_step_mdp()
        policy = seeded_policy(mdp, 2)
        scm = ScmMdp(mdp, policy, GAMMA)
        for eps in scm.noise_worlds(0)[:8]:
            _, actions_a, _ = scm.resim(0, 0, 0, eps)
            _, actions_b, _ = scm.resim(0, 0, 1, eps)
            assert actions_a[0] == 0 and actions_b[0] == 1

    def test_posterior_is_a_distribution_and_consistent(self):
        mdp = two_step_mdp(noise=True)
        policy = seeded_policy(mdp, 3)
        scm = ScmMdp(mdp, policy, GAMMA)
        for tr in oracle.enumerate_trajectories(mdp, policy)[:10]:
            post = scm.posterior(0, tr.states[0], tr.actions[0], tr.states[1:])
            assert abs(sum(q for _, q in post) - 1.0) < 1e-12
            for eps, _ in post:
                states, _, _ = scm.resim(0, tr.states[0], tr.actions[0], eps)
                assert states == tr.states[1:]


class TestModelBasedEstimators:
    @pytest.mark.parametrize("variant", ["one_point", "two_point", "k_point",
                                         "counterfactual",
                                         "counterfactual_model_only"])
    @pytest.mark.parametrize("noise", [False, True])
    def test_unbiased_variants_match_exact_gradient(self, variant, noise):
        mdp = two_step_mdp(noise=noise)
        policy = seeded_policy(mdp, 4)
        report = model_based_cf_pg(mdp, policy, GAMMA, variant)
        assert report["max_abs_distance"] < 1e-10, variant

    def test_counterfactual_conditioning_on_rewards_stays_unbiased(self):
        mdp = two_step_mdp(noise=True)
        policy = seeded_policy(mdp, 5)
        report = model_based_cf_pg(mdp, policy, GAMMA, "counterfactual",
                                   condition_on_rewards=True)
        assert report["max_abs_distance"] < 1e-10

    def test_biased_naive_shows_real_bias(self):
        # factual-action score against abducted counterfactual returns: the
        # noise posterior carries action information, so this form is biased
        mdp = two_step_mdp()
        policy = seeded_policy(mdp, 6)
        report = model_based_cf_pg(mdp, policy, GAMMA, "biased_naive")
        assert report["max_abs_distance"] > 1e-3

    def test_lemma_nested_abduction_identity(self):
        # Q(X_t, a') equals the expectation, over futures generated by the
        # factual action, of the posterior-mean counterfactual return.
        mdp = two_step_mdp(noise=True)
        policy = seeded_policy(mdp, 7)
        scm = ScmMdp(mdp, policy, GAMMA)
        tables = oracle.exact_values(mdp, policy, GAMMA,
                                     oracle.phi_constant)
        x0 = mdp.initial_state
        for a_fact in range(mdp.n_actions):
            # distribution over observed futures under the factual action
            futures: dict = {}
            for eps in scm.noise_worlds(0):
                states, _, _ = scm.resim(0, x0, a_fact, eps)
                futures[states] = futures.get(states, 0.0) + eps.prob
            for a_cf in range(mdp.n_actions):
                nested = 0.0
                for states, p_states in futures.items():
                    inner = sum(q * scm.g(0, x0, a_cf, eps)
                                for eps, q in scm.posterior(0, x0, a_fact, states))
                    nested += p_states * inner
                assert abs(nested - tables.q[(0, x0, a_cf)]) < 1e-12

    def test_unknown_variant_rejected(self):
        mdp = two_step_mdp()
        with pytest.raises(ValueError):
            model_based_cf_pg(mdp, seeded_policy(mdp), GAMMA, "nope")


class TestFutureConditionalValueFunction:
    def test_degenerate_noise_gives_equal_moments(self):
        # single action, deterministic transitions, no reward noise: the
        # exogenous world is a point mass and V(X, E) == V(X)
        mdp = TabularMdp(transitions=np.array([[[0.0, 1.0]], [[0.0, 1.0]]]),
                         rewards=np.array([[1.0], [2.0]]), horizon=3)
        policy = TabularPolicy(mdp)
        report = fcvf_baseline_check(mdp, policy, GAMMA)
        assert np.allclose(report.fwd_moment, report.fvf_moment, atol=1e-15)
        assert report.zero_mean_max < 1e-12

    def test_noisy_mdp_strict_variance_reduction(self):
        mdp = two_step_mdp(noise=True)
        policy = seeded_policy(mdp, 8)
        report = fcvf_baseline_check(mdp, policy, GAMMA)
        assert np.all(report.fvf_moment < report.fwd_moment - 1e-6)
        assert report.zero_mean_max < 1e-12

    def test_zero_mean_score_identity(self):
        mdp = two_step_mdp()
        policy = seeded_policy(mdp, 9)
        report = fcvf_baseline_check(mdp, policy, GAMMA)
        assert report.zero_mean_max < 1e-12

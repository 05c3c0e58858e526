import numpy as np
import pytest

from hlab import autodiff as ad
from hlab import oracle
from hlab.estimators import (
    DegenerateClassifierError,
    EstimatorConfig,
    HindsightAnnotation,
    StepRecord,
    Trajectory,
    all_action_grad,
    cca_single_action_grad,
    discounted_returns,
    fc_single_action_grad,
    hca_grad,
    hca_return_all_action_grad,
    reinforce_grad,
)
from hlab.oracle import TabularMdp, TabularPolicy, load_fixture

from helpers import relative_error

GAMMA = 0.9


def seeded_policy(mdp, seed=0, spread=0.5):
    rng = np.random.default_rng(seed)
    return TabularPolicy(mdp, rng.normal(0.0, spread,
                                         (mdp.horizon, mdp.n_states, mdp.n_actions)))


def make_traj(rewards, gamma=1.0, logits=None, actions=None):
    """Hand-built trajectory over a 2-action policy with shared logits."""
    rewards = list(rewards)
    n = len(rewards)
    logits = logits if logits is not None else [0.3, -0.2]
    actions = actions if actions is not None else [0] * n
    param = ad.parameter(np.asarray(logits, dtype=float), name="logits")
    steps = []
    row = ad.reshape(param, (1, len(logits)))
    dist = ad.softmax(row, axis=1)
    log_dist = ad.log_softmax(row, axis=1)
    for t in range(n):
        steps.append(StepRecord(observation=0, agent_state=0, action=actions[t],
                                reward=rewards[t],
                                log_prob=ad.narrow(log_dist, 1, actions[t], 1),
                                dist=dist, log_dist=log_dist))
    return Trajectory(steps=steps, gamma=gamma), param


class TestDiscountedReturns:
    def test_unit_discount(self):
        traj, _ = make_traj([1.0, 1.0, 1.0], gamma=1.0)
        assert np.allclose(discounted_returns(traj), [3.0, 2.0, 1.0])

    def test_geometric(self):
        traj, _ = make_traj([0.0, 0.0, 1.0], gamma=0.5)
        assert np.allclose(discounted_returns(traj), [0.25, 0.5, 1.0])

    def test_recursion_equals_direct_double_sum(self):
        rng = np.random.default_rng(0)
        rewards = rng.normal(size=7)
        traj, _ = make_traj(rewards, gamma=0.83)
        got = discounted_returns(traj)
        direct = np.array([sum(0.83 ** (s - t) * rewards[s]
                               for s in range(t, 7)) for t in range(7)])
        assert np.max(np.abs(got - direct)) < 1e-12


class TestReinforce:
    def test_zero_advantage_zero_gradient(self):
        traj, param = make_traj([1.0, 2.0], gamma=1.0)
        est = reinforce_grad(traj, discounted_returns(traj), [param])
        assert np.all(est.grads[param].data == 0.0)
        assert est.diagnostics["mean_advantage"] == 0.0

    def test_one_step_two_action_analytic_score(self):
        traj, param = make_traj([2.0], gamma=1.0, logits=[0.5, -0.5])
        baseline = np.array([0.3])
        est = reinforce_grad(traj, baseline, [param])
        pi = np.exp(param.data - np.logaddexp(*param.data))
        pi = np.exp(param.data) / np.exp(param.data).sum()
        expected = (2.0 - 0.3) * (np.array([1.0, 0.0]) - pi)
        assert relative_error(est.grads[param].data, expected) < 1e-12

    def test_expectation_matches_exact_gradient(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=1)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="reinforce"))
        assert report.max_abs_distance < 1e-10

    def test_any_state_baseline_keeps_expectation(self):
        # score zero-mean: an arbitrary action-independent baseline c(X_t)
        # leaves the expectation untouched.
        mdp = load_fixture("splitter")
        policy = seeded_policy(mdp, seed=2)
        rng = np.random.default_rng(3)
        c = rng.normal(0, 10, size=(mdp.horizon, mdp.n_states))
        base = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="reinforce"),
            baseline=lambda t, x: 0.0)
        shifted = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="reinforce"),
            baseline=lambda t, x: float(c[t, x]))
        assert np.max(np.abs(base.expected - shifted.expected)) < 1e-12


class TestAllAction:
    def test_constant_critic_zero_gradient(self):
        traj, param = make_traj([0.0], gamma=1.0)
        est = all_action_grad(traj, [np.array([3.0, 3.0])], [param])
        assert np.max(np.abs(est.grads[param].data)) < 1e-15

    def test_expectation_matches_exact_gradient(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=4)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="all_action"))
        assert report.max_abs_distance < 1e-10

    def test_uniform_two_action_pushes_toward_better_action(self):
        traj, param = make_traj([0.0], gamma=1.0, logits=[0.0, 0.0])
        est = all_action_grad(traj, [np.array([1.0, 0.0])], [param])
        g = est.grads[param].data
        # d pi(a)/d logit_b summed against Q=[1,0]: raises logit 0, lowers logit 1
        assert g[0] > 0.0 and g[1] < 0.0
        assert abs(g[0] + g[1]) < 1e-15


class TestFcSingleAction:
    def test_ratio_one_reduces_to_cca(self):
        traj, param = make_traj([1.0, -1.0], gamma=0.9, actions=[0, 1])
        pi_rows = [step.dist.data[0] for step in traj.steps]
        annot = HindsightAnnotation(
            phi=[0, 0], values=np.array([0.4, -0.2]),
            log_h=[np.log(row) for row in pi_rows])
        fc = fc_single_action_grad(traj, annot, [param])
        cca = cca_single_action_grad(traj, annot, [param])
        assert np.array_equal(fc.grads[param].data, cca.grads[param].data)
        assert fc.diagnostics["ratio_mean"] == pytest.approx(1.0)

    def test_exact_posterior_unbiased_with_dependent_phi(self):
        # Phi = X_{t+1} depends on the action; the pi/h correction restores
        # unbiasedness as long as the posterior keeps full support.
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=5)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="fc"),
            phi_map=oracle.phi_future_state(1))
        assert report.max_abs_distance < 1e-10

    def test_ratio_forced_to_one_is_biased(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=5)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA,
            EstimatorConfig(kind="fc", force_ratio_one=True),
            phi_map=oracle.phi_future_state(1))
        assert report.max_abs_distance > 1e-3

    def test_degenerate_classifier_raises(self):
        traj, param = make_traj([1.0], gamma=1.0)
        annot = HindsightAnnotation(phi=[0], values=np.array([0.5]),
                                    log_h=[np.log([1e-9, 1 - 1e-9])])
        with pytest.raises(DegenerateClassifierError):
            fc_single_action_grad(traj, annot, [param])

    def test_ratio_clipping_recorded(self):
        traj, param = make_traj([1.0], gamma=1.0)
        annot = HindsightAnnotation(phi=[0], values=np.array([0.5]),
                                    log_h=[np.log([1e-4, 1 - 1e-4])])
        cfg = EstimatorConfig(kind="fc", max_ratio=100.0)
        est = fc_single_action_grad(traj, annot, [param], cfg)
        assert est.diagnostics["clip_rate"] == 1.0
        assert est.diagnostics["ratio_max"] == 100.0


class TestFcAllAction:
    def test_constant_q_and_h_equals_pi_gives_zero(self):
        traj, param = make_traj([0.0], gamma=1.0)
        pi = traj.steps[0].dist.data[0]
        annot = HindsightAnnotation(phi=[0], values=np.array([0.0]),
                                    log_h=[np.log(pi)],
                                    critic=[np.array([2.0, 2.0])])
        from hlab.estimators import fc_all_action_grad
        est = fc_all_action_grad(traj, annot, [param])
        assert np.max(np.abs(est.grads[param].data)) < 1e-15

    def test_exact_ingredients_unbiased(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=6)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="fc_all_action"),
            phi_map=oracle.phi_future_state(1))
        assert report.max_abs_distance < 1e-10

    def test_critic_marginalization_identity(self):
        # E[Q(X, Phi, a) h(a|X, Phi) / pi(a|X) | X] == Q(X, a), enumerated.
        mdp = load_fixture("splitter")
        policy = seeded_policy(mdp, seed=7)
        phi_map = oracle.phi_future_state(1)
        tables = oracle.exact_values(mdp, policy, GAMMA, phi_map)
        pi = policy.probs()
        mass_x: dict = {}
        for (t, x, phi), w in tables.cell_prob.items():
            mass_x[(t, x)] = mass_x.get((t, x), 0.0) + w
        acc: dict = {}
        for (t, x, phi), w in tables.cell_prob.items():
            post = tables.posterior[(t, x, phi)]
            for a in range(mdp.n_actions):
                q = tables.q_phi.get((t, x, phi, a), 0.0)
                key = (t, x, a)
                acc[key] = acc.get(key, 0.0) + (w / mass_x[(t, x)]) * q * \
                    post[a] / pi[t, x, a]
        for (t, x, a), val in acc.items():
            assert abs(val - tables.q[(t, x, a)]) < 1e-10


class TestCca:
    def test_uninformative_phi_identical_to_reinforce(self):
        mdp = load_fixture("chain2")
        policy = seeded_policy(mdp, seed=8)
        cca = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="cca"),
            phi_map=oracle.phi_constant)
        rf = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="reinforce"))
        assert np.max(np.abs(cca.expected - rf.expected)) < 1e-12

    def test_unbiased_under_conditional_independence(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=9)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="cca"),
            phi_map=oracle.phi_noise)
        assert report.max_abs_distance < 1e-10

    def test_advantage_moment_no_higher_than_forward(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=9)
        fwd, hind = oracle.advantage_second_moments(mdp, policy, GAMMA,
                                                    oracle.phi_noise)
        assert np.all(hind < fwd - 1e-6)

    def test_learned_helplessness_with_action_phi(self):
        # Phi = A_t: the hindsight baseline absorbs the action's effect, the
        # advantage collapses, and the estimate is badly biased.
        mdp = load_fixture("noisy_bandit")
        policy = seeded_policy(mdp, seed=10, spread=0.3)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="cca"),
            phi_map=oracle.phi_action)
        assert report.max_abs_distance > 0.1
        # the mean learning signal collapses: what survives in the advantage
        # is pure noise residual, so the expected update is (biased to) zero
        assert abs(report.diagnostics["mean_advantage"]) < 1e-10
        assert np.max(np.abs(report.expected)) < 1e-10


class TestCcaAllAction:
    def test_constant_q_zero_gradient(self):
        traj, param = make_traj([0.0], gamma=1.0)
        annot = HindsightAnnotation(phi=[0], values=np.array([0.0]),
                                    critic=[np.array([5.0, 5.0])])
        from hlab.estimators import cca_all_action_grad
        est = cca_all_action_grad(traj, annot, [param])
        assert np.max(np.abs(est.grads[param].data)) < 1e-15

    def test_exact_q_unbiased_under_conditional_independence(self):
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=11)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind="cca_all_action"),
            phi_map=oracle.phi_noise)
        assert report.max_abs_distance < 1e-10

    def test_critic_tower_identity(self):
        # Q(X, a) == E[Q(X, Phi, a) | X, A=a], enumerated exactly.
        mdp = load_fixture("noisy_chain")
        policy = seeded_policy(mdp, seed=11)
        tables = oracle.exact_values(mdp, policy, GAMMA, oracle.phi_noise)
        num: dict = {}
        den: dict = {}
        for (t, x, phi), w in tables.cell_prob.items():
            post = tables.posterior[(t, x, phi)]
            for a in range(mdp.n_actions):
                if post[a] == 0.0:
                    continue
                key = (t, x, a)
                q = tables.q_phi[(t, x, phi, a)]
                num[key] = num.get(key, 0.0) + w * post[a] * q
                den[key] = den.get(key, 0.0) + w * post[a]
        for key in num:
            assert abs(num[key] / den[key] - tables.q[key]) < 1e-10


class TestHca:
    @pytest.mark.parametrize("name", ["chain2", "noisy_chain", "splitter"])
    @pytest.mark.parametrize("variant", ["hca_state", "hca_return"])
    def test_unbiased_on_full_support_fixtures(self, name, variant):
        mdp = load_fixture(name)
        policy = seeded_policy(mdp, seed=12)
        report = oracle.estimator_expectation(
            mdp, policy, GAMMA, EstimatorConfig(kind=variant))
        assert report.max_abs_distance < 1e-10

    def test_action_independent_return_shrinks_advantage_to_zero(self):
        # both actions pay the same: the return carries no action information,
        # h == pi, and the return-HCA advantage vanishes identically.
        mdp = TabularMdp(transitions=np.ones((1, 2, 1)),
                         rewards=np.array([[2.0, 2.0]]), horizon=1)
        policy = seeded_policy(mdp, seed=13)
        report = oracle.estimator_expectation(
            mdp, policy, 1.0, EstimatorConfig(kind="hca_return"))
        assert abs(report.diagnostics["adv_second_moment"]) < 1e-20
        assert np.max(np.abs(report.expected)) < 1e-15
        # and the exact gradient is itself zero here, so this is unbiased
        assert report.max_abs_distance < 1e-15

    def test_deterministic_reveal_all_action_form_stays_unbiased(self):
        # One-step bandit whose returns reveal the action exactly: the
        # single-action ratio form loses the support condition underlying
        # the importance correction and goes biased; the all-action product
        # form has no ratio and stays exact.
        mdp = TabularMdp(transitions=np.ones((1, 2, 1)),
                         rewards=np.array([[1.0, 0.0]]), horizon=1)
        policy = seeded_policy(mdp, seed=14)
        single = oracle.estimator_expectation(
            mdp, policy, 1.0, EstimatorConfig(kind="hca_return"))
        assert single.max_abs_distance > 1e-3

        exact = oracle.exact_gradient(mdp, policy, 1.0)
        ret_post = oracle.return_posteriors(mdp, policy, 1.0)
        expected = np.zeros_like(exact)
        for tr in oracle.enumerate_trajectories(mdp, policy):
            traj = oracle.to_trajectory(tr, policy, 1.0)
            rets = tr.returns(1.0)
            log_h = [np.log(np.maximum(
                ret_post[(t, tr.states[t],
                          round(float(rets[t]), oracle.RETURN_KEY_DECIMALS))],
                1e-300))
                for t in range(len(tr.actions))]
            annot = HindsightAnnotation(return_log_h=log_h)
            est = hca_return_all_action_grad(traj, annot, policy.params())
            expected += tr.prob * est.grads[policy.logits].data
        assert np.max(np.abs(expected - exact)) < 1e-10

    def test_state_hca_accepts_realized_rewards_per_lag(self):
        traj, param = make_traj([1.0, 2.0, 3.0], gamma=0.5, actions=[0, 1, 0])
        pi_rows = [step.dist.data[0] for step in traj.steps]
        annot = HindsightAnnotation(
            state_log_h=[{1: np.log(pi_rows[0]), 2: np.log(pi_rows[0])},
                         {1: np.log(pi_rows[1])},
                         {}])
        est = hca_grad(traj, "state", annot, [param])
        # with h == pi every correction term cancels and only immediate
        # rewards drive the advantage
        adv0 = 1.0
        assert est.diagnostics["mean_advantage"] == pytest.approx(
            np.mean([1.0, 2.0, 3.0]))


def test_gamma_discount_flag():
    traj, param = make_traj([1.0, 1.0], gamma=0.5, actions=[0, 0])
    baseline = np.zeros(2)
    with_discount = reinforce_grad(traj, baseline, [param])
    cfg = EstimatorConfig(kind="reinforce", drop_leading_discount=True)
    without = reinforce_grad(traj, baseline, [param], cfg)
    # G = [1.5, 1.0]; discounted weights (1, 0.5) vs (1, 1)
    pi = traj.steps[0].dist.data[0]
    score = np.array([1.0, 0.0]) - pi
    assert relative_error(with_discount.grads[param].data,
                          (1.5 + 0.5 * 1.0) * score) < 1e-12
    assert relative_error(without.grads[param].data,
                          (1.5 + 1.0) * score) < 1e-12

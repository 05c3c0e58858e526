import numpy as np
import pytest

from hlab import autodiff as ad
from hlab.credit import (
    AgentNets,
    EpisodeArrays,
    EpisodeBatch,
    LiveAnnotation,
    LossWeights,
    build_annotation,
    classifier_loss,
    composite_update,
    constraint_target,
    geco_update,
    hindsight_baseline_loss,
    im_loss_kl,
    im_loss_mi,
)
from hlab.estimators import EstimatorConfig
from hlab.nets import (
    AgentCore,
    AgentCoreConfig,
    ClassifierNet,
    HindsightConfig,
    HindsightNet,
    HindsightValueHead,
)

from helpers import central_difference, relative_error


def tiny_nets(seed=0, with_hindsight=True, n_actions=3, obs_width=4,
              **net_flags):
    rng = np.random.default_rng(seed)
    core_cfg = AgentCoreConfig(n_actions=n_actions, obs_shape=(obs_width,),
                               embed_width=5, lstm_width=6, policy_hidden=(6,),
                               value_hidden=(6,))
    core = AgentCore(core_cfg, rng)
    if not with_hindsight:
        return AgentNets(core=core, **net_flags)
    hs = HindsightNet(HindsightConfig(variant="backward_rnn",
                                      input_width=6 + 1 + 5, phi_width=4,
                                      rnn_width=5), rng)
    head = HindsightValueHead(rng, h_width=6, phi_width=4, hidden=(6,))
    cls = ClassifierNet(rng, h_width=6, phi_width=4, n_actions=n_actions,
                        hidden=(8,))
    return AgentNets(core=core, hindsight=hs, hs_value=head, classifier=cls,
                     **net_flags)


def tiny_episode(seed=0, batch=2, length=3, obs_width=4, n_actions=3,
                 gamma=0.9):
    rng = np.random.default_rng(seed)
    return EpisodeArrays(
        observations=rng.normal(size=(batch, length + 1, obs_width)),
        rewards=rng.normal(size=(batch, length)),
        actions=rng.integers(0, n_actions, size=(batch, length)),
        gamma=gamma)


def single_step_annotation(dist_rows, log_h_rows, actions, rewards, gamma=1.0):
    """Directly assembled annotation for loss-formula unit tests."""
    dists = [ad.constant(np.asarray(r, dtype=float)) for r in dist_rows]
    log_dists = [ad.log(d) for d in dists]
    log_h = [ad.constant(np.log(np.asarray(r, dtype=float)))
             for r in log_h_rows]
    batch = EpisodeBatch(rewards=np.asarray(rewards, dtype=float),
                         actions=np.asarray(actions, dtype=np.int64),
                         gamma=gamma)
    annot = LiveAnnotation(dists=dists, log_dists=log_dists,
                           fwd_values=[ad.constant(np.zeros((len(rewards), 1)))
                                       for _ in dists],
                           log_h_frozen=log_h)
    return batch, annot


class TestHindsightBaselineLoss:
    def test_perfect_fit_is_zero(self):
        batch = EpisodeBatch(rewards=np.array([[1.0, 2.0]]),
                             actions=np.zeros((1, 2), dtype=np.int64), gamma=1.0)
        g = batch.returns()
        values = [ad.constant(g[:, t:t + 1]) for t in range(2)]
        assert hindsight_baseline_loss(batch, values).item() == 0.0

    def test_constant_value_least_squares(self):
        # returns [1, 3]; constant prediction c: (1-c)^2 + (3-c)^2, min at 2
        batch = EpisodeBatch(rewards=np.array([[-2.0, 3.0]]),
                             actions=np.zeros((1, 2), dtype=np.int64), gamma=1.0)
        assert np.allclose(batch.returns(), [[1.0, 3.0]])

        def loss_at(c):
            values = [ad.constant([[c]]) for _ in range(2)]
            return hindsight_baseline_loss(batch, values).item()

        assert loss_at(2.0) == pytest.approx(2.0, abs=1e-15)
        assert loss_at(1.7) > loss_at(2.0)
        assert loss_at(2.3) > loss_at(2.0)

    def test_gradient_matches_finite_differences(self):
        nets = tiny_nets(seed=1)
        data = tiny_episode(seed=2)
        params = nets.hs_value.params()

        batch, annot = build_annotation(nets, data)
        loss = hindsight_baseline_loss(batch, annot.hs_values)
        grads = ad.backward(loss, params)

        def value():
            b, a = build_annotation(nets, data)
            return float(hindsight_baseline_loss(b, a.hs_values).data)

        fd = central_difference(value, [p.data for p in params])
        for p, f in zip(params, fd):
            assert relative_error(grads[p].data, f) < 1e-5, p.name


class TestClassifierLoss:
    def test_perfect_classifier_zero_loss(self):
        batch = EpisodeBatch(rewards=np.zeros((1, 2)),
                             actions=np.array([[1, 0]]), gamma=1.0)
        rows = [np.array([[1e-12, 1.0 - 1e-12]]), np.array([[1.0 - 1e-12, 1e-12]])]
        log_h = [ad.constant(np.log(r)) for r in rows]
        assert abs(classifier_loss(batch, log_h).item()) < 1e-9

    def test_uniform_classifier_t_log4(self):
        t_steps = 5
        batch = EpisodeBatch(rewards=np.zeros((1, t_steps)),
                             actions=np.zeros((1, t_steps), dtype=np.int64),
                             gamma=1.0)
        log_h = [ad.constant(np.full((1, 4), np.log(0.25)))
                 for _ in range(t_steps)]
        got = classifier_loss(batch, log_h).item()
        assert got == pytest.approx(t_steps * np.log(4.0), abs=1e-12)

    def test_classifier_loss_touches_only_omega(self):
        nets = tiny_nets(seed=3)
        data = tiny_episode(seed=4)
        batch, annot = build_annotation(nets, data)
        loss = classifier_loss(batch, annot.log_h_train)
        groups = nets.param_groups()
        grads = ad.backward(loss, nets.all_params())
        assert any(np.any(grads[p].data != 0.0) for p in groups["omega"])
        for name in ("fs", "v", "hs"):
            for p in groups[name]:
                assert np.all(grads[p].data == 0.0), p.name


class TestImLosses:
    def test_kl_zero_when_h_equals_pi(self):
        batch, annot = single_step_annotation(
            [[[0.3, 0.7]]], [[[0.3, 0.7]]], [[0]], [[0.0]])
        steps, mean = im_loss_kl(annot)
        assert abs(mean.item()) < 1e-15

    def test_kl_direct_formula(self):
        batch, annot = single_step_annotation(
            [[[0.5, 0.5]]], [[[0.9, 0.1]]], [[0]], [[0.0]])
        _, mean = im_loss_kl(annot)
        expected = 0.5 * np.log(0.5 / 0.9) + 0.5 * np.log(0.5 / 0.1)
        assert mean.item() == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.5108256238, abs=1e-9)

    def test_kl_nonnegative_on_oracle_posteriors(self):
        from hlab import oracle
        mdp = oracle.load_fixture("noisy_chain")
        rng = np.random.default_rng(5)
        policy = oracle.TabularPolicy(
            mdp, rng.normal(0, 0.5, (mdp.horizon, mdp.n_states, mdp.n_actions)))
        tables = oracle.exact_values(mdp, policy, 0.9,
                                     oracle.phi_future_state(1))
        pi = policy.probs()
        for (t, x, phi), post in tables.posterior.items():
            if np.any(post == 0.0):
                continue
            batch, annot = single_step_annotation(
                [pi[t, x][None, :]], [post[None, :]], [[0]], [[0.0]])
            _, mean = im_loss_kl(annot)
            assert mean.item() >= -1e-12

    def test_mi_zero_when_h_equals_pi(self):
        batch, annot = single_step_annotation(
            [[[0.3, 0.7]]], [[[0.3, 0.7]]], [[0]], [[0.0]])
        _, mean = im_loss_mi(annot)
        assert abs(mean.item()) < 1e-15

    def test_mi_zero_under_independence_with_exact_posterior(self):
        # A independent of Phi given H: exact posterior equals pi at every
        # phi, so the sampled MI estimate is exactly zero at each step.
        pi = [0.25, 0.75]
        for phi_value in range(3):
            batch, annot = single_step_annotation(
                [[pi]], [[pi]], [[1]], [[0.0]])
            _, mean = im_loss_mi(annot)
            assert abs(mean.item()) < 1e-15

    def test_mi_equals_policy_entropy_for_action_revealing_phi(self):
        pi = np.array([0.25, 0.75])
        onehot = [1.0 - 1e-13, 1e-13]
        batch, annot = single_step_annotation([[pi]], [[onehot]], [[0]], [[0.0]])
        _, mean = im_loss_mi(annot)
        entropy = -np.sum(pi * np.log(pi))
        assert mean.item() == pytest.approx(entropy, abs=1e-9)


class TestGeco:
    def test_lambda_fixed_at_constraint_equality(self):
        w = LossWeights(im=2.0, beta_im=0.5, mode="geco", geco_step=0.1)
        target = constraint_target(w, observed_entropy=1.2)
        geco_update(w, observed_im=target, observed_entropy=1.2)
        assert w.im == 2.0

    def test_lambda_increases_on_violation(self):
        w = LossWeights(im=2.0, beta_im=0.5, mode="geco", geco_step=0.1)
        geco_update(w, observed_im=10.0, observed_entropy=1.0)
        assert w.im > 2.0

    def test_geometric_growth_until_clip(self):
        eta, delta = 0.05, 0.8
        w = LossWeights(im=1.0, beta_im=0.0, mode="geco", geco_step=eta,
                        lambda_max=10.0)
        lam = []
        for _ in range(80):
            geco_update(w, observed_im=delta, observed_entropy=0.0)
            lam.append(w.im)
        for k, val in enumerate(lam, start=1):
            assert val == pytest.approx(min(np.exp(k * eta * delta), 10.0),
                                        rel=1e-12)
        assert lam[-1] == 10.0

    def test_literal_rule_moves_the_other_way(self):
        w = LossWeights(im=2.0, beta_im=0.0, mode="geco", geco_step=0.1,
                        geco_literal=True)
        geco_update(w, observed_im=1.0, observed_entropy=0.0)
        assert w.im < 2.0

    def test_fixed_lambda_mode_never_moves(self):
        w = LossWeights(im=3.0, mode="fixed_lambda")
        geco_update(w, observed_im=100.0, observed_entropy=0.0)
        assert w.im == 3.0


class TestCompositeUpdate:
    def test_total_recomposes_from_parts(self):
        nets = tiny_nets(seed=6)
        data = tiny_episode(seed=7)
        w = LossWeights(pg=1.0, fwd=0.05, hs=0.05, sup=0.01, im=0.7,
                        entropy=5e-3, beta_im=0.1)
        batch, annot = build_annotation(nets, data)
        _, breakdown = composite_update(batch, annot, w, nets.all_params(),
                                        EstimatorConfig(kind="cca"))
        assert breakdown.total == pytest.approx(breakdown.recompose(w),
                                                abs=1e-12)

    def test_omega_gets_only_supervised_gradients(self):
        nets = tiny_nets(seed=8)
        data = tiny_episode(seed=9)
        groups = nets.param_groups()
        w_no_sup = LossWeights(pg=1.0, fwd=0.05, hs=0.05, sup=0.0, im=0.7,
                               entropy=5e-3)
        batch, annot = build_annotation(nets, data)
        grads, _ = composite_update(batch, annot, w_no_sup, nets.all_params(),
                                    EstimatorConfig(kind="cca"))
        for p in groups["omega"]:
            assert np.all(grads[p].data == 0.0), p.name

    def test_reduction_to_actor_critic(self):
        # zero residual output + lambda_IM = 0 + no classifier effect on
        # theta_fs: the fs update must equal a plain actor-critic update.
        nets = tiny_nets(seed=10)
        for layer in (nets.hs_value.mlp.layers[-1],):
            layer.w.data[...] = 0.0
            layer.b.data[...] = 0.0
        data = tiny_episode(seed=11)
        w = LossWeights(pg=1.0, fwd=0.05, hs=0.05, sup=0.01, im=0.0,
                        entropy=5e-3, mode="fixed_lambda")
        batch, annot = build_annotation(nets, data)
        grads, _ = composite_update(batch, annot, w, nets.all_params(),
                                    EstimatorConfig(kind="cca"))

        ac = AgentNets(core=nets.core)  # same forward nets, no hindsight
        w_ac = LossWeights(pg=1.0, fwd=0.05, hs=0.0, sup=0.0, im=0.0,
                           entropy=5e-3, mode="fixed_lambda")
        batch2, annot2 = build_annotation(ac, data)
        grads_ac, _ = composite_update(batch2, annot2, w_ac, ac.all_params(),
                                       EstimatorConfig(kind="reinforce"))
        for p in nets.param_groups()["fs"]:
            assert relative_error(grads[p].data, grads_ac[p].data) < 1e-12, p.name

    def test_hindsight_isolation_flag_blocks_fs(self):
        nets = tiny_nets(seed=12, hindsight_grads_into_fs=False)
        data = tiny_episode(seed=13)
        w = LossWeights(pg=0.0, fwd=0.0, hs=1.0, sup=0.0, im=0.0,
                        entropy=0.0, mode="fixed_lambda")
        batch, annot = build_annotation(nets, data)
        grads, _ = composite_update(batch, annot, w, nets.all_params(),
                                    EstimatorConfig(kind="cca"))
        for p in nets.param_groups()["fs"]:
            assert np.all(grads[p].data == 0.0), p.name
        assert any(np.any(grads[p].data != 0.0)
                   for p in nets.param_groups()["hs"])


class TestCompositeRouting:
    """Exact-zero assertions on forbidden routes, finite differences on the
    live ones, term by term."""

    def setup_method(self):
        self.nets = tiny_nets(seed=20)
        self.data = tiny_episode(seed=21)
        self.groups = self.nets.param_groups()

    def _grads_for(self, weights, kind="cca"):
        batch, annot = build_annotation(self.nets, self.data)
        return composite_update(batch, annot, weights, self.nets.all_params(),
                                EstimatorConfig(kind=kind))[0]

    def test_pg_term_routing(self):
        w = LossWeights(pg=1.0, fwd=0.0, hs=0.0, sup=0.0, im=0.0, entropy=0.0,
                        mode="fixed_lambda")
        grads = self._grads_for(w)
        for name in ("v", "hs", "omega"):
            for p in self.groups[name]:
                assert np.all(grads[p].data == 0.0), p.name
        # fs gradient matches finite differences with the advantage frozen
        batch, annot0 = build_annotation(self.nets, self.data)
        adv0 = batch.returns() - np.concatenate(
            [v.data for v in annot0.hs_values], axis=1)
        gammas = batch.gamma ** np.arange(batch.length)

        def value():
            b, a = build_annotation(self.nets, self.data)
            total = 0.0
            for t in range(b.length):
                logp = np.take_along_axis(a.log_dists[t].data,
                                          b.actions[:, t:t + 1], axis=1)
                total -= gammas[t] * float(np.mean(logp * adv0[:, t:t + 1]))
            return total

        fs = self.groups["fs"]
        fd = central_difference(value, [p.data for p in fs])
        for p, f in zip(fs, fd):
            assert relative_error(grads[p].data, f, floor=1e-5) < 1e-4, p.name

    def test_forward_baseline_routing(self):
        w = LossWeights(pg=0.0, fwd=1.0, hs=0.0, sup=0.0, im=0.0, entropy=0.0,
                        mode="fixed_lambda")
        grads = self._grads_for(w)
        for name in ("hs", "omega"):
            for p in self.groups[name]:
                assert np.all(grads[p].data == 0.0), p.name
        live = [p for p in self.groups["fs"]] + \
               list(self.nets.core.value_head.named_params().values())

        def value():
            b, a = build_annotation(self.nets, self.data)
            g = b.returns()
            return float(sum(np.mean((g[:, t:t + 1] - a.fwd_values[t].data) ** 2)
                             for t in range(b.length)))

        fd = central_difference(value, [p.data for p in live])
        for p, f in zip(live, fd):
            assert relative_error(grads[p].data, f) < 1e-5, p.name

    def test_hindsight_baseline_routing(self):
        w = LossWeights(pg=0.0, fwd=0.0, hs=1.0, sup=0.0, im=0.0, entropy=0.0,
                        mode="fixed_lambda")
        grads = self._grads_for(w)
        for p in self.groups["omega"]:
            assert np.all(grads[p].data == 0.0), p.name
        # forward value head is frozen inside the hindsight value
        for p in self.nets.core.value_head.named_params().values():
            assert np.all(grads[p].data == 0.0), p.name
        base0 = None

        def value():
            b, a = build_annotation(self.nets, self.data)
            g = b.returns()
            total = 0.0
            for t in range(b.length):
                res = a.hs_values[t].data - a.fwd_values[t].data
                total += float(np.mean((g[:, t:t + 1] - base0[t] - res) ** 2))
            return total

        b0, a0 = build_annotation(self.nets, self.data)
        base0 = [a0.fwd_values[t].data.copy() for t in range(b0.length)]
        live = self.nets.hs_value.params() + self.nets.hindsight.params() + \
            self.groups["fs"]
        fd = central_difference(value, [p.data for p in live])
        for p, f in zip(live, fd):
            assert relative_error(grads[p].data, f) < 1e-5, p.name

    def test_supervised_term_routing(self):
        w = LossWeights(pg=0.0, fwd=0.0, hs=0.0, sup=1.0, im=0.0, entropy=0.0,
                        mode="fixed_lambda")
        grads = self._grads_for(w)
        for name in ("fs", "hs", "v"):
            for p in self.groups[name]:
                assert np.all(grads[p].data == 0.0), p.name
        omega = self.groups["omega"]

        def value():
            b, a = build_annotation(self.nets, self.data)
            total = 0.0
            for t in range(b.length):
                logp = np.take_along_axis(a.log_h_train[t].data,
                                          b.actions[:, t:t + 1], axis=1)
                total -= float(np.mean(logp))
            return total

        fd = central_difference(value, [p.data for p in omega])
        for p, f in zip(omega, fd):
            assert relative_error(grads[p].data, f) < 1e-5, p.name

    def test_im_term_routing(self):
        w = LossWeights(pg=0.0, fwd=0.0, hs=0.0, sup=0.0, im=1.0, entropy=0.0,
                        beta_im=0.0, mode="fixed_lambda")
        grads = self._grads_for(w)
        for p in self.groups["omega"]:
            assert np.all(grads[p].data == 0.0), p.name
        live = self.groups["fs"] + self.groups["hs"]

        def value():
            b, a = build_annotation(self.nets, self.data)
            total = 0.0
            for t in range(b.length):
                pi = a.dists[t].data
                logpi = a.log_dists[t].data
                logh = a.log_h_frozen[t].data
                total += float(np.mean(np.sum(pi * (logpi - logh), axis=1)))
            return total

        fd = central_difference(value, [p.data for p in live])
        for p, f in zip(live, fd):
            assert relative_error(grads[p].data, f, floor=1e-5) < 1e-4, p.name

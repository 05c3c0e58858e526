"""Desk-scale verification suite: the exactness criteria that run in
seconds (worked-example SCM values, estimator unbiasedness and the crafted
bias demonstrations, the variance theorem, gradient integrity). Each check
returns a structured result; the CLI and the acceptance tests share them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import oracle
from .credit import LossWeights, build_annotation, composite_update
from .estimators import EstimatorConfig
from .oracle import TabularPolicy, load_fixture
from .scm import (
    ate,
    cf_ite,
    cf_ite_variance,
    coin_scm,
    ite,
    medical_scm,
    model_based_cf_pg,
)

__all__ = ["CheckResult", "check_scm_exactness", "check_unbiasedness",
           "check_variance_theorem", "check_gradient_integrity",
           "run_verification"]

GAMMA = 0.9
FIXTURES = ("chain2", "noisy_chain", "splitter")


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    details: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name} ({self.seconds:.2f}s)"


def _policy(mdp, seed):
    rng = np.random.default_rng(seed)
    return TabularPolicy(mdp, rng.normal(0, 0.5,
                                         (mdp.horizon, mdp.n_states,
                                          mdp.n_actions)))


def check_scm_exactness() -> CheckResult:
    start = time.monotonic()
    details = []
    ok = True

    def expect(label, got, want, tol=1e-12):
        nonlocal ok
        good = abs(got - want) <= tol
        ok = ok and good
        details.append(f"{label}: got {got!r}, want {want!r}")
        return good

    for version in ("I", "II"):
        med = medical_scm(version)
        expect(f"medical-{version} ATE", ate(med), 1 / 3)
        expect(f"medical-{version} var",
               cf_ite_variance(med), 1 / 6 if version == "I" else 1.0)
        expect(f"medical-{version} CF-ITE(drug, cured)",
               cf_ite(med, {"drug": 1, "cured": 1}),
               0.5 if version == "I" else 1.0)
        coin = coin_scm(version)
        expect(f"coin-{version} ATE", ate(coin), 0.0)
        ites = sorted({ite(coin, w) for w, _ in coin.exo_worlds()})
        want = [-1.0, 1.0] if version == "I" else [0.0]
        good = ites == want
        ok = ok and good
        details.append(f"coin-{version} ITE profile: {ites} vs {want}")
    return CheckResult("scm-exactness", ok, time.monotonic() - start, details)


def _phi_for(kind: str):
    if kind in ("fc", "fc_all_action"):
        return oracle.phi_future_state(1)
    if kind in ("cca", "cca_all_action"):
        return oracle.phi_noise
    return None


def check_unbiasedness(tol: float = 1e-10) -> CheckResult:
    start = time.monotonic()
    details = []
    ok = True
    kinds = ("reinforce", "all_action", "fc", "fc_all_action", "cca",
             "cca_all_action", "hca_state", "hca_return")
    for name in FIXTURES:
        mdp = load_fixture(name)
        policy = _policy(mdp, seed=11)
        for kind in kinds:
            report = oracle.estimator_expectation(
                mdp, policy, GAMMA, EstimatorConfig(kind=kind),
                phi_map=_phi_for(kind))
            good = report.max_abs_distance < tol
            ok = ok and good
            details.append(f"{name}/{kind}: distance "
                           f"{report.max_abs_distance:.2e}")

    # crafted violation 1: hindsight conditioned on the action itself,
    # no importance correction
    bandit = load_fixture("noisy_bandit")
    report = oracle.estimator_expectation(
        bandit, _policy(bandit, seed=3), GAMMA, EstimatorConfig(kind="cca"),
        phi_map=oracle.phi_action)
    good = report.max_abs_distance > 1e-3
    ok = ok and good
    details.append(f"violation cca/phi=action: bias {report.max_abs_distance:.3f}")

    # crafted violation 2: factual-score counterfactual with naive abduction
    from .oracle import RewardNoise, TabularMdp
    crafted = TabularMdp(
        transitions=np.array([[[0.75, 0.25], [0.25, 0.75]],
                              [[0.5, 0.5], [0.25, 0.75]]]),
        rewards=np.array([[1.0, 0.0], [2.0, -1.0]]), horizon=2)
    naive = model_based_cf_pg(crafted, _policy(crafted, seed=6), GAMMA,
                              "biased_naive")
    good = naive["max_abs_distance"] > 1e-3
    ok = ok and good
    details.append(f"violation biased_naive: bias "
                   f"{naive['max_abs_distance']:.3f}")
    return CheckResult("unbiasedness-suite", ok, time.monotonic() - start,
                       details)


def check_variance_theorem() -> CheckResult:
    start = time.monotonic()
    details = []
    ok = True
    maps = {"noise": oracle.phi_noise,
            "future_state_1": oracle.phi_future_state(1),
            "future_and_noise": oracle.phi_future_states_and_noise}
    for name in (*FIXTURES, "noisy_bandit"):
        mdp = load_fixture(name)
        policy = _policy(mdp, seed=21)
        for label, phi in maps.items():
            fwd, hind = oracle.advantage_second_moments(mdp, policy, GAMMA, phi)
            good = bool(np.all(hind <= fwd + 1e-12))
            ok = ok and good
            details.append(f"{name}/{label}: max gap "
                           f"{float(np.max(hind - fwd)):.2e}")
    fwd, hind = oracle.advantage_second_moments(
        load_fixture("noisy_chain"), _policy(load_fixture("noisy_chain"), 21),
        GAMMA, oracle.phi_noise)
    strict = bool(np.all(hind < fwd - 1e-6))
    ok = ok and strict
    details.append(f"strict on noisy_chain: {strict}")
    return CheckResult("variance-theorem", ok, time.monotonic() - start, details)


def _fd(build, params, h=1e-5):
    loss = build()
    grads = ad.backward(loss, params)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        gflat = grads[p].data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = build().item()
            flat[i] = orig - h
            minus = build().item()
            flat[i] = orig
            fd = (plus - minus) / (2 * h)
            denom = max(abs(fd), abs(gflat[i]), 1e-4)
            worst = max(worst, abs(fd - gflat[i]) / denom)
    return worst


def check_gradient_integrity(tol: float = 1e-6) -> CheckResult:
    start = time.monotonic()
    details = []
    ok = True
    rng = np.random.default_rng(0)
    a = ad.parameter(rng.normal(size=(3, 4)), name="a")
    b = ad.parameter(rng.normal(size=(3, 4)), name="b")
    w = ad.parameter(rng.normal(size=(4, 2)), name="w")
    pos = ad.parameter(rng.uniform(0.5, 2.0, size=(3, 4)), name="pos")
    idx = rng.integers(0, 4, size=(3, 1))
    x4 = ad.parameter(rng.normal(size=(1, 5, 5, 2)), name="x4")
    k4 = ad.parameter(rng.normal(size=(3, 3, 2, 2)) * 0.4, name="k4")
    op_builders = {
        "matmul": (lambda: ad.tsum(ad.matmul(a, w)), [a, w]),
        "add": (lambda: ad.tsum(ad.square(ad.add(a, b))), [a, b]),
        "sub": (lambda: ad.tsum(ad.square(ad.sub(a, b))), [a, b]),
        "mul": (lambda: ad.tsum(ad.mul(a, b)), [a, b]),
        "scale": (lambda: ad.tsum(ad.scale(a, 1.7)), [a]),
        "tanh": (lambda: ad.tsum(ad.tanh(a)), [a]),
        "relu": (lambda: ad.tsum(ad.relu(a)), [a]),
        "sigmoid": (lambda: ad.tsum(ad.sigmoid(a)), [a]),
        "exp": (lambda: ad.tsum(ad.exp(a)), [a]),
        "log": (lambda: ad.tsum(ad.log(pos)), [pos]),
        "square": (lambda: ad.tsum(ad.square(a)), [a]),
        "sum": (lambda: ad.tsum(ad.square(ad.tsum(a, axis=0))), [a]),
        "mean": (lambda: ad.tsum(ad.square(ad.tmean(a, axis=1))), [a]),
        "max": (lambda: ad.tsum(ad.tmax(a, axis=1)), [a]),
        "concat": (lambda: ad.tsum(ad.square(ad.concat([a, b], axis=0))), [a, b]),
        "slice": (lambda: ad.tsum(ad.square(ad.narrow(a, 0, 1, 2))), [a]),
        "softmax": (lambda: ad.tsum(ad.square(ad.softmax(a, axis=1))), [a]),
        "log_softmax": (lambda: ad.tsum(ad.square(ad.log_softmax(a, axis=1))), [a]),
        "gather": (lambda: ad.tsum(ad.gather(a, idx, axis=1)), [a]),
        "conv2d": (lambda: ad.tsum(ad.square(ad.conv2d_same(x4, k4))), [x4, k4]),
    }
    for name, (build, params) in op_builders.items():
        err = _fd(build, params)
        good = err < tol
        ok = ok and good
        details.append(f"op {name}: rel err {err:.2e}")

    # composite stop-gradient routing: forbidden groups get exact zeros
    from .credit import AgentNets
    from .nets import (AgentCore, AgentCoreConfig, ClassifierNet,
                       HindsightConfig, HindsightNet, HindsightValueHead)
    from .credit import EpisodeArrays
    nrng = np.random.default_rng(1)
    core = AgentCore(AgentCoreConfig(n_actions=3, obs_shape=(4,),
                                     embed_width=4, lstm_width=5,
                                     policy_hidden=(5,), value_hidden=(5,)),
                     nrng)
    nets = AgentNets(
        core=core,
        hindsight=HindsightNet(HindsightConfig(variant="backward_rnn",
                                               input_width=5 + 1 + 4,
                                               phi_width=3, rnn_width=4), nrng),
        hs_value=HindsightValueHead(nrng, h_width=5, phi_width=3, hidden=(5,)),
        classifier=ClassifierNet(nrng, h_width=5, phi_width=3, n_actions=3,
                                 hidden=(6,)))
    data = EpisodeArrays(observations=nrng.normal(size=(2, 4, 4)),
                         rewards=nrng.normal(size=(2, 3)),
                         actions=nrng.integers(0, 3, size=(2, 3)),
                         gamma=0.9)
    groups = nets.param_groups()
    routing = [
        # (weights, forbidden groups)
        (LossWeights(pg=1, fwd=0, hs=0, sup=0, im=0, entropy=0,
                     mode="fixed_lambda"), ("v", "hs", "omega")),
        (LossWeights(pg=0, fwd=0, hs=1, sup=0, im=0, entropy=0,
                     mode="fixed_lambda"), ("omega",)),
        (LossWeights(pg=0, fwd=0, hs=0, sup=1, im=0, entropy=0,
                     mode="fixed_lambda"), ("fs", "v", "hs")),
        (LossWeights(pg=0, fwd=0, hs=0, sup=0, im=1, entropy=0, beta_im=0,
                     mode="fixed_lambda"), ("omega",)),
    ]
    labels = ("pg", "hs", "sup", "im")
    for label, (wts, forbidden) in zip(labels, routing):
        batch, annot = build_annotation(nets, data)
        grads, _ = composite_update(batch, annot, wts, nets.all_params(),
                                    EstimatorConfig(kind="cca"))
        zero = all(np.all(grads[p].data == 0.0)
                   for g in forbidden for p in groups[g])
        ok = ok and zero
        details.append(f"routing {label}: forbidden groups "
                       f"{'zero' if zero else 'NONZERO'}")

    # value-loss gradients against finite differences through the pipeline
    hs_params = nets.hs_value.params()

    def hs_loss():
        batch, annot = build_annotation(nets, data)
        from .credit import hindsight_baseline_loss
        return hindsight_baseline_loss(batch, annot.hs_values)

    err = _fd(hs_loss, hs_params)
    ok = ok and err < 1e-4
    details.append(f"composite hs-loss FD: rel err {err:.2e}")
    return CheckResult("gradient-integrity", ok, time.monotonic() - start,
                       details)


def run_verification(verbose: bool = False) -> list[CheckResult]:
    checks = (check_scm_exactness, check_unbiasedness, check_variance_theorem,
              check_gradient_integrity)
    results = []
    for check in checks:
        result = check()
        print(result.line())
        if verbose:
            for d in result.details:
                print(f"    {d}")
        results.append(result)
    return results

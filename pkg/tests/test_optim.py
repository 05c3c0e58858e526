import numpy as np
import pytest

from hlab import autodiff as ad
from hlab.autodiff import MissingGradientError, OptimizerState, optimizer_step
from hlab.autodiff import apply_checkpoint, load_checkpoint, save_checkpoint


def _grads_for(p, values):
    return {p: ad.constant(values)}


def test_sgd_single_step():
    p = ad.parameter([1.0])
    optimizer_step([p], _grads_for(p, [2.0]), OptimizerState(algo="sgd", lr=0.1))
    assert np.allclose(p.data, [0.8], atol=1e-15)


def test_rmsprop_first_step_closed_form():
    # from zero state: nu = (1-decay) g^2, p' = p - lr g / sqrt(nu + eps)
    lr, decay, eps = 0.01, 0.99, 1e-4
    g = np.array([0.7, -1.3])
    p = ad.parameter([1.0, -2.0])
    expected = p.data - lr * g / np.sqrt((1 - decay) * g * g + eps)
    optimizer_step([p], _grads_for(p, g),
                   OptimizerState(algo="rmsprop", lr=lr, decay=decay, epsilon=eps))
    assert np.allclose(p.data, expected, atol=1e-15)


def test_adam_first_step_closed_form():
    lr, b1, b2, eps = 0.002, 0.9, 0.999, 1e-8
    g = np.array([0.5, -0.1, 2.0])
    p = ad.parameter([0.0, 1.0, -1.0])
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    mhat = m / (1 - b1)
    vhat = v / (1 - b2)
    expected = p.data - lr * mhat / (np.sqrt(vhat) + eps)
    optimizer_step([p], _grads_for(p, g),
                   OptimizerState(algo="adam", lr=lr, beta1=b1, beta2=b2, epsilon=eps))
    assert np.allclose(p.data, expected, atol=1e-15)


def test_adam_two_steps_bias_correction():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    gs = [np.array([1.0]), np.array([-0.5])]
    p = ad.parameter([0.3])
    state = OptimizerState(algo="adam", lr=lr, beta1=b1, beta2=b2, epsilon=eps)
    ref = p.data.copy()
    m = np.zeros(1)
    v = np.zeros(1)
    for t, g in enumerate(gs, start=1):
        optimizer_step([p], _grads_for(p, g), state)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        ref = ref - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert np.allclose(p.data, ref, atol=1e-15)


def test_missing_gradient_raises():
    p = ad.parameter([1.0])
    q = ad.parameter([2.0])
    with pytest.raises(MissingGradientError):
        optimizer_step([p, q], _grads_for(p, [1.0]), OptimizerState())


def test_deterministic_given_inputs():
    def run():
        p = ad.parameter([1.0, 2.0])
        state = OptimizerState(algo="rmsprop", lr=0.05)
        for _ in range(5):
            optimizer_step([p], _grads_for(p, [0.3, -0.4]), state)
        return p.data

    assert np.array_equal(run(), run())


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    params = {
        "enc/w": ad.parameter(rng.normal(size=(4, 3))),
        "enc/b": ad.parameter(rng.normal(size=(3,))),
        "pol/w": ad.parameter(rng.normal(size=(3, 2))),
    }
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, params)
    loaded = load_checkpoint(path)
    for name, t in params.items():
        assert np.array_equal(loaded[name], t.data)

    fresh = {name: ad.parameter(np.zeros_like(t.data)) for name, t in params.items()}
    apply_checkpoint(path, fresh)
    for name in params:
        assert np.array_equal(fresh[name].data, params[name].data)


def test_checkpoint_manifest_offsets(tmp_path):
    import json
    params = {"a": ad.parameter(np.arange(6, dtype=float).reshape(2, 3)),
              "b": ad.parameter([1.0])}
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, params)
    manifest = json.loads((tmp_path / "ckpt.bin.json").read_text())
    entries = {e["name"]: e for e in manifest["params"]}
    assert entries["a"]["offset"] == 0
    assert entries["a"]["shape"] == [2, 3]
    assert entries["b"]["offset"] == 6 * 8
    assert manifest["total_bytes"] == 7 * 8

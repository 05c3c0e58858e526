"""Parameter containers: linear, MLP, LSTM cell.

Weights initialize uniform in +-sqrt(6/(fan_in+fan_out)), biases at zero,
LSTM forget gate bias at 1. Every module exposes named_params() for
checkpointing and parameter-group bookkeeping, and can be applied with
frozen=True to treat its own weights as constants while still letting
gradients flow to the inputs.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor

__all__ = ["glorot", "Linear", "Mlp", "LstmCell"]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _maybe_freeze(t: Tensor, frozen: bool) -> Tensor:
    return ad.stop_gradient(t) if frozen else t


class Linear:
    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int, name: str):
        self.name = name
        self.w = ad.parameter(glorot(rng, n_in, n_out), name=f"{name}/w")
        self.b = ad.parameter(np.zeros(n_out), name=f"{name}/b")

    def __call__(self, x: Tensor, frozen: bool = False) -> Tensor:
        return ad.add(ad.matmul(x, _maybe_freeze(self.w, frozen)),
                      _maybe_freeze(self.b, frozen))

    def named_params(self) -> dict[str, Tensor]:
        return {self.w.name: self.w, self.b.name: self.b}


class Mlp:
    """Stack of linear layers with relu between hidden layers, linear output."""

    def __init__(self, rng: np.random.Generator, n_in: int,
                 hidden: tuple[int, ...], n_out: int, name: str,
                 activation: str = "relu"):
        self.name = name
        self.activation = activation
        sizes = [n_in, *hidden, n_out]
        self.layers = [Linear(rng, sizes[i], sizes[i + 1], f"{name}/l{i}")
                       for i in range(len(sizes) - 1)]

    def __call__(self, x: Tensor, frozen: bool = False) -> Tensor:
        act = {"relu": ad.relu, "tanh": ad.tanh}[self.activation]
        for layer in self.layers[:-1]:
            x = act(layer(x, frozen))
        return self.layers[-1](x, frozen)

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for layer in self.layers:
            out.update(layer.named_params())
        return out


class LstmCell:
    """Standard LSTM cell; gate order (i, f, g, o), forget bias 1."""

    def __init__(self, rng: np.random.Generator, n_in: int, width: int, name: str):
        self.name = name
        self.width = width
        self.w = ad.parameter(glorot(rng, n_in + width, 4 * width), name=f"{name}/w")
        bias = np.zeros(4 * width)
        bias[width:2 * width] = 1.0
        self.b = ad.parameter(bias, name=f"{name}/b")

    def initial_state(self, batch: int) -> tuple[Tensor, Tensor]:
        zeros = np.zeros((batch, self.width))
        return ad.constant(zeros), ad.constant(zeros)

    def step(self, x: Tensor, state: tuple[Tensor, Tensor],
             frozen: bool = False) -> tuple[Tensor, Tensor]:
        h, c = state
        z = ad.add(ad.matmul(ad.concat([x, h], axis=1), _maybe_freeze(self.w, frozen)),
                   _maybe_freeze(self.b, frozen))
        w = self.width
        i = ad.sigmoid(ad.narrow(z, 1, 0, w))
        f = ad.sigmoid(ad.narrow(z, 1, w, w))
        g = ad.tanh(ad.narrow(z, 1, 2 * w, w))
        o = ad.sigmoid(ad.narrow(z, 1, 3 * w, w))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_new = ad.mul(o, ad.tanh(c_new))
        return h_new, c_new

    def named_params(self) -> dict[str, Tensor]:
        return {self.w.name: self.w, self.b.name: self.b}

"""Reverse-mode automatic differentiation over dense float64 tensors.

Tensors form an implicit tape: every op records its parents and a backward
closure. ``backward(loss, params)`` walks the tape once in reverse
topological order and returns one gradient per requested parameter.
Graphs are per-step: rebuilding the forward pass starts a fresh tape.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "GradientMap",
    "DomainError",
    "ShapeError",
    "parameter",
    "constant",
    "backward",
    "forward_op",
    "stop_gradient",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "tanh",
    "relu",
    "sigmoid",
    "exp",
    "log",
    "square",
    "tsum",
    "tmean",
    "tmax",
    "concat",
    "narrow",
    "reshape",
    "transpose",
    "softmax",
    "log_softmax",
    "gather",
    "take_rows",
    "conv2d_same",
    "dropout",
]


class DomainError(ValueError):
    """Numerical domain violation (log of non-positive, non-finite values)."""


class ShapeError(ValueError):
    """Incompatible operand shapes for an op."""


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor values must be finite (got NaN/Inf)")
    return arr


class Tensor:
    """Dense float64 array plus an optional node in the differentiation graph.

    Constants have no parents; parameters are leaves flagged for gradient
    collection. Instances are hashable by identity so they can key a
    GradientMap.
    """

    __slots__ = ("data", "parents", "_backward", "is_parameter", "name")

    def __init__(self, values, parents: tuple = (), backward_fn=None,
                 is_parameter: bool = False, name: str | None = None):
        self.data = _as_array(values)
        self.parents = parents
        self._backward = backward_fn
        self.is_parameter = is_parameter
        self.name = name

    # -- introspection ----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = self.name or ("param" if self.is_parameter else "tensor")
        return f"Tensor({tag}, shape={self.shape})"

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division not supported; use scale")
        return scale(self, 1.0 / float(other))


GradientMap = dict  # Tensor -> Tensor, gradient shape == parameter shape


def parameter(values, name: str | None = None) -> Tensor:
    return Tensor(values, is_parameter=True, name=name)


def constant(values, name: str | None = None) -> Tensor:
    return Tensor(values, name=name)


def _wrap(other) -> Tensor:
    return other if isinstance(other, Tensor) else Tensor(other)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: {a.shape} vs {b.shape}") from exc

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + _unbroadcast(g, a.shape)
        grads[id(b)] = grads.get(id(b), 0.0) + _unbroadcast(g, b.shape)

    return Tensor(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = a.data - b.data
    except ValueError as exc:
        raise ShapeError(f"sub: {a.shape} vs {b.shape}") from exc

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + _unbroadcast(g, a.shape)
        grads[id(b)] = grads.get(id(b), 0.0) - _unbroadcast(g, b.shape)

    return Tensor(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: {a.shape} vs {b.shape}") from exc

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + _unbroadcast(g * b.data, a.shape)
        grads[id(b)] = grads.get(id(b), 0.0) + _unbroadcast(g * a.data, b.shape)

    return Tensor(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    a = _wrap(a)
    c = float(c)

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g * c

    return Tensor(a.data * c, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g @ b.data.T
        grads[id(b)] = grads.get(id(b), 0.0) + a.data.T @ g

    return Tensor(out, (a, b), bwd)


def _unary(a: Tensor, out: np.ndarray, dfn: Callable[[np.ndarray], np.ndarray]) -> Tensor:
    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g * dfn(out)

    return Tensor(out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    a = _wrap(a)
    return _unary(a, np.tanh(a.data), lambda y: 1.0 - y * y)


def sigmoid(a: Tensor) -> Tensor:
    a = _wrap(a)
    # numerically safe logistic
    out = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                   np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))
    return _unary(a, out, lambda y: y * (1.0 - y))


def relu(a: Tensor) -> Tensor:
    a = _wrap(a)
    out = np.maximum(a.data, 0.0)
    mask = (a.data > 0).astype(np.float64)

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g * mask

    return Tensor(out, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    a = _wrap(a)
    return _unary(a, np.exp(a.data), lambda y: y)


def log(a: Tensor) -> Tensor:
    a = _wrap(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log of non-positive value")
    out = np.log(a.data)

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g / a.data

    return Tensor(out, (a,), bwd)


def square(a: Tensor) -> Tensor:
    a = _wrap(a)
    out = a.data * a.data

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g * 2.0 * a.data

    return Tensor(out, (a,), bwd)


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g, grads):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        grads[id(a)] = grads.get(id(a), 0.0) + np.broadcast_to(g, a.shape).copy()

    return Tensor(out, (a,), bwd)


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    n = a.size if axis is None else a.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tmax(a: Tensor, axis: int) -> Tensor:
    """Max along ``axis``; gradient routes to the first argmax entry."""
    a = _wrap(a)
    out = a.data.max(axis=axis)
    idx = a.data.argmax(axis=axis)

    def bwd(g, grads):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis),
                          np.expand_dims(np.asarray(g), axis), axis=axis)
        grads[id(a)] = grads.get(id(a), 0.0) + full

    return Tensor(out, (a,), bwd)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of empty list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, grads):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            grads[id(t)] = grads.get(id(t), 0.0) + g[tuple(sl)]

    return Tensor(out, tuple(tensors), bwd)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries from ``start`` along ``axis``."""
    a = _wrap(a)
    if start < 0 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow [{start}:{start + length}] outside axis of {a.shape[axis]}")
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def bwd(g, grads):
        full = np.zeros_like(a.data)
        full[sl] = g
        grads[id(a)] = grads.get(id(a), 0.0) + full

    return Tensor(a.data[sl], (a,), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = _wrap(a)
    out = a.data.reshape(shape)

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g.reshape(a.shape)

    return Tensor(out, (a,), bwd)


def transpose(a: Tensor) -> Tensor:
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got {a.shape}")

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g.T

    return Tensor(a.data.T, (a,), bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g, grads):
        inner = (g * out).sum(axis=axis, keepdims=True)
        grads[id(a)] = grads.get(id(a), 0.0) + out * (g - inner)

    return Tensor(out, (a,), bwd)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    # fused max-subtraction keeps -log h stable at near-one-hot logits
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def bwd(g, grads):
        inner = g.sum(axis=axis, keepdims=True)
        grads[id(a)] = grads.get(id(a), 0.0) + g - p * inner

    return Tensor(out, (a,), bwd)


def gather(a: Tensor, index, axis: int = -1) -> Tensor:
    """Select entries along ``axis`` by integer index (take_along_axis)."""
    a = _wrap(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != a.data.ndim:
        raise ShapeError(f"gather index ndim {idx.ndim} != tensor ndim {a.data.ndim}")
    out = np.take_along_axis(a.data, idx, axis=axis)

    def bwd(g, grads):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, idx, g, axis=axis)
        grads[id(a)] = grads.get(id(a), 0.0) + full

    return Tensor(out, (a,), bwd)


def take_rows(a: Tensor, indices) -> Tensor:
    """Row lookup (embedding-style): rows of ``a`` at integer ``indices``."""
    a = _wrap(a)
    idx = np.asarray(indices, dtype=np.int64)
    out = a.data[idx]

    def bwd(g, grads):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        grads[id(a)] = grads.get(id(a), 0.0) + full

    return Tensor(out, (a,), bwd)


def stop_gradient(a: Tensor) -> Tensor:
    """Identity on values; blocks all gradient flow upstream."""
    a = _wrap(a)
    return Tensor(a.data.copy(), (), None)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with an explicit seeded stream."""
    a = _wrap(a)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(np.float64) / (1.0 - rate)

    def bwd(g, grads):
        grads[id(a)] = grads.get(id(a), 0.0) + g * keep

    return Tensor(a.data * keep, (a,), bwd)


def conv2d_same(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """2-D convolution, stride 1, SAME zero padding.

    x: (B, H, W, Cin), kernel: (kh, kw, Cin, Cout). Implemented by im2col so
    the backward pass reduces to matmul transposes.
    """
    x, kernel = _wrap(x), _wrap(kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 4 or x.shape[3] != kernel.shape[2]:
        raise ShapeError(f"conv2d_same: x {x.shape}, kernel {kernel.shape}")
    b, h, w, cin = x.shape
    kh, kw, _, cout = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    # columns: (B, H, W, kh*kw*Cin)
    cols = np.empty((b, h, w, kh * kw * cin))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, (i * kw + j) * cin:(i * kw + j + 1) * cin] = \
                padded[:, i:i + h, j:j + w, :]
    kmat = kernel.data.reshape(kh * kw * cin, cout)
    out = cols.reshape(-1, kh * kw * cin) @ kmat
    out = out.reshape(b, h, w, cout)
    if bias is not None:
        out = out + bias.data

    def bwd(g, grads):
        gmat = g.reshape(-1, cout)
        grads[id(kernel)] = grads.get(id(kernel), 0.0) + \
            (cols.reshape(-1, kh * kw * cin).T @ gmat).reshape(kernel.shape)
        if bias is not None:
            grads[id(bias)] = grads.get(id(bias), 0.0) + gmat.sum(axis=0)
        gcols = (gmat @ kmat.T).reshape(b, h, w, kh * kw * cin)
        gpad = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                gpad[:, i:i + h, j:j + w, :] += \
                    gcols[:, :, :, (i * kw + j) * cin:(i * kw + j + 1) * cin]
        grads[id(x)] = grads.get(id(x), 0.0) + gpad[:, ph:ph + h, pw:pw + w, :]

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor(out, parents, bwd)


# ---------------------------------------------------------------------------
# dispatch + backward pass
# ---------------------------------------------------------------------------

_OP_TABLE: dict[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "tanh": tanh,
    "relu": relu,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
    "square": square,
    "sum": tsum,
    "mean": tmean,
    "max": tmax,
    "concat": concat,
    "slice": narrow,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "gather": gather,
}


def forward_op(kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Name-based op dispatch; records the node for the backward pass."""
    if kind not in _OP_TABLE:
        raise ValueError(f"unknown op kind {kind!r}")
    if kind == "concat":
        return concat(list(inputs), **attrs)
    return _OP_TABLE[kind](*inputs, **attrs)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Tensor]) -> GradientMap:
    """Gradient of a scalar ``loss`` with respect to each parameter.

    Parameters not reachable from the loss get zero gradients.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    params = list(params)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_toposort(loss)):
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        node._backward(np.broadcast_to(g, node.shape), grads)
    out: GradientMap = {}
    for p in params:
        g = grads.get(id(p))
        out[p] = Tensor(np.zeros_like(p.data) if g is None else g)
    return out

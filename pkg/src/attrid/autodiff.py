"""Minimal reverse-mode autodiff on dense float64 arrays, plus Adam and a seeded RNG."""

from __future__ import annotations

import hashlib

import numpy as np

CLAMP_EPS = 1e-12


class InvalidShapeError(ValueError):
    pass


class NumericOverflowError(ArithmeticError):
    pass


class ContractViolationError(RuntimeError):
    pass


class Tensor:
    """A node in the compute graph: eager values, tape-recorded backward rule.

    Gradients accumulate (+=) into `grad`, which is allocated lazily.
    """

    __slots__ = ("values", "grad", "requires_grad", "parents", "op", "_backward")

    def __init__(self, values, requires_grad=False, parents=(), op="leaf", backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.parents = tuple(parents)
        self.op = op
        self._backward = backward

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        if self.values.size != 1:
            raise ContractViolationError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _make(values, parents, op, backward) -> Tensor:
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NumericOverflowError(f"non-finite output of op {op!r}")
    requires = any(p.requires_grad for p in parents)
    if not requires:
        return Tensor(values, requires_grad=False, op=op)
    return Tensor(values, requires_grad=True, parents=parents, op=op, backward=backward)


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False, op="const")


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise InvalidShapeError(f"{op}: shape {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# forward ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise InvalidShapeError(f"matmul: shape {a.shape} vs {b.shape}")

    def bw(g):
        _accum(a, g @ b.values.T)
        _accum(b, a.values.T @ g)

    return _make(a.values @ b.values, (a, b), "matmul", bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    return _make(a.values + b.values, (a, b), "add", bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return _make(a.values - b.values, (a, b), "sub", bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def bw(g):
        _accum(a, g * b.values)
        _accum(b, g * a.values)

    return _make(a.values * b.values, (a, b), "mul", bw)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        _accum(x, g * c)

    return _make(x.values * c, (x,), "scale", bw)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    if x.values.ndim != 2 or b.values.ndim != 1 or x.shape[1] != b.shape[0]:
        raise InvalidShapeError(f"add_bias: shape {x.shape} vs {b.shape}")

    def bw(g):
        _accum(x, g)
        _accum(b, g.sum(axis=0))

    return _make(x.values + b.values[None, :], (x, b), "add_bias", bw)


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0.0

    def bw(g):
        _accum(x, g * mask)

    return _make(np.where(mask, x.values, 0.0), (x,), "relu", bw)


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                   np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    def bw(g):
        _accum(x, g * out * (1.0 - out))

    return _make(out, (x,), "sigmoid", bw)


def softmax_rows(x: Tensor) -> Tensor:
    if x.values.ndim != 2:
        raise InvalidShapeError(f"softmax_rows: expected 2-D, got shape {x.shape}")
    z = x.values - x.values.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        _accum(x, out * (g - (g * out).sum(axis=1, keepdims=True)))

    return _make(out, (x,), "softmax_rows", bw)


def log(x: Tensor) -> Tensor:
    if np.any(x.values <= 0.0):
        raise ContractViolationError("log: non-positive input; clamp probabilities first")

    def bw(g):
        _accum(x, g / x.values)

    return _make(np.log(x.values), (x,), "log", bw)


def square(x: Tensor) -> Tensor:
    def bw(g):
        _accum(x, g * 2.0 * x.values)

    return _make(x.values * x.values, (x,), "square", bw)


def mean_all(x: Tensor) -> Tensor:
    n = x.values.size

    def bw(g):
        _accum(x, np.full_like(x.values, float(g) / n))

    return _make(x.values.mean(), (x,), "mean_all", bw)


def sum_all(x: Tensor) -> Tensor:
    def bw(g):
        _accum(x, np.full_like(x.values, float(g)))

    return _make(x.values.sum(), (x,), "sum_all", bw)


def sum_axis(x: Tensor, axis: int) -> Tensor:
    def bw(g):
        _accum(x, np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    return _make(x.values.sum(axis=axis), (x,), "sum_axis", bw)


def concat(xs, axis: int = 1) -> Tensor:
    xs = list(xs)
    if not xs:
        raise InvalidShapeError("concat: empty input list")
    sizes = [t.shape[axis] for t in xs]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(xs, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(t, g[tuple(idx)])

    return _make(np.concatenate([t.values for t in xs], axis=axis), tuple(xs), "concat", bw)


def gather_cols(x: Tensor, idx) -> Tensor:
    """out[i] = x[i, idx[i]]; idx is a length-batch integer vector."""
    idx = np.asarray(idx, dtype=np.int64)
    if x.values.ndim != 2 or idx.ndim != 1 or idx.shape[0] != x.shape[0]:
        raise InvalidShapeError(f"gather_cols: shape {x.shape} vs index shape {idx.shape}")
    if np.any(idx < 0) or np.any(idx >= x.shape[1]):
        raise ContractViolationError("gather_cols: index out of range")
    rows = np.arange(x.shape[0])

    def bw(g):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.values)
            np.add.at(x.grad, (rows, idx), g)

    return _make(x.values[rows, idx], (x,), "gather_cols", bw)


def clamp(x: Tensor, lo: float = CLAMP_EPS, hi: float = 1.0 - CLAMP_EPS) -> Tensor:
    inside = (x.values >= lo) & (x.values <= hi)

    def bw(g):
        _accum(x, g * inside)

    return _make(np.clip(x.values, lo, hi), (x,), "clamp", bw)


def detach(x: Tensor) -> Tensor:
    return Tensor(x.values, requires_grad=False, op="detach")


# ---------------------------------------------------------------------------
# backward

def backward(root: Tensor) -> int:
    """Reverse-topological backward pass from a scalar root.

    Returns the number of graph nodes visited (each exactly once).
    """
    if root.values.size != 1:
        raise ContractViolationError(f"backward: root must be scalar, got shape {root.shape}")
    # iterative post-order DFS over requires_grad subgraph
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    if root.grad is None:
        root.grad = np.zeros_like(root.values)
    root.grad += 1.0
    visits = 0
    for node in reversed(topo):
        visits += 1
        if node._backward is not None:
            node._backward(node.grad)
    return visits


# ---------------------------------------------------------------------------
# Adam

class AdamState:
    """Bias-corrected Adam over a fixed list of parameter tensors."""

    def __init__(self, lr=0.002, beta1=0.5, beta2=0.999, epsilon=1e-8):
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ContractViolationError("AdamState: betas must lie in (0, 1)")
        if epsilon <= 0.0:
            raise ContractViolationError("AdamState: epsilon must be positive")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.step_count = 0
        self.m = None
        self.v = None


def adam_step(params, state: AdamState) -> None:
    """One Adam update over `params`; grads are zeroed afterwards."""
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ContractViolationError(f"adam_step: parameter {p!r} has no gradient")
    if state.m is None:
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.values -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        p.grad = None


def zero_grads(params) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# seeded randomness

class SeededRng:
    """Deterministic random source; identical seed gives identical draws."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "SeededRng":
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        return SeededRng(int.from_bytes(digest[:8], "little") >> 1)

    def uniform(self, lo, hi, shape):
        return self._gen.uniform(lo, hi, size=shape)

    def normal(self, shape, scale=1.0):
        return self._gen.normal(0.0, scale, size=shape)

    def bernoulli(self, p, shape):
        return (self._gen.random(size=shape) < p).astype(np.float64)

    def integers(self, lo, hi, shape=None):
        return self._gen.integers(lo, hi, size=shape)

    def permutation(self, n):
        return self._gen.permutation(n)


def derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def xavier_uniform(rng: SeededRng, fan_in: int, fan_out: int):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))

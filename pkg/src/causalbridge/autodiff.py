"""Dense reverse-mode automatic differentiation on numpy arrays.

Just enough machinery for the small fully connected networks used by the
samplers and bridges: a :class:`Tensor` node type, the elementwise and
matrix operations those networks need, a seeded :class:`Mlp` and an
:class:`AdamW` optimiser.

The graph is rebuilt on every forward pass; there is no persistent tape.
All values are float64.

Example
-------
>>> w = Tensor(np.array([[2.0]]), requires_grad=True)
>>> loss = (w * w).sum()
>>> loss.backward()
>>> w.grad
array([[4.]])
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ContractError, DimensionError, TrainingDivergence

__all__ = [
    "Tensor", "as_tensor", "concat", "custom_op", "MlpSpec", "Mlp",
    "mlp_forward", "init_params", "AdamW", "backward", "numerical_gradient",
]


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """A node in the computation graph.

    ``parents`` is a tuple of input tensors and ``vjp`` maps the upstream
    gradient to a tuple of gradients, one per parent.
    """

    __slots__ = ("value", "grad", "parents", "vjp", "requires_grad")
    __array_priority__ = 100

    def __init__(self, value, parents=(), vjp=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    # -- bookkeeping -------------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.value

    def backward(self):
        backward(self)

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(self.value + other.value, (self, other),
                      lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        return Tensor(self.value - other.value, (self, other),
                      lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.value, other.value
        return Tensor(x * y, (self, other),
                      lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        x, y = self.value, other.value
        return Tensor(x / y, (self, other),
                      lambda g: (_unbroadcast(g / y, x.shape),
                                 _unbroadcast(-g * x / (y * y), y.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor(-self.value, (self,), lambda g: (-g,))

    def __pow__(self, k):
        if not np.isscalar(k):
            raise ContractError("only scalar exponents are supported")
        x = self.value
        return Tensor(x ** k, (self,), lambda g: (g * k * x ** (k - 1),))

    def __matmul__(self, other):
        other = as_tensor(other)
        x, y = self.value, other.value
        if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
            raise DimensionError(f"cannot multiply {x.shape} by {y.shape}")
        return Tensor(x @ y, (self, other), lambda g: (g @ y.T, x.T @ g))

    def __getitem__(self, idx):
        x = self.value
        parts = idx if isinstance(idx, tuple) else (idx,)
        basic = all(isinstance(i, (slice, int)) or i is None or i is Ellipsis for i in parts)

        def vjp(g):
            out = np.zeros_like(x)
            if basic:
                out[idx] = g
            else:
                np.add.at(out, idx, g)
            return (out,)

        return Tensor(x[idx], (self,), vjp)

    # -- reductions and reshapes -------------------------------------------
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor(self.value.sum(axis=axis, keepdims=keepdims), (self,), vjp)

    def mean(self, axis=None, keepdims=False):
        n = self.value.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Tensor(self.value.reshape(*shape), (self,), lambda g: (g.reshape(old),))

    @property
    def T(self):
        return Tensor(self.value.T, (self,), lambda g: (g.T,))

    # -- elementwise nonlinearities ----------------------------------------
    def relu(self):
        mask = self.value > 0
        return Tensor(self.value * mask, (self,), lambda g: (g * mask,))

    def sigmoid(self):
        s = expit(self.value)
        return Tensor(s, (self,), lambda g: (g * s * (1.0 - s),))

    def softplus(self):
        x = self.value
        return Tensor(np.logaddexp(0.0, x), (self,), lambda g: (g * expit(x),))

    def log_sigmoid(self):
        x = self.value
        return Tensor(-np.logaddexp(0.0, -x), (self,), lambda g: (g * expit(-x),))

    def exp(self):
        e = np.exp(self.value)
        return Tensor(e, (self,), lambda g: (g * e,))

    def log(self):
        x = self.value
        return Tensor(np.log(x), (self,), lambda g: (g / x,))

    def square(self):
        x = self.value
        return Tensor(x * x, (self,), lambda g: (2.0 * g * x,))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    """Concatenate along ``axis``; plain arrays are treated as constants."""
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]
    return Tensor(np.concatenate([t.value for t in ts], axis=axis), tuple(ts),
                  lambda g: tuple(np.split(g, cuts, axis=axis)))


def custom_op(inputs: Sequence[Tensor], value, vjp: Callable) -> Tensor:
    """Wrap a precomputed ``value`` whose vector-Jacobian product is ``vjp``.

    ``vjp(g)`` must return one gradient per input.
    """
    return Tensor(value, tuple(inputs), vjp)


def backward(loss: Tensor):
    """Populate ``.grad`` on every leaf reachable from the scalar ``loss``."""
    if loss.value.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node.parents:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for p, gp in zip(node.parents, node.vjp(g)):
            if not p.requires_grad:
                continue
            key = id(p)
            grads[key] = gp if key not in grads else grads[key] + gp


# -- networks ---------------------------------------------------------------

_ACTIVATIONS = {
    "relu": Tensor.relu,
    "linear": lambda t: t,
    "softplus": Tensor.softplus,
    "sigmoid": Tensor.sigmoid,
}


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected network: ``widths[0]`` inputs, one activation per layer."""

    widths: tuple
    activations: tuple
    seed: int = 0

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ContractError("an MLP needs at least one layer")
        if len(self.activations) != len(self.widths) - 1:
            raise ContractError("need one activation per layer")
        for a in self.activations:
            if a not in _ACTIVATIONS:
                raise ContractError(f"unknown activation {a!r}")

    @classmethod
    def relu_net(cls, widths, seed=0, out_activation="linear"):
        n = len(widths) - 1
        return cls(tuple(widths), ("relu",) * (n - 1) + (out_activation,), seed)


def init_params(spec: MlpSpec) -> list:
    """Glorot-uniform weights, zero biases, drawn from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    params = []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(Tensor(rng.uniform(-lim, lim, (fan_in, fan_out)), requires_grad=True))
        params.append(Tensor(np.zeros((1, fan_out)), requires_grad=True))
    return params


def mlp_forward(spec: MlpSpec, params, x) -> Tensor:
    x = as_tensor(x)
    if x.value.ndim != 2 or x.shape[1] != spec.widths[0]:
        raise DimensionError(f"input has shape {x.shape}, network expects (*, {spec.widths[0]})")
    for i, act in enumerate(spec.activations):
        x = _ACTIVATIONS[act](x @ params[2 * i] + params[2 * i + 1])
    return x


class Mlp:
    """An :class:`MlpSpec` bundled with its parameter tensors."""

    def __init__(self, spec: MlpSpec, params=None):
        self.spec = spec
        self.params = init_params(spec) if params is None else params

    def __call__(self, x) -> Tensor:
        return mlp_forward(self.spec, self.params, x)

    def predict(self, x) -> np.ndarray:
        """Forward pass on constants, returning a plain array."""
        h = np.asarray(x, dtype=np.float64)
        for i, act in enumerate(self.spec.activations):
            h = h @ self.params[2 * i].value + self.params[2 * i + 1].value
            if act == "relu":
                h = np.maximum(h, 0.0)
            elif act == "softplus":
                h = np.logaddexp(0.0, h)
            elif act == "sigmoid":
                h = expit(h)
        return h

    def state(self):
        return [p.value.copy() for p in self.params]

    def load(self, arrays):
        for p, a in zip(self.params, arrays):
            p.value = np.array(a, dtype=np.float64)


# -- optimiser --------------------------------------------------------------

@dataclass
class AdamW:
    """Adam with decoupled weight decay.

    Each step first shrinks every parameter by ``1 - lr * weight_decay`` and
    then applies the bias-corrected Adam update.
    """

    params: list
    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list, repr=False)
    v: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros_like(p.value) for p in self.params]
            self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, grads=None):
        if grads is None:
            grads = [np.zeros_like(p.value) if p.grad is None else p.grad for p in self.params]
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise TrainingDivergence("non-finite gradient",
                                         checkpoint=[p.value.copy() for p in self.params])
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if self.weight_decay:
                p.value *= 1.0 - self.lr * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def numerical_gradient(f: Callable[[], float], params, h: float = 1e-5):
    """Central finite differences of the scalar ``f()`` w.r.t. each tensor."""
    out = []
    for p in params:
        g = np.zeros_like(p.value)
        it = np.nditer(p.value, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p.value[i]
            p.value[i] = old + h
            fp = f()
            p.value[i] = old - h
            fm = f()
            p.value[i] = old
            g[i] = (fp - fm) / (2.0 * h)
        out.append(g)
    return out

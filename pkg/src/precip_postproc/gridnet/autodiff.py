"""
Minimal reverse-mode automatic differentiation over numpy arrays.

Every op builds a Tensor holding its value, its parent Tensors and a closure
that pushes the output gradient back into the parents. Tensor.backward()
visits the graph in reverse topological order, so each closure runs once
with the fully accumulated gradient of its output.

Broadcasting follows numpy; gradients are summed back to the parent's shape.
"""

import math

import numpy as np
from scipy import special

from ..distributions.special_math import SpecialOps, gamma_pdf

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    # numpy defers mixed arithmetic (ndarray op Tensor) to the Tensor methods
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, data, parents=(), backward=None, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = tuple(parents)
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.grad: np.ndarray | None = None
        self.name = name

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = unbroadcast(np.asarray(grad, dtype=np.float64), self.data.shape)
        self.grad = np.array(grad) if self.grad is None else self.grad + grad

    def backward(self, grad=None) -> None:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __getitem__(self, index):
        return getitem(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str | None = None) -> Tensor:
    """A leaf that collects gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        a.accumulate(g)
        b.accumulate(g)

    return Tensor(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        a.accumulate(g)
        b.accumulate(-g)

    return Tensor(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    return Tensor(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        a.accumulate(g / b.data)
        b.accumulate(-g * a.data / (b.data * b.data))

    return Tensor(a.data / b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(-a.data, (a,), lambda g: a.accumulate(-g))


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data**exponent, (a,), lambda g: a.accumulate(g * exponent * a.data ** (exponent - 1.0)))


def minimum(a, bound: float) -> Tensor:
    """min(a, bound) against a constant bound."""
    a = as_tensor(a)
    return Tensor(np.minimum(a.data, bound), (a,), lambda g: a.accumulate(g * (a.data <= bound)))


def matmul_last(x, w) -> Tensor:
    """Contract the last axis of x with the first axis of a 2-D w."""
    x, w = as_tensor(x), as_tensor(w)
    out = x.data @ w.data

    def backward(g):
        x.accumulate(g @ w.data.T)
        w.accumulate(x.data.reshape(-1, w.data.shape[0]).T @ g.reshape(-1, w.data.shape[1]))

    return Tensor(out, (x, w), backward)


# ---------------------------------------------------------------------------
# Reductions and shape ops
# ---------------------------------------------------------------------------


def sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x.accumulate(np.broadcast_to(g, x.data.shape))

    return Tensor(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), backward)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else math.prod(x.data.shape[a] for a in np.atleast_1d(axis))
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / count)


def getitem(x, index) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        x.accumulate(full)

    return Tensor(x.data[index], (x,), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.data.reshape(shape), (x,), lambda g: x.accumulate(g.reshape(x.data.shape)))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, splits, axis=axis)):
            t.accumulate(part)

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack_last(tensors) -> Tensor:
    return concat([reshape(t, as_tensor(t).shape + (1,)) for t in tensors], axis=-1)


def pad_spatial(x, pad_h: int, pad_w: int) -> Tensor:
    """Zero-pad axes 1 and 2 of a (B, H, W, C) tensor at the bottom/right."""
    x = as_tensor(x)
    if pad_h == 0 and pad_w == 0:
        return x
    H, W = x.data.shape[1:3]
    out = np.pad(x.data, ((0, 0), (0, pad_h), (0, pad_w), (0, 0)))
    return Tensor(out, (x,), lambda g: x.accumulate(g[:, :H, :W, :]))


# ---------------------------------------------------------------------------
# Elementwise functions
# ---------------------------------------------------------------------------


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return Tensor(out, (x,), lambda g: x.accumulate(g * out))


def log(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(np.log(x.data), (x,), lambda g: x.accumulate(g / x.data))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return Tensor(out, (x,), lambda g: x.accumulate(g * 0.5 / out))


def absolute(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(np.abs(x.data), (x,), lambda g: x.accumulate(g * np.sign(x.data)))


def relu(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(np.maximum(x.data, 0.0), (x,), lambda g: x.accumulate(g * (x.data > 0.0)))


def logistic(x) -> Tensor:
    x = as_tensor(x)
    out = special.expit(x.data)
    return Tensor(out, (x,), lambda g: x.accumulate(g * out * (1.0 - out)))


def softplus(x) -> Tensor:
    """log(1 + eˣ), finite for any finite x."""
    x = as_tensor(x)
    return Tensor(np.logaddexp(0.0, x.data), (x,), lambda g: x.accumulate(g * special.expit(x.data)))


def log_ndtr(x) -> Tensor:
    """log Φ(x), finite far into the lower tail."""
    x = as_tensor(x)
    out = special.log_ndtr(x.data)
    # φ(x)/Φ(x) taken in log space
    return Tensor(out, (x,), lambda g: x.accumulate(g * np.exp(-0.5 * x.data * x.data - _LOG_SQRT_2PI - out)))


def _dgammainc_dk(k: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    ∂P(k, x)/∂k.

    From the series P = Σₙ e⁻ˣ x^(k+n)/Γ(k+n+1):
    ∂P/∂k = P·ln x − Σₙ e⁻ˣ x^(k+n) ψ(k+n+1)/Γ(k+n+1), summed until the terms
    drop below 1e-17 of the total. Where Q(k, x) < 1e-20 the leading upper-tail
    term −Q·(ln x − ψ(k)) is used; it is off by O(Q·k/x), far below 1e-20.
    """
    k, x = (np.array(a, dtype=np.float64) for a in np.broadcast_arrays(k, x))
    out = np.zeros(k.shape)
    pos = x > 0.0
    upper = special.gammaincc(k, np.where(pos, x, 1.0))
    tail = pos & (upper < 1e-20)
    if tail.any():
        out[tail] = -upper[tail] * (np.log(x[tail]) - special.digamma(k[tail]))

    series = pos & ~tail
    if not series.any():
        return out
    ks, xs = k[series], x[series]
    term = np.exp(special.xlogy(ks, xs) - xs - special.gammaln(ks + 1.0))
    psi = special.digamma(ks + 1.0)
    total = term * psi
    peak = float(np.max(xs - ks))
    x_max = float(np.max(xs))
    for n in range(1, int(x_max + 12.0 * np.sqrt(x_max)) + 60):
        term = term * xs / (ks + n)
        psi = psi + 1.0 / (ks + n)
        total = total + term * psi
        if n > peak and np.all(np.abs(term * psi) <= 1e-17 * np.abs(total)):
            break
    out[series] = np.log(xs) * special.gammainc(ks, xs) - total
    return out


def gammainc(k, x) -> Tensor:
    """Regularized lower incomplete gamma P(k, x)."""
    k, x = as_tensor(k), as_tensor(x)
    out = special.gammainc(k.data, x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * gamma_pdf(k.data, x.data))
        if k.requires_grad:
            k.accumulate(g * _dgammainc_dk(*np.broadcast_arrays(k.data, x.data)))

    return Tensor(out, (k, x), backward)


def betaln(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        both = special.digamma(a.data + b.data)
        a.accumulate(g * (special.digamma(a.data) - both))
        b.accumulate(g * (special.digamma(b.data) - both))

    return Tensor(special.betaln(a.data, b.data), (a, b), backward)


AUTODIFF_OPS = SpecialOps(log_ndtr=log_ndtr, gammainc=gammainc, betaln=betaln, exp=exp)

"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tensor` wraps an ndarray and records the operations applied to
it; calling ``backward()`` on a scalar result walks the recorded graph in
reverse topological order and accumulates gradients on every tensor with
``requires_grad=True``.  Only the handful of operations the separation
pipeline needs are implemented; every backward rule is covered by a
finite-difference test.

``__array_ufunc__`` is disabled so that mixed expressions like
``ndarray - Tensor`` dispatch to the Tensor's reflected operators instead
of numpy's broadcasting machinery.  The module-level ``exp`` / ``tanh`` /
``sigmoid`` helpers accept plain ndarrays too, so the mask and loss
formulas can be written once and evaluated either numerically or under
the tape.
"""

import numpy as np

__all__ = ["Tensor", "as_tensor", "exp", "tanh", "sigmoid", "raw"]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes that were broadcast in the forward op."""
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
    """ndarray with a gradient tape."""

    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_done")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._done = False

    # -- construction helpers ------------------------------------------------

    @classmethod
    def _from_op(cls, data, parents, backward):
        out = cls(data)
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        return out

    def _accum(self, g):
        if self.requires_grad:
            self.grad = g if self.grad is None else self.grad + g

    # -- introspection ---------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)

        def backward(out):
            self._accum(_unbroadcast(out.grad, self.data.shape))
            other._accum(_unbroadcast(out.grad, other.data.shape))

        return Tensor._from_op(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(out):
            self._accum(-out.grad)

        return Tensor._from_op(-self.data, (self,), backward)

    def __sub__(self, other):
        other = as_tensor(other)

        def backward(out):
            self._accum(_unbroadcast(out.grad, self.data.shape))
            other._accum(_unbroadcast(-out.grad, other.data.shape))

        return Tensor._from_op(self.data - other.data, (self, other), backward)

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)

        def backward(out):
            self._accum(_unbroadcast(out.grad * other.data, self.data.shape))
            other._accum(_unbroadcast(out.grad * self.data, other.data.shape))

        return Tensor._from_op(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)

        def backward(out):
            self._accum(_unbroadcast(out.grad / other.data, self.data.shape))
            other._accum(
                _unbroadcast(-out.grad * self.data / (other.data * other.data),
                             other.data.shape)
            )

        return Tensor._from_op(self.data / other.data, (self, other), backward)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        if not np.isscalar(exponent):
            raise TypeError("only scalar exponents are supported")

        def backward(out):
            self._accum(out.grad * exponent * self.data ** (exponent - 1))

        return Tensor._from_op(self.data ** exponent, (self,), backward)

    def __matmul__(self, other):
        other = as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul is implemented for 2-D tensors only")

        def backward(out):
            self._accum(out.grad @ other.data.T)
            other._accum(self.data.T @ out.grad)

        return Tensor._from_op(self.data @ other.data, (self, other), backward)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # -- reductions and shape ops ------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def backward(out):
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape))

        return Tensor._from_op(
            self.data.sum(axis=axis, keepdims=keepdims), (self,), backward
        )

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape

        def backward(out):
            self._accum(out.grad.reshape(old))

        return Tensor._from_op(self.data.reshape(shape), (self,), backward)

    def transpose(self, axes=None):
        inv = None if axes is None else tuple(np.argsort(axes))

        def backward(out):
            self._accum(out.grad.transpose(inv))

        return Tensor._from_op(self.data.transpose(axes), (self,), backward)

    @property
    def T(self):
        return self.transpose()

    def take_rows(self, indices):
        """Gather rows by integer index; gradient scatter-adds back."""
        idx = np.asarray(indices, dtype=np.intp)

        def backward(out):
            g = np.zeros_like(self.data)
            np.add.at(g, idx, out.grad)
            self._accum(g)

        return Tensor._from_op(self.data[idx], (self,), backward)

    def __getitem__(self, key):
        def backward(out):
            g = np.zeros_like(self.data)
            np.add.at(g, key, out.grad)
            self._accum(g)

        return Tensor._from_op(self.data[key], (self,), backward)

    # -- backward pass ---------------------------------------------------------

    def backward(self):
        """Reverse-mode sweep from a scalar; may be called once per graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if self._done:
            raise RuntimeError(
                "backward() already called on this graph; rebuild it first"
            )
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node)
        self._done = True


def as_tensor(value) -> Tensor:
    """Wrap arrays/scalars as constant tensors; pass tensors through."""
    return value if isinstance(value, Tensor) else Tensor(value)


def raw(value) -> np.ndarray:
    """The plain ndarray behind a Tensor (or the input itself)."""
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    upper = 1.0 / (1.0 + np.exp(-np.abs(x)))  # exp(-|x|) never overflows
    return np.where(x >= 0, upper, 1.0 - upper)


def exp(x):
    if not isinstance(x, Tensor):
        return np.exp(x)

    value = np.exp(x.data)

    def backward(out):
        x._accum(out.grad * value)

    return Tensor._from_op(value, (x,), backward)


def tanh(x):
    if not isinstance(x, Tensor):
        return np.tanh(x)

    value = np.tanh(x.data)

    def backward(out):
        x._accum(out.grad * (1.0 - value * value))

    return Tensor._from_op(value, (x,), backward)


def sigmoid(x):
    if not isinstance(x, Tensor):
        return _stable_sigmoid(np.asarray(x, dtype=np.float64))

    value = _stable_sigmoid(x.data)

    def backward(out):
        x._accum(out.grad * value * (1.0 - value))

    return Tensor._from_op(value, (x,), backward)

"""Define-by-run reverse-mode differentiation over numpy arrays.

Only the handful of primitives the encoder and the attention head need are
provided.  Every op works on arbitrary leading (batch) dimensions.
"""

from contextlib import contextmanager

import numpy as np

from .errors import ContractError, NonFiniteError

DTYPE = np.float64
_checked = False


@contextmanager
def checked(enabled=True):
    """Reject non-finite values on tensor construction inside the block."""
    global _checked
    previous, _checked = _checked, enabled
    try:
        yield
    finally:
        _checked = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name="", _parents=(), _backward=None):
        data = np.asarray(data)
        if data.dtype.kind != "f":
            data = data.astype(DTYPE)
        if _checked and not np.all(np.isfinite(data)):
            raise NonFiniteError(f"non-finite values in tensor {name or '<anonymous>'}")
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError("backward without a seed gradient needs a scalar")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


class Parameter(Tensor):
    """A named leaf tensor whose gradient is tracked."""

    __slots__ = ()

    def __init__(self, data, name):
        super().__init__(np.array(data), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    @property
    def tensor(self):
        return self.data

    @property
    def gradient(self):
        return self.grad


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=DTYPE))


def _result(data, parents, backward):
    return Tensor(data, _parents=tuple(parents), _backward=backward)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a, factor):
    a = as_tensor(a)
    return _result(a.data * factor, (a,), lambda g: (g * factor,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ContractError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(np.matmul(a.data, b.data), (a, b), backward)


def affine(x, weight, bias=None):
    """``x @ weight.T (+ bias)`` with ``weight`` shaped (out, in)."""
    x = as_tensor(x)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ContractError(f"affine shape mismatch: input {x.shape}, weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ContractError(f"bias shape {bias.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = x.data.reshape(-1, x.shape[-1])
        grads = [g @ weight.data, g2.T @ x2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _result(out, parents, backward)


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _result(out, (x,), lambda g: (g * (1.0 - out * out),))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x):
    """Tanh approximation of GELU, as in BERT."""
    x = as_tensor(x)
    u = _GELU_C * (x.data + 0.044715 * x.data**3)
    th = np.tanh(u)
    out = 0.5 * x.data * (1.0 + th)

    def backward(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        return (g * (0.5 * (1.0 + th) + 0.5 * x.data * (1.0 - th * th) * du),)

    return _result(out, (x,), backward)


def layer_norm(x, gamma, beta, eps=1e-12):
    x = as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        d = x.shape[-1]
        gx_hat = g * gamma.data
        gx = inv / d * (
            d * gx_hat
            - gx_hat.sum(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True)
        )
        flat = g.reshape(-1, d)
        return gx, (flat * xhat.reshape(-1, d)).sum(axis=0), flat.sum(axis=0)

    return _result(out, (x, gamma, beta), backward)


def masked_softmax(logits, mask=None, axis=-1):
    """Softmax over the entries where ``mask`` is true; the rest are exactly 0.

    ``mask`` broadcasts against ``logits``.  Each slice along ``axis`` needs
    at least one active entry.
    """
    logits = as_tensor(logits)
    x = logits.data
    if mask is None:
        active = np.ones(x.shape, dtype=bool)
    else:
        active = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    if not np.all(active.any(axis=axis)):
        raise ContractError("masked softmax needs at least one active entry per row")
    top = np.max(np.where(active, x, -np.inf), axis=axis, keepdims=True)
    e = np.where(active, np.exp(np.where(active, x - top, 0.0)), 0.0)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result(out, (logits,), backward)


def softmax(logits, axis=-1):
    return masked_softmax(logits, None, axis)


def embedding(ids, table):
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(f"token id out of range for table with {table.shape[0]} rows")

    def backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return _result(table.data[ids], (table,), backward)


def reshape(x, shape):
    x = as_tensor(x)
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes):
    x = as_tensor(x)
    inverse = np.argsort(axes)
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(
        np.concatenate([t.data for t in tensors], axis=axis),
        tensors,
        lambda g: np.split(g, sizes, axis=axis),
    )


def dropout(x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(keep))


def mean(x):
    x = as_tensor(x)
    return _result(
        np.asarray(x.data.mean()),
        (x,),
        lambda g: (np.full(x.shape, g / x.data.size),),
    )


def nll(probs, gold, floor=1e-12):
    """Mean of ``-log(max(probs[i, gold[i]], floor))`` over the batch."""
    probs = as_tensor(probs)
    gold = np.asarray(gold)
    rows = np.arange(len(gold))
    picked = probs.data[rows, gold]
    clipped = np.maximum(picked, floor)
    batch = len(gold)

    def backward(g):
        grad = np.zeros_like(probs.data)
        live = picked > floor
        grad[rows[live], gold[live]] = -g / (batch * picked[live])
        return (grad,)

    return _result(np.asarray(-np.log(clipped).mean()), (probs,), backward)


def grad_check(loss_fn, params, epsilon=1e-5, tolerance=None, floor=1e-6):
    """Compare analytic gradients with central finite differences.

    ``loss_fn`` takes no arguments and returns a scalar Tensor built from
    ``params``.  Returns the max relative error over all coordinates, where
    the denominator is ``max(|analytic|, |numeric|, floor)``.  If
    ``tolerance`` is given, a larger error raises AssertionError.
    """
    if epsilon <= 0:
        raise ContractError("epsilon must be positive")
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data):
        raise NonFiniteError("loss is not finite at the base point")
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            up = float(loss_fn().data)
            flat[i] = saved - epsilon
            down = float(loss_fn().data)
            flat[i] = saved
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteError(f"non-finite loss while perturbing {p.name}[{i}]")
            numeric = (up - down) / (2 * epsilon)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    if tolerance is not None and worst > tolerance:
        raise AssertionError(f"max relative gradient error {worst:.3g} exceeds {tolerance:g}")
    return worst


def dump_tensor(array, fh):
    """Write a shape header line, then whitespace-separated values."""
    array = np.asarray(array)
    fh.write(" ".join(str(s) for s in array.shape) + "\n")
    fh.write(" ".join(repr(float(v)) for v in array.reshape(-1)) + "\n")


def load_tensor(fh):
    header = fh.readline().split()
    shape = tuple(int(s) for s in header)
    values = np.array([float(v) for v in fh.readline().split()], dtype=DTYPE)
    if values.size != int(np.prod(shape)):
        raise ContractError(f"expected {int(np.prod(shape))} values for shape {shape}")
    return values.reshape(shape)

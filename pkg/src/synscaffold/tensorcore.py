"""Small dense-tensor engine with tape-based reverse-mode differentiation.

Values are float64 numpy arrays.  Operations are recorded only while a
:class:`Tape` is active and at least one input requires a gradient, so
inference code runs without any bookkeeping.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = "synscaffold-checkpoint/1"

_local = threading.local()


class Tensor:
    __slots__ = ("data", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.op = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of the differentiable operations of one forward pass."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        if getattr(_local, "tape", None) is not None:
            raise RuntimeError("a tape is already active on this thread")
        _local.tape = self
        return self

    def __exit__(self, *exc):
        _local.tape = None
        return False

    def __len__(self):
        return len(self.nodes)


def active_tape():
    return getattr(_local, "tape", None)


def _make(data, parents, backward, op):
    if not np.isfinite(data).all():
        raise FloatingPointError(f"non-finite value produced by {op}")
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.op = op
        out._parents = parents
        out._backward = backward
        tape.nodes.append(out)
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape, loss):
    """Gradient of scalar ``loss`` with respect to every leaf that requires one.

    Returns a dict keyed by the leaf tensors themselves.
    """
    if loss.data.shape != () and loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    grads = {loss: np.ones_like(loss.data)}
    leaves = {}
    for node in reversed(tape.nodes):
        g = grads.pop(node, None)
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient flowing into {node.op}")
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            target = grads if parent._backward is not None else leaves
            if parent in target:
                target[parent] = target[parent] + pg
            else:
                target[parent] = pg
    for leaf, g in leaves.items():
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient reached a parameter")
    return leaves


# ---------------------------------------------------------------- primitives

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw, "add")


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw, "mul")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:
            return bd @ g, np.outer(ad, g)
        if bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g @ bd.T, ad.T @ g

    return _make(a.data @ b.data, (a, b), bw, "matmul")


def tanh(a):
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(a):
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a):
    on = a.data > 0
    return _make(a.data * on, (a,), lambda g: (g * on,), "relu")


def tensor_sum(a, axis=None):
    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _make(a.data.sum(axis=axis), (a,), bw, "sum")


def reshape(a, shape):
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bw, "concat")


def stack(tensors):
    """Stack equally shaped tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(g[k] for k in range(len(tensors)))

    return _make(np.stack([t.data for t in tensors]), tuple(tensors), bw, "stack")


def getitem(a, index):
    def bw(g):
        out = np.zeros_like(a.data)
        out[index] = g
        return (out,)

    return _make(a.data[index], (a,), bw, "slice")


def take(a, rows):
    """Gather along the first axis; ``rows`` may have any integer shape."""
    rows = np.asarray(rows, dtype=np.intp)

    def bw(g):
        out = np.zeros_like(a.data)
        np.add.at(out, rows, g)
        return (out,)

    return _make(a.data[rows], (a,), bw, "take")


def _masked(x, mask):
    if mask is None:
        return x
    return np.where(mask, x, -np.inf)


def logsumexp(a, axis=None, mask=None):
    """log(sum(exp(a))) over ``axis``; entries where ``mask`` is False are excluded."""
    x = _masked(a.data, mask)
    m = np.max(x, axis=axis, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ValueError("logsumexp over an empty (fully masked) set")
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    p = e / s

    def bw(g):
        gg = g if axis is None else np.expand_dims(g, axis)
        return (gg * p,)

    return _make(out.reshape(()) if axis is None else np.squeeze(out, axis), (a,), bw, "logsumexp")


def softmax(a, axis=-1, mask=None):
    x = _masked(a.data, mask)
    m = np.max(x, axis=axis, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ValueError("softmax over an empty (fully masked) set")
    e = np.exp(x - m)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (a,), bw, "softmax")


def log_softmax(a, axis=-1):
    m = np.max(a.data, axis=axis, keepdims=True)
    z = a.data - m
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def bw(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _make(y, (a,), bw, "log_softmax")


def dropout(a, p, rng, training):
    """Inverted dropout: survivors are scaled by 1/(1-p); identity outside training."""
    if not training or p == 0.0:
        return a
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,), "dropout")


# ---------------------------------------------------------------- parameters

def glorot_uniform(rng, shape):
    fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], 1)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParameterStore(dict):
    """Named parameters, in creation order."""

    def __init__(self, rng):
        super().__init__()
        self.rng = rng

    def weight(self, name, shape):
        return self._add(name, glorot_uniform(self.rng, shape))

    def bias(self, name, size):
        return self._add(name, np.zeros(size))

    def fixed(self, name, values, trainable=True):
        return self._add(name, np.array(values, dtype=np.float64), trainable)

    def _add(self, name, values, trainable=True):
        if name in self:
            raise KeyError(f"duplicate parameter {name}")
        t = Tensor(values, requires_grad=trainable)
        self[name] = t
        return t

    def trainable(self):
        return {k: v for k, v in self.items() if v.requires_grad}


# ---------------------------------------------------------------- optimisation

def clip_global_norm(gradients, max_norm):
    """Rescale a dict of gradient arrays so their joint 2-norm is at most ``max_norm``."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    if not gradients:
        return gradients
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in gradients.values()))
    if norm <= max_norm:
        return gradients
    scale = max_norm / norm
    return {k: g * scale for k, g in gradients.items()}


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, gradients, state):
    """Bias-corrected Adam update, in place.  Parameters without a gradient are untouched."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, g in gradients.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# ---------------------------------------------------------------- checking and storage

def numeric_gradient(fn, array, h=1e-5):
    """Central finite differences of scalar ``fn()`` with respect to ``array`` (mutated in place)."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = array[idx]
        array[idx] = old + h
        up = fn()
        array[idx] = old - h
        down = fn()
        array[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def save_checkpoint(path, params, meta):
    """Write little-endian float64 arrays plus a JSON metadata blob to an .npz archive."""
    import json

    arrays = {f"param/{k}": np.ascontiguousarray(v.data if isinstance(v, Tensor) else v, dtype="<f8")
              for k, v in params.items()}
    arrays["__version__"] = np.frombuffer(CHECKPOINT_VERSION.encode(), dtype=np.uint8)
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path):
    import json

    with np.load(path, allow_pickle=False) as z:
        if "__version__" not in z.files:
            raise ValueError(f"{path}: not a checkpoint (no version tag)")
        version = z["__version__"].tobytes().decode()
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: checkpoint version {version!r}, expected {CHECKPOINT_VERSION!r}")
        meta = json.loads(z["__meta__"].tobytes().decode())
        params = {k[len("param/"):]: z[k].astype(np.float64) for k in z.files if k.startswith("param/")}
    return params, meta

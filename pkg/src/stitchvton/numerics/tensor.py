"""Reverse-mode autodiff over dense float32 NCHW arrays.

The op set is fixed: conv2d, nearest-neighbour 2x upsample, 2x average
downsample, group normalization, SiLU, add/concat/narrow, sum and MSE.
Tensors are immutable values; every op builds a fresh node and never
writes into its inputs. All data is float32 and every op output is
checked for NaN/Inf, which is a hard error.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, NumericsError, ShapeError

__all__ = [
    "Tensor",
    "add",
    "avg_pool2",
    "backprop",
    "concat",
    "conv2d",
    "group_norm",
    "kaiming_uniform",
    "mse",
    "narrow",
    "silu",
    "tsum",
    "upsample_nearest2",
]


class Tensor:
    """A float32 array node in an acyclic compute graph.

    Leaf tensors are created directly; op outputs carry closures that
    push gradients to their parents. ``requires_grad`` on an op output
    is inherited from its parents.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise NumericsError("non-finite values in tensor of shape %s" % (arr.shape,))
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __add__(self, other):
        return add(self, other)

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (self.shape, self.requires_grad)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    parents = tuple(p for p in parents if isinstance(p, Tensor))
    needs = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=needs, _parents=parents,
                  _backward=backward if needs else None)


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.astype(np.float32, copy=True)
    else:
        t.grad = t.grad + g


def kaiming_uniform(shape, rng):
    """Kaiming-uniform fan-in init for conv weights (O, C, kh, kw)."""
    fan_in = int(np.prod(shape[1:]))
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


# ---------------------------------------------------------------------------
# convolution

def _im2col(xp, kh, kw, oh, ow, stride):
    b, c = xp.shape[:2]
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=np.float32)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u:u + stride * oh:stride,
                                  v:v + stride * ow:stride]
    return cols.reshape(b, c * kh * kw, oh * ow)


def conv2d(x, w, b=None, stride=1, padding=0):
    """Cross-correlation of NCHW input with OIHW weights.

    Output spatial dims are floor((H + 2p - k)/s) + 1. Differentiable
    w.r.t. input, weight and bias.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if b is not None:
        b = _as_tensor(b)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d needs 4-D input/weight, got %s and %s"
                         % (x.shape, w.shape))
    if stride < 1:
        raise ContractError("conv2d stride must be >= 1, got %d" % stride)
    bs, cin, h, ww = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError("conv2d channel mismatch: input %s vs weight %s"
                         % (x.shape, w.shape))
    if b is not None and b.shape != (cout,):
        raise ShapeError("conv2d bias shape %s does not match %d out-channels"
                         % (b.shape, cout))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (ww + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError("conv2d produces empty output for input %s kernel %s"
                         % (x.shape, w.shape))

    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    cols = _im2col(xp, kh, kw, oh, ow, stride)           # (B, C*kh*kw, L)
    w_mat = w.data.reshape(cout, cin * kh * kw)
    out = np.matmul(w_mat, cols)                          # (B, O, L)
    if b is not None:
        out = out + b.data[:, None]
    out = out.reshape(bs, cout, oh, ow)

    def backward(node):
        g = node.grad
        gm = g.reshape(bs, cout, oh * ow)
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            gw = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0)
            _accum(w, gw.reshape(w.shape))
        if x.requires_grad:
            gcols = np.matmul(w_mat.T, gm)                # (B, K, L)
            gcols = gcols.reshape(bs, cin, kh, kw, oh, ow)
            gxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    gxp[:, :, u:u + stride * oh:stride,
                        v:v + stride * ow:stride] += gcols[:, :, u, v]
            if padding:
                gxp = gxp[:, :, padding:padding + h, padding:padding + ww]
            _accum(x, gxp)

    parents = (x, w, b) if b is not None else (x, w)
    return _make(out, parents, backward)


# ---------------------------------------------------------------------------
# resampling

def avg_pool2(x):
    """2x average downsample over the spatial dims."""
    x = _as_tensor(x)
    bs, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError("avg_pool2 needs even spatial dims, got %s" % (x.shape,))
    out = x.data.reshape(bs, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(node):
        if x.requires_grad:
            g = node.grad * 0.25
            g = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3)
            _accum(x, g)

    return _make(out, (x,), backward)


def upsample_nearest2(x):
    """2x nearest-neighbour upsample over the spatial dims."""
    x = _as_tensor(x)
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def backward(node):
        if x.requires_grad:
            bs, c, h2, w2 = node.grad.shape
            g = node.grad.reshape(bs, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
            _accum(x, g)

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# normalization / activation

def group_norm(x, gamma, beta, groups=4, eps=1e-5):
    """Per-sample group normalization with per-channel affine params."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    bs, c, h, w = x.shape
    if c % groups:
        raise ShapeError("group_norm: %d channels not divisible by %d groups"
                         % (c, groups))
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError("group_norm affine params must be (%d,), got %s/%s"
                         % (c, gamma.shape, beta.shape))
    xg = x.data.reshape(bs, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(bs, c, h, w)
    out = xhat * gamma.data[:, None, None] + beta.data[:, None, None]

    def backward(node):
        g = node.grad
        if beta.requires_grad:
            _accum(beta, g.sum(axis=(0, 2, 3)))
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gx_hat = (g * gamma.data[:, None, None]).reshape(bs, groups, -1)
            xh = xhat.reshape(bs, groups, -1)
            m1 = gx_hat.mean(axis=2, keepdims=True)
            m2 = (gx_hat * xh).mean(axis=2, keepdims=True)
            gx = (gx_hat - m1 - xh * m2) * inv
            _accum(x, gx.reshape(bs, c, h, w))

    return _make(out, (x, gamma, beta), backward)


def silu(x):
    """SiLU activation x * sigmoid(x)."""
    x = _as_tensor(x)
    sig = 1.0 / (1.0 + np.exp(-x.data))
    out = x.data * sig

    def backward(node):
        if x.requires_grad:
            _accum(x, node.grad * (sig * (1.0 + x.data * (1.0 - sig))))

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# structural ops

def _reduce_to_shape(g, shape):
    # sum out broadcast axes so the gradient matches the original shape
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b):
    """Elementwise add with numpy broadcasting (e.g. (B,C,1,1) biases)."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError("add: shapes %s and %s do not broadcast"
                         % (a.shape, b.shape))

    def backward(node):
        if a.requires_grad:
            _accum(a, _reduce_to_shape(node.grad, a.shape))
        if b.requires_grad:
            _accum(b, _reduce_to_shape(node.grad, b.shape))

    return _make(out, (a, b), backward)


def concat(tensors, axis=1):
    """Concatenate tensors along an axis."""
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(node):
        offset = 0
        for t, n in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * node.grad.ndim
                idx[axis] = slice(offset, offset + n)
                _accum(t, node.grad[tuple(idx)])
            offset += n

    return _make(out, tensors, backward)


def narrow(x, axis, start, length):
    """Slice ``length`` entries from ``start`` along one axis."""
    x = _as_tensor(x)
    if start < 0 or start + length > x.shape[axis]:
        raise ShapeError("narrow [%d:%d) out of range for axis %d of %s"
                         % (start, start + length, axis, x.shape))
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = x.data[idx]

    def backward(node):
        if x.requires_grad:
            g = np.zeros_like(x.data)
            g[idx] = node.grad
            _accum(x, g)

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# reductions

def tsum(x):
    """Sum of all entries, as a scalar tensor."""
    x = _as_tensor(x)
    out = x.data.sum()

    def backward(node):
        if x.requires_grad:
            _accum(x, np.broadcast_to(node.grad, x.shape))

    return _make(np.float32(out), (x,), backward)


def mse(a, b):
    """Mean squared error between two same-shaped tensors, as a scalar."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError("mse: shapes differ, %s vs %s" % (a.shape, b.shape))
    diff = a.data - b.data
    n = diff.size
    out = np.float32((diff.astype(np.float64) ** 2).mean())

    def backward(node):
        scale = node.grad * (2.0 / n)
        if a.requires_grad:
            _accum(a, scale * diff)
        if b.requires_grad:
            _accum(b, -scale * diff)

    return _make(out, (a, b), backward)


# ---------------------------------------------------------------------------
# backward pass

def backprop(loss):
    """Run reverse-mode accumulation from a scalar loss.

    Returns a dict mapping every requires_grad leaf tensor to its
    gradient array. Gradients are also left on ``t.grad`` for every
    tensor that participated. The gradient of the loss w.r.t. itself
    is 1.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backprop expects a Tensor loss")
    if loss.data.size != 1:
        raise ContractError("backprop needs a scalar loss, got shape %s"
                            % (loss.shape,))

    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    for node in topo:
        node.grad = None
    loss.grad = np.ones_like(loss.data)

    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node)

    grads = {}
    for node in topo:
        if node.requires_grad and not node._parents:
            grads[node] = node.grad if node.grad is not None \
                else np.zeros_like(node.data)
    return grads

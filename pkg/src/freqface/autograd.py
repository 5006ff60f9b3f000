"""Small numpy-backed tensor engine with reverse-mode differentiation.

Graphs are built define-by-run: every operation that touches a tensor with
``requires_grad`` records a backward closure on its output. ``backward()`` on a
scalar walks the recorded graph once, in reverse topological order, and
accumulates gradients additively into every reachable ``requires_grad`` leaf.

Training runs in float32; gradient checking builds the same graphs in float64
(finite differences are unreliable at single precision). Everything is
single-threaded and deterministic: same inputs, same bits.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NumericError, UsageError


class Tensor:
    """N-dimensional array plus optional participation in the gradient tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Same data, cut off from the graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Populate ``grad`` on every requires_grad tensor reachable from self.

        Only scalar outputs can seed a backward pass. Gradients accumulate
        additively across multiple uses of the same tensor.
        """
        if self.data.ndim != 0:
            raise UsageError("backward() requires a scalar; got shape %r" % (self.shape,))
        order = self._topo_order()
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # Intermediate gradients are not kept around; only leaves
                # (parameters, inputs) retain .grad after the pass.
                if node._parents:
                    node.grad = None

    def _topo_order(self):
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        order.reverse()
        return order

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other, self.dtype))

    def __radd__(self, other):
        return add(_lift(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _lift(other, self.dtype))

    def __rsub__(self, other):
        return sub(_lift(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _lift(other, self.dtype))

    def __rmul__(self, other):
        return mul(_lift(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _lift(other, self.dtype))

    def __neg__(self):
        return neg(self)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)

    def abs(self):
        return absolute(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad=False, dtype=np.float32) -> Tensor:
    """Wrap array-like data as a leaf tensor."""
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


def _lift(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _node(data, parents, backward_fn) -> Tensor:
    """Create an op output; records the tape edge only when a parent needs it."""
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward_fn)
    return Tensor(data)


def _accum(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- branch tape ------------------------------------------------------------
#
# The piecewise ops (leaky_relu, abs, clamp) select a linear branch per
# element. Reverse mode differentiates exactly that selection, so a finite-
# difference probe is only comparable when every evaluation stays on the same
# branches. Recording the branch masks on one forward pass and replaying them
# on subsequent passes evaluates the selected (smooth) branch function, which
# is what the gradient-check harness differences.

class BranchTape:
    """Recorded branch masks, in op-call order."""

    __slots__ = ("mode", "masks", "pos")

    def __init__(self):
        self.mode = None  # None | "record" | "replay"
        self.masks: list[np.ndarray] = []
        self.pos = 0


_active_branch_tape: BranchTape | None = None


class _TapeScope:
    def __init__(self, tape: BranchTape, mode: str):
        self.tape, self.mode = tape, mode

    def __enter__(self):
        global _active_branch_tape
        if _active_branch_tape is not None:
            raise UsageError("branch tapes do not nest")
        self.tape.mode = self.mode
        if self.mode == "record":
            self.tape.masks.clear()
        self.tape.pos = 0
        _active_branch_tape = self.tape
        return self.tape

    def __exit__(self, *exc):
        global _active_branch_tape
        _active_branch_tape = None
        self.tape.mode = None
        return False


def recording_branches(tape: BranchTape) -> _TapeScope:
    return _TapeScope(tape, "record")


def replaying_branches(tape: BranchTape) -> _TapeScope:
    return _TapeScope(tape, "replay")


def _branch_mask(compute):
    tape = _active_branch_tape
    if tape is None:
        return compute()
    if tape.mode == "record":
        mask = compute()
        tape.masks.append(mask)
        return mask
    mask = tape.masks[tape.pos]
    tape.pos += 1
    return mask


# -- elementwise arithmetic ------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _node(out_data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _node(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _node(out_data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data / b.data

    def backward(g):
        _accum(a, _unbroadcast(g / b.data, a.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(out_data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, -g)

    return _node(-a.data, (a,), backward)


def absolute(a: Tensor) -> Tensor:
    sign = _branch_mask(lambda: np.sign(a.data))

    def backward(g):
        _accum(a, g * sign)

    return _node(a.data * sign, (a,), backward)


def log(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, g / a.data)

    return _node(np.log(a.data), (a,), backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient passes only inside the interval."""
    mask = _branch_mask(lambda: (a.data >= lo) & (a.data <= hi))
    out_data = np.where(mask, a.data, np.clip(a.data, lo, hi))

    def backward(g):
        _accum(a, g * mask)

    return _node(out_data, (a,), backward)


def leaky_relu(a: Tensor, alpha: float) -> Tensor:
    """x for x >= 0, alpha*x otherwise."""
    if not 0.0 < alpha < 1.0:
        raise UsageError(f"leaky_relu slope must be in (0,1), got {alpha}")
    positive = _branch_mask(lambda: a.data >= 0)
    out_data = np.where(positive, a.data, a.data * alpha)

    def backward(g):
        _accum(a, g * np.where(positive, 1.0, alpha).astype(g.dtype))

    return _node(out_data, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _node(out_data, (a,), backward)


# -- reductions and reshapes ------------------------------------------------

def tensor_sum(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, np.broadcast_to(g, a.shape).astype(a.dtype, copy=False))

    return _node(a.data.sum(), (a,), backward)


def tensor_mean(a: Tensor) -> Tensor:
    n = a.data.size

    def backward(g):
        _accum(a, np.broadcast_to(g / n, a.shape).astype(a.dtype, copy=False))

    return _node(a.data.mean(), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    parts = list(tensors)
    out_data = np.concatenate([t.data for t in parts], axis=axis)
    sizes = [t.shape[axis] for t in parts]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(parts, np.split(g, bounds, axis=axis)):
            _accum(t, piece)

    return _node(out_data, tuple(parts), backward)


# -- dense layers ------------------------------------------------------------

def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x[..., fin] @ weight[fout, fin].T (+ bias[fout])."""
    fin = x.shape[-1]
    if weight.ndim != 2 or weight.shape[1] != fin:
        raise DimensionError(f"linear: weight {weight.shape} does not accept input dim {fin}")
    out_data = x.data @ weight.data.T
    if bias is not None:
        out_data = out_data + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gf = g.reshape(-1, weight.shape[0])
        xf = x.data.reshape(-1, fin)
        _accum(x, (g @ weight.data).reshape(x.shape))
        _accum(weight, gf.T @ xf)
        if bias is not None:
            _accum(bias, gf.sum(axis=0))

    return _node(out_data, parents, backward)


# -- convolutions ------------------------------------------------------------

def _as_batched(x: Tensor):
    if x.ndim == 4:
        return x.data, True
    if x.ndim == 3:
        return x.data[None], False
    raise DimensionError(f"expected (C,H,W) or (N,C,H,W) input, got shape {x.shape}")


def _check_finite(arr: np.ndarray, op: str):
    if not np.isfinite(arr).all():
        raise NumericError(f"{op} produced non-finite values")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation over (N,)C,H,W input with zero padding.

    Output spatial size is (H + 2*padding - k) // stride + 1.
    """
    xd, batched = _as_batched(x)
    n, cin, h, w = xd.shape
    if weight.ndim != 4 or weight.shape[1] != cin:
        raise DimensionError(f"conv2d: weight {weight.shape} does not match input channels {cin}")
    cout, _, kh, kw = weight.shape
    if kh != kw or kh % 2 == 0:
        raise DimensionError(f"conv2d: kernel must be square and odd, got {kh}x{kw}")
    if padding < 0 or h + 2 * padding < kh or w + 2 * padding < kw:
        raise DimensionError(f"conv2d: input {h}x{w} too small for kernel {kh} with padding {padding}")
    k = kh

    pointwise = k == 1 and stride == 1 and padding == 0
    if pointwise:
        ho, wo = h, w
        col = xd.transpose(0, 2, 3, 1).reshape(n * h * w, cin)
    else:
        xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
        windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
        ho, wo = windows.shape[2], windows.shape[3]
        col = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, cin * k * k)

    wmat = weight.data.reshape(cout, -1)
    out_data = col @ wmat.T
    if bias is not None:
        out_data = out_data + bias.data
    out_data = out_data.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)
    _check_finite(out_data, "conv2d")
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gb = g if batched else g[None]
        gmat = gb.transpose(0, 2, 3, 1).reshape(-1, cout)
        _accum(weight, (gmat.T @ col).reshape(weight.shape))
        if bias is not None:
            _accum(bias, gmat.sum(axis=0))
        if x.requires_grad:
            dcol = gmat @ wmat
            if pointwise:
                dx = dcol.reshape(n, h, w, cin).transpose(0, 3, 1, 2)
            else:
                dcol = dcol.reshape(n, ho, wo, cin, k, k)
                dxp = np.zeros((n, cin, h + 2 * padding, w + 2 * padding), dtype=g.dtype)
                for ki in range(k):
                    for kj in range(k):
                        dxp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += \
                            dcol[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
                dx = dxp[:, :, padding:padding + h, padding:padding + w] if padding else dxp
            _accum(x, dx if batched else dx[0])

    return _node(out_data if batched else out_data[0], parents, backward)


def depthwise_conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
                     padding: int | None = None) -> Tensor:
    """Per-channel spatial convolution; weight is (C,1,k,k), stride fixed at 1."""
    xd, batched = _as_batched(x)
    n, c, h, w = xd.shape
    if weight.ndim != 4 or weight.shape[0] != c or weight.shape[1] != 1:
        raise DimensionError(f"depthwise_conv2d: weight {weight.shape} does not match {c} channels")
    k = weight.shape[2]
    if padding is None:
        padding = k // 2
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))
    ho, wo = windows.shape[2], windows.shape[3]
    out_data = np.einsum("nchwij,cij->nchw", windows, weight.data[:, 0], optimize=True)
    if bias is not None:
        out_data = out_data + bias.data[:, None, None]
    _check_finite(out_data, "depthwise_conv2d")
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gb = g if batched else g[None]
        dw = np.einsum("nchw,nchwij->cij", gb, windows, optimize=True)
        _accum(weight, dw[:, None])
        if bias is not None:
            _accum(bias, gb.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=g.dtype)
            wd = weight.data[:, 0]
            for ki in range(k):
                for kj in range(k):
                    dxp[:, :, ki:ki + ho, kj:kj + wo] += gb * wd[:, ki, kj][None, :, None, None]
            dx = dxp[:, :, padding:padding + h, padding:padding + w] if padding else dxp
            _accum(x, dx if batched else dx[0])

    return _node(out_data if batched else out_data[0], parents, backward)


def depthwise_separable_conv(x: Tensor, dw_weight: Tensor, pw_weight: Tensor) -> Tensor:
    """Depthwise k x k convolution followed by a 1x1 cross-channel mix."""
    return conv2d(depthwise_conv2d(x, dw_weight), pw_weight)


# -- spatial rearrangement ----------------------------------------------------

def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """(N,)C*r^2,H,W -> (N,)C,rH,rW channel-to-space rearrangement."""
    xd, batched = _as_batched(x)
    n, c_in, h, w = xd.shape
    if r < 1 or c_in % (r * r) != 0:
        raise DimensionError(f"pixel_shuffle: {c_in} channels not divisible by r^2={r * r}")
    c = c_in // (r * r)
    out_data = (xd.reshape(n, c, r, r, h, w)
                .transpose(0, 1, 4, 2, 5, 3)
                .reshape(n, c, h * r, w * r))

    def backward(g):
        gb = g if batched else g[None]
        dx = (gb.reshape(n, c, h, r, w, r)
              .transpose(0, 1, 3, 5, 2, 4)
              .reshape(n, c_in, h, w))
        _accum(x, dx if batched else dx[0])

    return _node(out_data if batched else out_data[0], (x,), backward)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Exact inverse of pixel_shuffle."""
    xd, batched = _as_batched(x)
    n, c, h, w = xd.shape
    if r < 1 or h % r != 0 or w % r != 0:
        raise DimensionError(f"pixel_unshuffle: spatial dims {h}x{w} not divisible by {r}")
    ho, wo = h // r, w // r
    out_data = (xd.reshape(n, c, ho, r, wo, r)
                .transpose(0, 1, 3, 5, 2, 4)
                .reshape(n, c * r * r, ho, wo))

    def backward(g):
        gb = g if batched else g[None]
        dx = (gb.reshape(n, c, r, r, ho, wo)
              .transpose(0, 1, 4, 2, 5, 3)
              .reshape(n, c, h, w))
        _accum(x, dx if batched else dx[0])

    return _node(out_data if batched else out_data[0], (x,), backward)


def upsample_nearest(x: Tensor, r: int) -> Tensor:
    """Integer-factor nearest-neighbour upsampling of the two trailing axes."""
    if r < 1:
        raise UsageError(f"upsample factor must be >= 1, got {r}")
    xd, batched = _as_batched(x)
    n, c, h, w = xd.shape
    out_data = np.repeat(np.repeat(xd, r, axis=2), r, axis=3)

    def backward(g):
        gb = g if batched else g[None]
        dx = gb.reshape(n, c, h, r, w, r).sum(axis=(3, 5))
        _accum(x, dx if batched else dx[0])

    return _node(out_data if batched else out_data[0], (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the two trailing spatial axes: (..., C, H, W) -> (..., C)."""
    if x.ndim < 3:
        raise DimensionError(f"global_avg_pool needs at least (C,H,W), got {x.shape}")
    h, w = x.shape[-2], x.shape[-1]
    out_data = x.data.mean(axis=(-2, -1))

    def backward(g):
        _accum(x, np.broadcast_to((g / (h * w))[..., None, None], x.shape).astype(g.dtype, copy=False))

    return _node(out_data, (x,), backward)


def squeeze_excite_gate(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor,
                        alpha: float = 0.2) -> Tensor:
    """Channel gating: pool -> bottleneck FC -> LeakyReLU -> FC -> sigmoid -> scale.

    Gates live in (0,1); with zero FC weights every gate is sigmoid(0)=0.5.
    """
    pooled = global_avg_pool(x)
    hidden = leaky_relu(linear(pooled, w1, b1), alpha)
    gate = sigmoid(linear(hidden, w2, b2))
    gate = reshape(gate, gate.shape + (1, 1))
    return mul(x, gate)


# -- parameter initialization -------------------------------------------------

def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """He/fan-in scaled normal init: std = sqrt(2/fan_in)."""
    return (rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)).astype(dtype)


def conv_weight(rng: np.random.Generator, cout: int, cin: int, k: int, dtype=np.float32) -> np.ndarray:
    return he_normal(rng, (cout, cin, k, k), fan_in=cin * k * k, dtype=dtype)


def dense_weight(rng: np.random.Generator, fout: int, fin: int, dtype=np.float32) -> np.ndarray:
    return he_normal(rng, (fout, fin), fan_in=fin, dtype=dtype)

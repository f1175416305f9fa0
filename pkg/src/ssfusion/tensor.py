"""Dense tensors and a small reverse-mode autodiff tape.

Values are numpy arrays laid out ``[batch, channels, height, width]``. Every
operation preserves the floating dtype of its inputs, so the same code path
runs in float32 for training and in float64 for finite-difference checks.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import expit

DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def tensor(data, dtype=DTYPE) -> np.ndarray:
    """Return ``data`` as a contiguous array of ``dtype`` (float32 by default)."""
    return np.ascontiguousarray(np.asarray(data, dtype=dtype))


class Node:
    """A value on the tape, with its gradient and the op that produced it."""

    __slots__ = ("value", "grad", "requires_grad", "op", "parents", "_backward", "name")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None,
                 dtype=None):
        arr = np.asarray(value)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DTYPE)
        self.value = arr
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self.parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    def backward(self):
        backward(self)

    def __repr__(self):
        label = self.name or self.op
        return f"Node({label}, shape={self.shape}, dtype={self.dtype})"

    # arithmetic sugar; shapes must match exactly or the other side is a scalar
    def __add__(self, other):
        return add(self, other) if isinstance(other, Node) else add_scalar(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Node):
            return sub(self, other)
        return add_scalar(self, -other)

    def __rsub__(self, other):
        return add_scalar(scale(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Node) else scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Node):
            return div(self, other)
        return scale(self, 1.0 / other)

    def __neg__(self):
        return scale(self, -1.0)


def constant(value, dtype=None) -> Node:
    return Node(value, requires_grad=False, dtype=dtype)


def parameter(value, name: Optional[str] = None, dtype=None) -> Node:
    return Node(value, requires_grad=True, name=name, dtype=dtype)


def _result(value: np.ndarray, op: str, parents: Sequence[Node],
            backward_fn: Callable[[np.ndarray], None]) -> Node:
    out = Node(value)
    out.op = op
    out.parents = tuple(parents)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out.grad = np.zeros_like(out.value)
        out._backward = backward_fn
    return out


def _accumulate(node: Node, g: np.ndarray):
    if node.requires_grad:
        node.grad += g.astype(node.grad.dtype, copy=False)


def _same_shape(a: Node, b: Node, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _tape(root: Node) -> list[Node]:
    """Topologically ordered list of grad-carrying nodes reachable from root."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node):
    """Propagate d(loss)/d(node) into ``grad`` of every requires-grad ancestor.

    Gradients accumulate across calls; use :func:`zero_grad` between steps.
    Intermediate (non-leaf) gradients are reset on each call.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = _tape(loss)
    for node in order:
        if node._backward is not None:
            node.grad = np.zeros_like(node.value)
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def zero_grad(params: Iterable[Node]):
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# elementwise

def add(a: Node, b: Node) -> Node:
    _same_shape(a, b, "add")

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.value + b.value, "add", (a, b), bw)


def sub(a: Node, b: Node) -> Node:
    _same_shape(a, b, "sub")

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.value - b.value, "sub", (a, b), bw)


def mul(a: Node, b: Node) -> Node:
    _same_shape(a, b, "mul")

    def bw(g):
        _accumulate(a, g * b.value)
        _accumulate(b, g * a.value)

    return _result(a.value * b.value, "mul", (a, b), bw)


def div(a: Node, b: Node) -> Node:
    _same_shape(a, b, "div")
    out = a.value / b.value

    def bw(g):
        _accumulate(a, g / b.value)
        _accumulate(b, -g * out / b.value)

    return _result(out, "div", (a, b), bw)


def scale(x: Node, k: float) -> Node:
    k = x.value.dtype.type(k)
    return _result(x.value * k, "scale", (x,), lambda g: _accumulate(x, g * k))


def add_scalar(x: Node, c: float) -> Node:
    c = x.value.dtype.type(c)
    return _result(x.value + c, "add_scalar", (x,), lambda g: _accumulate(x, g))


def square(x: Node) -> Node:
    return _result(x.value * x.value, "square", (x,),
                   lambda g: _accumulate(x, 2 * g * x.value))


def relu(x: Node) -> Node:
    mask = x.value > 0
    out = np.where(mask, x.value, x.value.dtype.type(0))
    return _result(out, "relu", (x,), lambda g: _accumulate(x, g * mask))


def sigmoid(x: Node) -> Node:
    out = expit(x.value)

    def bw(g):
        _accumulate(x, g * out * (1 - out))

    return _result(out, "sigmoid", (x,), bw)


# ---------------------------------------------------------------------------
# reductions and reshaping

def reduce_mean(x: Node) -> Node:
    n = x.value.size
    if n == 0:
        raise ShapeError("reduce_mean of an empty tensor")
    out = np.asarray(x.value.mean(dtype=np.float64), dtype=x.dtype)

    def bw(g):
        _accumulate(x, np.full_like(x.value, g / n))

    return _result(out, "mean", (x,), bw)


def reduce_sum(x: Node) -> Node:
    out = np.asarray(x.value.sum(dtype=np.float64), dtype=x.dtype)
    return _result(out, "sum", (x,), lambda g: _accumulate(x, np.full_like(x.value, g)))


def concat(nodes: Sequence[Node], axis: int = 1) -> Node:
    """Concatenate along ``axis`` (channels by default)."""
    sizes = [n.shape[axis] for n in nodes]
    out = np.concatenate([n.value for n in nodes], axis=axis)
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        for n, lo, hi in zip(nodes, bounds[:-1], bounds[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accumulate(n, g[tuple(sl)])

    return _result(out, "concat", nodes, bw)


def expand_channels(x: Node, c: int) -> Node:
    """Repeat a single-channel map ``[n,1,h,w]`` across ``c`` channels."""
    if x.shape[1] != 1:
        raise ShapeError(f"expand_channels needs 1 channel, got {x.shape[1]}")
    out = np.repeat(x.value, c, axis=1)
    return _result(out, "expand", (x,), lambda g: _accumulate(x, g.sum(axis=1, keepdims=True)))


def global_avg_pool(x: Node) -> Node:
    """``[n,c,h,w] -> [n,c]``."""
    n, c, h, w = x.shape
    out = x.value.mean(axis=(2, 3))

    def bw(g):
        _accumulate(x, np.broadcast_to(g[:, :, None, None] / (h * w), x.shape))

    return _result(out, "gap", (x,), bw)


def linear(x: Node, weight: Node, bias: Node) -> Node:
    """``[n,k] @ [m,k].T + [m] -> [n,m]``."""
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input features {x.shape[1]} vs weight {weight.shape}")
    out = x.value @ weight.value.T + bias.value

    def bw(g):
        _accumulate(x, g @ weight.value)
        _accumulate(weight, g.T @ x.value)
        _accumulate(bias, g.sum(axis=0))

    return _result(out, "linear", (x, weight, bias), bw)


def reshape(x: Node, shape) -> Node:
    return _result(x.value.reshape(shape), "reshape", (x,),
                   lambda g: _accumulate(x, g.reshape(x.shape)))


def upsample_nearest(x: Node, size: tuple[int, int]) -> Node:
    """Nearest-neighbour resize of ``[n,c,h,w]`` to ``size`` (integer factor-2 style)."""
    h, w = x.shape[2:]
    ho, wo = size
    ri = np.minimum(np.arange(ho) * h // ho, h - 1)
    ci = np.minimum(np.arange(wo) * w // wo, w - 1)
    out = x.value[:, :, ri][:, :, :, ci]

    def bw(g):
        gr = np.zeros(g.shape[:2] + (h, wo), dtype=g.dtype)
        np.add.at(gr, (slice(None), slice(None), ri), g)
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, (slice(None), slice(None), slice(None), ci), gr)
        _accumulate(x, gx)

    return _result(out, "upsample", (x,), bw)


# ---------------------------------------------------------------------------
# convolution

def _conv_out(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for ky in range(kh):
        for kx in range(kw):
            cols[:, :, ky, kx] = xp[:, :, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride]
    return cols


def conv2d(x: Node, kernel: Node, bias: Optional[Node] = None, stride: int = 1,
           padding: int = 1) -> Node:
    """Cross-correlation of ``[n,cin,h,w]`` with ``[cout,cin,kh,kw]``, zero padding.

    The default (3x3, stride 1, padding 1) keeps the spatial size.
    """
    n, cin, h, w = x.shape
    cout, kcin, kh, kw = kernel.shape
    if cin != kcin:
        raise ShapeError(f"conv2d: input has {cin} channels, kernel expects {kcin}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias shape {bias.shape}, expected ({cout},)")
    ho, wo = _conv_out(h, kh, stride, padding), _conv_out(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: input {h}x{w} too small")
    p = padding
    xp = np.pad(x.value, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.value
    cols = _im2col(xp, kh, kw, stride, ho, wo).reshape(n, cin * kh * kw, ho * wo)
    wmat = kernel.value.reshape(cout, -1)
    out = np.matmul(wmat, cols).reshape(n, cout, ho, wo)
    if bias is not None:
        out += bias.value[None, :, None, None]

    def bw(g):
        g2 = g.reshape(n, cout, ho * wo)
        if kernel.requires_grad:
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            _accumulate(kernel, gw.reshape(kernel.shape))
        if bias is not None:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcols = np.matmul(wmat.T, g2).reshape(n, cin, kh, kw, ho, wo)
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for ky in range(kh):
                for kx in range(kw):
                    gxp[:, :, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride] += gcols[:, :, ky, kx]
            _accumulate(x, gxp[:, :, p:p + h, p:p + w])

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return _result(out, "conv2d", parents, bw)


# ---------------------------------------------------------------------------
# separable window filtering with half-sample symmetric padding

def reflect_index(n: int, r: int) -> np.ndarray:
    """Source indices for padding length ``n`` by ``r`` on both sides (``dcba|abcd|dcba``)."""
    i = np.arange(-r, n + r) % (2 * n)
    return np.where(i >= n, 2 * n - 1 - i, i)


def _filter_axis(a: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    n = a.shape[axis]
    src = np.take(a, reflect_index(n, r), axis=axis)
    out = np.zeros_like(a)
    for k, t in enumerate(taps):
        out += t * np.take(src, np.arange(k, k + n), axis=axis)
    return out


def _filter_axis_adjoint(g: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    n = g.shape[axis]
    g = np.moveaxis(g, axis, -1)
    gp = np.zeros(g.shape[:-1] + (n + 2 * r,), dtype=g.dtype)
    for k, t in enumerate(taps):
        gp[..., k:k + n] += t * g
    idx = reflect_index(n, r)
    gx = gp[..., r:r + n].copy()
    for j in list(range(r)) + list(range(r + n, n + 2 * r)):
        gx[..., idx[j]] += gp[..., j]
    return np.moveaxis(gx, -1, axis)


def separable_filter(x: Node, taps: np.ndarray) -> Node:
    """Apply the same odd-length 1-D window along height then width.

    Borders use half-sample symmetric reflection, so constant images stay
    constant for any normalized window.
    """
    taps = np.asarray(taps, dtype=x.dtype)
    if taps.ndim != 1 or len(taps) % 2 != 1:
        raise ShapeError("separable_filter needs an odd-length 1-D window")
    out = _filter_axis(_filter_axis(x.value, taps, 2), taps, 3)

    def bw(g):
        _accumulate(x, _filter_axis_adjoint(_filter_axis_adjoint(g, taps, 3), taps, 2))

    return _result(out, "sep_filter", (x,), bw)


# ---------------------------------------------------------------------------
# affine grid sampling

def affine_grid_sample(x: Node, theta: Node) -> Node:
    """Bilinearly resample ``x`` at affinely transformed normalized coordinates.

    ``theta`` is ``[n,2,3]`` acting on ``(x, y, 1)`` with ``-1``/``+1`` at the
    centres of the first/last pixel (align-corners). Samples falling outside
    the image read as zero.
    """
    n, c, h, w = x.shape
    if theta.shape != (n, 2, 3):
        raise ShapeError(f"affine_grid_sample: theta shape {theta.shape}, expected ({n}, 2, 3)")
    dt = x.dtype
    t = theta.value.astype(dt, copy=False)
    jj = np.arange(w, dtype=dt)[None, :]
    ii = np.arange(h, dtype=dt)[:, None]
    # pixel-space form of the normalized transform; exact for the identity
    sx = dt.type(w - 1) / 2 if w > 1 else dt.type(0)
    sy = dt.type(h - 1) / 2 if h > 1 else dt.type(0)
    ryx = dt.type((w - 1) / (h - 1)) if h > 1 else dt.type(0)
    rxy = dt.type((h - 1) / (w - 1)) if w > 1 else dt.type(0)
    xn = (jj / sx - 1) if w > 1 else np.zeros_like(jj)
    yn = (ii / sy - 1) if h > 1 else np.zeros_like(ii)

    px = np.empty((n, h, w), dtype=dt)
    py = np.empty((n, h, w), dtype=dt)
    for b in range(n):
        (a00, a01, a02), (a10, a11, a12) = t[b]
        px[b] = a00 * jj + a01 * ryx * ii + sx * (a02 + 1 - a00 - a01)
        py[b] = a10 * rxy * jj + a11 * ii + sy * (a12 + 1 - a10 - a11)

    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = px - x0
    fy = py - y0
    corners = []
    for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
        xi, yi = x0 + dx, y0 + dy
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        flat = np.where(valid, yi * w + xi, 0)
        wx = fx if dx else 1 - fx
        wy = fy if dy else 1 - fy
        corners.append((flat, valid, wx, wy, dx, dy))

    xflat = x.value.reshape(n, c, h * w)
    out = np.zeros((n, c, h, w), dtype=dt)
    vals = []
    for flat, valid, wx, wy, _, _ in corners:
        v = np.stack([xflat[b][:, flat[b]] * valid[b] for b in range(n)])
        vals.append(v)
        out += v * (wx * wy)[:, None]

    def bw(g):
        if x.requires_grad:
            gx = np.zeros((n, c, h * w), dtype=g.dtype)
            for (flat, valid, wx, wy, _, _) in corners:
                contrib = g * ((wx * wy) * valid)[:, None]
                for b in range(n):
                    for ch in range(c):
                        gx[b, ch] += np.bincount(flat[b].ravel(), contrib[b, ch].ravel(),
                                                 minlength=h * w).astype(g.dtype)
            _accumulate(x, gx.reshape(x.shape))
        if theta.requires_grad:
            dpx = np.zeros((n, c, h, w), dtype=g.dtype)
            dpy = np.zeros((n, c, h, w), dtype=g.dtype)
            for v, (flat, valid, wx, wy, dx, dy) in zip(vals, corners):
                sgx = 1 if dx else -1
                sgy = 1 if dy else -1
                dpx += v * (sgx * wy)[:, None]
                dpy += v * (sgy * wx)[:, None]
            gpx = (g * dpx).sum(axis=1)
            gpy = (g * dpy).sum(axis=1)
            # d px / d theta_row0 = sx * (xn, yn, 1); likewise for py with sy
            gt = np.zeros((n, 2, 3), dtype=g.dtype)
            for b in range(n):
                gt[b, 0] = sx * np.array([(gpx[b] * xn).sum(), (gpx[b] * yn).sum(), gpx[b].sum()])
                gt[b, 1] = sy * np.array([(gpy[b] * xn).sum(), (gpy[b] * yn).sum(), gpy[b].sum()])
            _accumulate(theta, gt)

    return _result(out, "grid_sample", (x, theta), bw)

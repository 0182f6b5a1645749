# -*- coding: utf-8 -*-
"""
Dense 4-D tensors over numpy arrays, a reverse-mode gradient tape, and the
primitive differentiable operations used by every network block.

All feature maps are laid out row-major as (n, c, h, w). Operations record
themselves on the innermost active GradTape when any input is tracked;
outside a tape they run as plain array functions.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     14.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import collections
import logging
import struct
import threading
import zlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

logger = logging.getLogger(__name__)


"""Magic bytes opening a raw tensor payload."""
TENSOR_MAGIC = b"CFDT"

"""Raw tensor header: magic plus 4 little-endian u32 dimensions."""
TENSOR_HEADER = struct.Struct("<4s4I")

"""Activation kinds accepted by activation()."""
ACTIVATIONS = ("sigmoid", "tanh", "gelu", "relu")


class DimensionError(ValueError):
    """Raised when tensor shapes or channel counts violate an operation contract."""


class FormatError(ValueError):
    """Raised on malformed binary payloads, message names the byte offset."""



class Tensor(object):
    """
    Dense 4-D array with optional gradient tracking.

    Leaf tensors with requires_grad receive gradients into .grad when a tape
    is replayed; gradients accumulate additively until zero_grad().
    """

    def __init__(self, data, requires_grad=False, dtype=None):
        """
        @param   data           array-like of exactly 4 dimensions
        @param   requires_grad  whether to accumulate gradients into this tensor
        @param   dtype          numpy float dtype, defaults to data's float dtype or float64
        """
        if isinstance(data, Tensor): data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) \
                    and np.issubdtype(data.dtype, np.floating) else np.float64
        arr = np.asarray(data, dtype=dtype)
        if arr.ndim != 4:
            raise DimensionError("tensor must have 4 dimensions (n, c, h, w), got shape %s"
                                 % (arr.shape, ))
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = None
        self._tracked = self.requires_grad


    @classmethod
    def vector(cls, values, requires_grad=False, dtype=None):
        """Returns a (1, c, 1, 1) tensor from a flat sequence of c values."""
        arr = np.asarray(values, dtype=dtype or np.float64).reshape(1, -1, 1, 1)
        return cls(arr, requires_grad=requires_grad)


    @classmethod
    def zeros(cls, shape, dtype=np.float64):
        return cls(np.zeros(shape, dtype=dtype))


    @property
    def shape(self):
        return self.data.shape


    @property
    def dtype(self):
        return self.data.dtype


    @property
    def size(self):
        return self.data.size


    def item(self):
        """Returns the single value of a one-element tensor as float."""
        if self.data.size != 1:
            raise DimensionError("item() needs a one-element tensor, got shape %s" % (self.shape, ))
        return float(self.data.reshape(-1)[0])


    def astype(self, dtype):
        """Returns an untracked copy in given dtype, keeping requires_grad and name."""
        result = Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)
        result.name = self.name
        return result


    def zero_grad(self):
        self.grad = None


    def __repr__(self):
        return "Tensor(shape=%s, dtype=%s%s%s)" % (
            self.shape, self.dtype, ", requires_grad=True" if self.requires_grad else "",
            ", name=%r" % self.name if self.name else "")

    def __add__(self, other):  return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other):  return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other):  return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self):         return mul(self, -1.0)



class GradTape(object):
    """
    Ordered record of executed primitive operations, replayed in reverse to
    accumulate gradients. Used as a context manager; tapes nest per thread.
    """
    _local = threading.local()


    def __init__(self):
        self.entries = []  # [(output Tensor, (input Tensor, ..), backward function)]


    def __enter__(self):
        self._stack().append(self)
        return self


    def __exit__(self, exc_type, exc_value, traceback):
        self._stack().remove(self)


    def __len__(self):
        return len(self.entries)


    @classmethod
    def _stack(cls):
        if not hasattr(cls._local, "stack"): cls._local.stack = []
        return cls._local.stack


    @classmethod
    def current(cls):
        """Returns the innermost active tape in this thread, or None."""
        stack = cls._stack()
        return stack[-1] if stack else None


    def record(self, output, inputs, backward):
        """
        Appends an executed operation.

        @param   output    Tensor produced
        @param   inputs    sequence of input Tensors
        @param   backward  function(output gradient array) returning a gradient
                           array or None for each input
        """
        self.entries.append((output, tuple(inputs), backward))


    def reset(self):
        """Forgets all recorded operations."""
        del self.entries[:]


    def backward(self, output, grad=None):
        """
        Replays the tape in reverse from output, accumulating gradients into
        every requires_grad leaf reachable from it.

        @param   output  Tensor to differentiate, typically a one-element loss
        @param   grad    gradient array of output, defaults to ones
        """
        seed = np.ones_like(output.data) if grad is None else np.asarray(grad, dtype=output.dtype)
        if seed.shape != output.shape:
            raise DimensionError("seed gradient shape %s differs from output shape %s"
                                 % (seed.shape, output.shape))
        grads, tensors = {id(output): seed}, {id(output): output}
        for out, inputs, backward in reversed(self.entries):
            g = grads.pop(id(out), None)
            if g is None: continue  # for out
            for t, gi in zip(inputs, backward(g)):
                if gi is None or not t._tracked: continue  # for t
                key = id(t)
                grads[key] = grads[key] + gi if key in grads else gi
                tensors[key] = t
        for key, g in grads.items():
            t = tensors[key]
            if not t.requires_grad: continue  # for key
            g = g.astype(t.dtype, copy=False)
            t.grad = g.copy() if t.grad is None else t.grad + g



def apply_op(data, inputs, backward):
    """
    Wraps an operation result as Tensor, recording it on the active tape if
    any input is tracked.

    @param   data      result array
    @param   inputs    input Tensors
    @param   backward  function(output gradient) returning per-input gradients
    """
    out = Tensor(data, dtype=data.dtype)
    tape = GradTape.current()
    if tape is not None and any(t._tracked for t in inputs):
        out._tracked = True
        tape.record(out, inputs, backward)
    return out


def _unbroadcast(grad, shape):
    """Sums grad down to shape, undoing numpy broadcasting."""
    if grad.shape == shape: return grad
    axes = tuple(i for i, (a, b) in enumerate(zip(grad.shape, shape)) if b == 1 and a != 1)
    return grad.sum(axis=axes, keepdims=True)


def _operands(a, b):
    """Returns (Tensors, arrays) for a binary op, wrapping plain numbers as constants."""
    ta = a if isinstance(a, Tensor) else None
    tb = b if isinstance(b, Tensor) else None
    xa = a.data if ta is not None else np.asarray(a, dtype=b.dtype)
    xb = b.data if tb is not None else np.asarray(b, dtype=a.dtype)
    return ta, tb, xa, xb


def _binary(a, b, data, grad_a, grad_b):
    ta, tb, xa, xb = _operands(a, b)
    inputs = [t for t in (ta, tb) if t is not None]
    def backward(g):
        result = []
        if ta is not None: result.append(_unbroadcast(grad_a(g, xa, xb), xa.shape))
        if tb is not None: result.append(_unbroadcast(grad_b(g, xa, xb), xb.shape))
        return result
    return apply_op(data(xa, xb), inputs, backward)


def add(a, b):
    """Elementwise a + b with broadcasting; either side may be a plain number."""
    return _binary(a, b, np.add, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    """Elementwise a - b with broadcasting."""
    return _binary(a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    """Elementwise a * b with broadcasting."""
    return _binary(a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x)


def sqrt(x):
    out = np.sqrt(x.data)
    return apply_op(out, [x], lambda g: [g * 0.5 / out])


def total(x):
    """Sum of all elements, as a (1, 1, 1, 1) tensor."""
    shape = x.shape
    out = x.data.sum().reshape(1, 1, 1, 1)
    return apply_op(out, [x], lambda g: [np.broadcast_to(g.reshape(()), shape).copy()])


def mean(x):
    """Mean of all elements, as a (1, 1, 1, 1) tensor."""
    shape, count = x.shape, max(x.size, 1)
    out = (x.data.sum() / count).reshape(1, 1, 1, 1)
    return apply_op(out, [x], lambda g: [np.full(shape, g.reshape(()) / count, dtype=g.dtype)])


def where(mask, a, b):
    """
    Elementwise selection: a where mask is true, else b. Gradient flows only
    to the selected input.
    """
    mask = np.asarray(mask, dtype=bool)
    if a.shape != b.shape or mask.shape != a.shape:
        raise DimensionError("where() needs equal shapes, got mask %s, %s and %s"
                             % (mask.shape, a.shape, b.shape))
    out = np.where(mask, a.data, b.data)
    return apply_op(out, [a, b], lambda g: [np.where(mask, g, 0), np.where(mask, 0, g)])


def activation(x, kind):
    """
    Applies an elementwise nonlinearity.

    @param   kind  one of "sigmoid", "tanh", "gelu" (exact x * Phi(x)), "relu"
    """
    d = x.data
    if "sigmoid" == kind:
        out = special.expit(d)
        backward = lambda g: [g * out * (1 - out)]
    elif "tanh" == kind:
        out = np.tanh(d)
        backward = lambda g: [g * (1 - out * out)]
    elif "gelu" == kind:
        cdf = special.ndtr(d)
        out = d * cdf
        backward = lambda g: [g * (cdf + d * np.exp(-0.5 * d * d) / np.sqrt(2 * np.pi))]
    elif "relu" == kind:
        out = np.maximum(d, 0)
        backward = lambda g: [g * (d > 0)]
    else:
        raise ValueError("unknown activation %r, expected one of %s" % (kind, ", ".join(ACTIVATIONS)))
    return apply_op(out, [x], backward)


def _check_kernel(input, weight, padding):
    """Validates convolution arguments, returns (k, output height, output width)."""
    n, c, h, w = input.shape
    c_out, c_in, kh, kw = weight.shape
    if kh != kw:
        raise DimensionError("kernel must be square, got %sx%s" % (kh, kw))
    if not kh % 2:
        raise DimensionError("even kernel size %s rejected, kernel size must be odd" % kh)
    if padding < 0:
        raise DimensionError("padding must be non-negative, got %s" % padding)
    oh, ow = h + 2 * padding - kh + 1, w + 2 * padding - kw + 1
    if oh < 1 or ow < 1:
        raise DimensionError("kernel %sx%s with padding %s does not fit input %sx%s"
                             % (kh, kw, padding, h, w))
    return kh, oh, ow


def _bias_array(bias, count):
    if bias is None: return None
    if bias.size != count:
        raise DimensionError("bias has %s values, expected %s" % (bias.size, count))
    return bias.data.reshape(1, count, 1, 1)


def _pad(x, p):
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x


def conv2d(input, weight, bias=None, padding=0):
    """
    2-D cross-correlation with stride 1.

    @param   input    Tensor (n, c_in, h, w)
    @param   weight   Tensor (c_out, c_in, k, k), k odd
    @param   bias     optional Tensor of c_out values
    @param   padding  zero padding on each side, (k - 1) / 2 keeps spatial size
    @return           Tensor (n, c_out, h + 2p - k + 1, w + 2p - k + 1)
    """
    if input.shape[1] != weight.shape[1]:
        raise DimensionError("conv2d input has %s channels, weight %s expects %s"
                             % (input.shape[1], weight.shape, weight.shape[1]))
    k, oh, ow = _check_kernel(input, weight, padding)
    x, w, b = input.data, weight.data, _bias_array(bias, weight.shape[0])
    h, wd = x.shape[2:]
    xp = _pad(x, padding)
    cols = sliding_window_view(xp, (k, k), axis=(2, 3))  # (n, c_in, oh, ow, k, k)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    if b is not None: out += b

    def backward(g):
        gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                part = np.tensordot(w[:, :, i, j], g, axes=([0], [1]))
                gxp[:, :, i:i + oh, j:j + ow] += part.transpose(1, 0, 2, 3)
        gx = gxp[:, :, padding:padding + h, padding:padding + wd] if padding else gxp
        result = [gx, gw]
        if bias is not None: result.append(g.sum(axis=(0, 2, 3)).reshape(bias.shape))
        return result
    inputs = [input, weight] + ([bias] if bias is not None else [])
    return apply_op(out, inputs, backward)


def conv1x1(input, weight, bias=None):
    """Pointwise convolution, weight (c_out, c_in, 1, 1)."""
    if weight.shape[2:] != (1, 1):
        raise DimensionError("conv1x1 needs a 1x1 kernel, got weight %s" % (weight.shape, ))
    return conv2d(input, weight, bias, padding=0)


def depthwise_conv2d(input, weight, bias=None, padding=0):
    """
    Depth-wise convolution: output channel i depends only on input channel i.

    @param   weight  Tensor (c, 1, k, k), one kernel per channel
    """
    c = input.shape[1]
    if weight.shape[0] != c or weight.shape[1] != 1:
        raise DimensionError("depthwise weight %s does not match %s input channels"
                             % (weight.shape, c))
    k, oh, ow = _check_kernel(input, weight, padding)
    x, w, b = input.data, weight.data, _bias_array(bias, c)
    h, wd = x.shape[2:]
    xp = _pad(x, padding)
    out = np.zeros((x.shape[0], c, oh, ow), dtype=np.result_type(x, w))
    for i in range(k):
        for j in range(k):
            out += xp[:, :, i:i + oh, j:j + ow] * w[:, 0, i, j].reshape(1, c, 1, 1)
    if b is not None: out += b

    def backward(g):
        gw = np.zeros_like(w)
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gw[:, 0, i, j] = (g * xp[:, :, i:i + oh, j:j + ow]).sum(axis=(0, 2, 3))
                gxp[:, :, i:i + oh, j:j + ow] += g * w[:, 0, i, j].reshape(1, c, 1, 1)
        gx = gxp[:, :, padding:padding + h, padding:padding + wd] if padding else gxp
        result = [gx, gw]
        if bias is not None: result.append(g.sum(axis=(0, 2, 3)).reshape(bias.shape))
        return result
    inputs = [input, weight] + ([bias] if bias is not None else [])
    return apply_op(out, inputs, backward)


def layer_norm(input, gamma, beta, eps):
    """
    Normalizes each batch sample over all of (c, h, w), then applies a
    per-channel affine transform.

    @param   gamma  Tensor of c scale values
    @param   beta   Tensor of c offset values
    @param   eps    variance offset, must be positive
    """
    if not eps > 0:
        raise ValueError("layer_norm eps must be positive, got %r" % (eps, ))
    c = input.shape[1]
    if gamma.size != c or beta.size != c:
        raise DimensionError("layer_norm affine sizes %s/%s do not match %s channels"
                             % (gamma.size, beta.size, c))
    axes = (1, 2, 3)
    x = input.data
    xc = x - x.mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=axes, keepdims=True) + eps)
    xhat = xc * inv
    ga = gamma.data.reshape(1, c, 1, 1)
    out = xhat * ga + beta.data.reshape(1, c, 1, 1)

    def backward(g):
        gxhat = g * ga
        gx = inv * (gxhat - gxhat.mean(axis=axes, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=axes, keepdims=True))
        ggamma = (g * xhat).sum(axis=(0, 2, 3)).reshape(gamma.shape)
        gbeta = g.sum(axis=(0, 2, 3)).reshape(beta.shape)
        return [gx, ggamma, gbeta]
    return apply_op(out, [input, gamma, beta], backward)


def _shuffle(x, r):
    n, c, h, w = x.shape
    if c % (r * r):
        raise DimensionError("pixel_shuffle needs channels divisible by %s, got %s" % (r * r, c))
    c2 = c // (r * r)
    return x.reshape(n, c2, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c2, h * r, w * r)


def _unshuffle(x, r):
    n, c, h, w = x.shape
    if h % r or w % r:
        raise DimensionError("pixel_unshuffle needs size divisible by %s, got %sx%s" % (r, h, w))
    return x.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4) \
            .reshape(n, c * r * r, h // r, w // r)


def pixel_shuffle(input, r):
    """Rearranges (n, c*r*r, h, w) into (n, c, h*r, w*r)."""
    out = np.ascontiguousarray(_shuffle(input.data, r))
    return apply_op(out, [input], lambda g: [_unshuffle(g, r)])


def pixel_unshuffle(input, r):
    """Inverse of pixel_shuffle: (n, c, h*r, w*r) into (n, c*r*r, h, w)."""
    out = np.ascontiguousarray(_unshuffle(input.data, r))
    return apply_op(out, [input], lambda g: [_shuffle(g, r)])


def concat_channels(tensors):
    """Concatenates tensors of equal (n, h, w) along channels."""
    tensors = list(tensors)
    if not tensors: raise DimensionError("concat_channels needs at least one tensor")
    base = tensors[0].shape
    for t in tensors[1:]:
        if (t.shape[0], ) + t.shape[2:] != (base[0], ) + base[2:]:
            raise DimensionError("concat_channels shape mismatch: %s vs %s" % (base, t.shape))
    counts = [t.shape[1] for t in tensors]
    bounds = np.cumsum([0] + counts)
    out = np.concatenate([t.data for t in tensors], axis=1)
    return apply_op(out, tensors, lambda g: [g[:, a:b] for a, b in zip(bounds[:-1], bounds[1:])])


def split_channels(input, counts):
    """Splits tensor channels into consecutive groups of given counts."""
    counts = list(counts)
    if sum(counts) != input.shape[1] or any(c < 0 for c in counts):
        raise DimensionError("split counts %s do not sum to %s channels" % (counts, input.shape[1]))
    result, start = [], 0
    for count in counts:
        a, b = start, start + count
        def backward(g, a=a, b=b):
            full = np.zeros_like(input.data)
            full[:, a:b] = g
            return [full]
        result.append(apply_op(input.data[:, a:b].copy(), [input], backward))
        start = b
    return result


def bilinear_sample(input, coords):
    """
    Samples input at real-valued pixel coordinates with bilinear weights,
    clamping coordinates to the image border. Differentiable with respect to
    input only; coordinates are constants.

    @param   input   Tensor (n, c, h, w)
    @param   coords  array or Tensor (n or 1, 2, H, W): channel 0 is x (column),
                     channel 1 is y (row)
    @return          Tensor (n, c, H, W)
    """
    grid = coords.data if isinstance(coords, Tensor) else np.asarray(coords)
    grid = grid.astype(input.dtype, copy=False)
    n, c, h, w = input.shape
    if grid.ndim != 4 or grid.shape[1] != 2 or grid.shape[0] not in (1, n):
        raise DimensionError("coords must have shape (%s, 2, H, W), got %s" % (n, grid.shape))
    grid = np.broadcast_to(grid, (n, ) + grid.shape[1:])
    x = np.clip(grid[:, 0], 0, w - 1)
    y = np.clip(grid[:, 1], 0, h - 1)
    x0, y0 = np.floor(x).astype(np.intp), np.floor(y).astype(np.intp)
    x1, y1 = np.minimum(x0 + 1, w - 1), np.minimum(y0 + 1, h - 1)
    wx, wy = (x - x0)[..., None], (y - y0)[..., None]
    b = np.arange(n).reshape(n, 1, 1)
    src = input.data.transpose(0, 2, 3, 1)  # channels last for gathering
    top = src[b, y0, x0] * (1 - wx) + src[b, y0, x1] * wx
    bottom = src[b, y1, x0] * (1 - wx) + src[b, y1, x1] * wx
    out = np.ascontiguousarray((top * (1 - wy) + bottom * wy).transpose(0, 3, 1, 2))

    def backward(g):
        gt = g.transpose(0, 2, 3, 1)
        gsrc = np.zeros_like(src)
        for yy, xx, weight in ((y0, x0, (1 - wx) * (1 - wy)), (y0, x1, wx * (1 - wy)),
                               (y1, x0, (1 - wx) * wy), (y1, x1, wx * wy)):
            np.add.at(gsrc, (b, yy, xx), gt * weight)
        return [gsrc.transpose(0, 3, 1, 2)]
    return apply_op(out, [input], backward)


def pixel_grid(h, w, dtype=np.float64):
    """Returns identity sampling coordinates (1, 2, h, w)."""
    yy, xx = np.meshgrid(np.arange(h, dtype=dtype), np.arange(w, dtype=dtype), indexing="ij")
    return np.stack([xx, yy])[None]


def resize_bilinear(input, out_h, out_w):
    """
    Bilinear resize with half-pixel centers and edge clamping, as used for
    the image-space skip connection of the reconstruction head.
    """
    n, c, h, w = input.shape
    ys = (np.arange(out_h) + 0.5) * (float(h) / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (float(w) / out_w) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(input, np.stack([xx, yy])[None])


def make_rng(seed, key=""):
    """
    Returns a numpy Generator derived from a root seed and a consumer key,
    as SeedSequence([seed, crc32(key)]). Independent of call order.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(key.encode("utf-8"))]))


def init_uniform(shape, fan_in, rng, dtype=np.float64):
    """Fan-in scaled uniform initialization, bound sqrt(1 / fan_in)."""
    bound = np.sqrt(1.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def encode_tensor(tensor):
    """Returns raw bytes: "CFDT", 4 x u32 shape, then little-endian float64 values."""
    data = np.ascontiguousarray(tensor.data, dtype="<f8")
    return TENSOR_HEADER.pack(TENSOR_MAGIC, *data.shape) + data.tobytes()


def decode_tensor(buffer, offset=0):
    """
    Parses a raw tensor from bytes at offset.

    @return  (Tensor, offset after the payload)
    """
    if len(buffer) - offset < TENSOR_HEADER.size:
        raise FormatError("truncated tensor header at offset %s" % offset)
    magic, n, c, h, w = TENSOR_HEADER.unpack_from(buffer, offset)
    if magic != TENSOR_MAGIC:
        raise FormatError("bad tensor magic at offset %s" % offset)
    start = offset + TENSOR_HEADER.size
    end = start + 8 * n * c * h * w
    if len(buffer) < end:
        raise FormatError("truncated tensor payload at offset %s" % start)
    data = np.frombuffer(buffer, dtype="<f8", count=n * c * h * w, offset=start)
    return Tensor(data.astype(np.float64).reshape(n, c, h, w)), end


def write_tensor(path, tensor):
    with open(path, "wb") as f: f.write(encode_tensor(tensor))


def read_tensor(path):
    with open(path, "rb") as f: buffer = f.read()
    tensor, end = decode_tensor(buffer)
    if end != len(buffer):
        raise FormatError("trailing bytes after tensor payload at offset %s" % end)
    return tensor


"""Outcome of compare_gradients: norm-wise relative error, largest per-entry
relative error, and analytic and numeric gradients per differentiated input,
NaN at entries not checked."""
GradientComparison = collections.namedtuple("GradientComparison",
                                            "error max_entry_error analytic numeric")


def compare_gradients(func, inputs, step=1e-4, seed=0, elements=None):
    """
    Compares tape gradients against central finite differences.

    The scalar checked is a random projection sum(out * R) of func's output.
    Norm-wise error is |analytic - numeric| / max(|analytic|, |numeric|) over
    all checked entries; per-entry error divides by the larger magnitude of
    each pair, floored at 1e-3 of the largest gradient entry.

    @param   func      function(*inputs) returning a Tensor or a list of Tensors
    @param   inputs    Tensors; those with requires_grad are differentiated
    @param   step      finite-difference step
    @param   seed      seed for the projection and for element sampling
    @param   elements  if set, number of randomly chosen scalar entries to check
                       instead of every entry
    @return            GradientComparison
    """
    rng = make_rng(seed, "gradcheck")
    wrt = [t for t in inputs if t.requires_grad]
    for t in wrt:
        t.data = np.ascontiguousarray(t.data)  # perturbed in place through a flat view
        t.zero_grad()

    def outputs():
        out = func(*inputs)
        return out if isinstance(out, (list, tuple)) else [out]

    with GradTape() as tape:
        outs = outputs()
        weights = [rng.uniform(-1, 1, size=o.shape) for o in outs]
        loss = None
        for o, r in zip(outs, weights):
            term = total(mul(o, r))
            loss = term if loss is None else add(loss, term)
    tape.backward(loss)

    def projected():
        return sum(float((o.data * r).sum()) for o, r in zip(outputs(), weights))

    entries = [(j, i) for j, t in enumerate(wrt) for i in range(t.size)]
    if elements is not None and elements < len(entries):
        picks = rng.choice(len(entries), size=elements, replace=False)
        entries = [entries[i] for i in sorted(picks)]
    full_analytic = [np.full(t.shape, np.nan) for t in wrt]
    full_numeric = [np.full(t.shape, np.nan) for t in wrt]
    analytic, numeric = [], []
    for j, i in entries:
        t = wrt[j]
        flat = t.data.reshape(-1)
        original = flat[i]
        flat[i] = original + step
        plus = projected()
        flat[i] = original - step
        minus = projected()
        flat[i] = original
        numeric.append((plus - minus) / (2 * step))
        analytic.append(0.0 if t.grad is None else t.grad.reshape(-1)[i])
        full_numeric[j].reshape(-1)[i], full_analytic[j].reshape(-1)[i] = numeric[-1], analytic[-1]
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    error = float(np.linalg.norm(analytic - numeric) / scale)
    max_entry_error = 0.0
    if entries:
        larger = np.maximum(np.abs(analytic), np.abs(numeric))
        floor = max(1e-3 * float(larger.max()), 1e-12)
        max_entry_error = float((np.abs(analytic - numeric) / np.maximum(larger, floor)).max())
    return GradientComparison(error, max_entry_error, full_analytic, full_numeric)


def gradcheck(func, inputs, step=1e-4, seed=0, elements=None):
    """Returns the norm-wise relative gradient error of compare_gradients()."""
    return compare_gradients(func, inputs, step, seed, elements).error

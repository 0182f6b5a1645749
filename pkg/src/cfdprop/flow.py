# -*- coding: utf-8 -*-
"""
Optical flow fields, Middlebury .flo file I/O, a pyramidal Lucas-Kanade
estimator, and analytic ground-truth flows for synthetic sequences.

Convention: a flow s used to warp image B onto the grid of image A satisfies
B(x + s(x)) ~ A(x). In a flow set, forward[i] warps frame i onto frame i+1
(used by forward propagation), backward[i] warps frame i+1 onto frame i.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     14.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
from concurrent import futures
import logging
import struct

import numpy as np
from scipy import ndimage

from . import conf
from . tensor import DimensionError, FormatError, Tensor, bilinear_sample, pixel_grid

logger = logging.getLogger(__name__)


"""Middlebury .flo magic, the float32 reading of b"PIEH"."""
FLO_MAGIC = 202021.25

"""Middlebury .flo header: magic float, width, height."""
FLO_HEADER = struct.Struct("<fii")

"""BT.601 luma weights for grayscale conversion."""
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class FlowField(object):
    """Per-pixel horizontal (u) and vertical (v) displacement in pixels."""

    def __init__(self, u, v):
        u, v = np.asarray(u), np.asarray(v)
        if u.ndim != 2 or u.shape != v.shape:
            raise DimensionError("flow components must be equal 2-D arrays, got %s and %s"
                                 % (u.shape, v.shape))
        self.u, self.v = u, v


    @property
    def shape(self):
        """Returns (h, w)."""
        return self.u.shape


    def coords(self, dtype=np.float64):
        """Returns sampling coordinates (1, 2, h, w) of x + s(x)."""
        grid = pixel_grid(*self.shape, dtype=dtype)
        grid[0, 0] += self.u
        grid[0, 1] += self.v
        return grid


    def crop(self, y, x, h, w):
        return FlowField(self.u[y:y + h, x:x + w].copy(), self.v[y:y + h, x:x + w].copy())


    def is_finite(self):
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())


    def __eq__(self, other):
        return isinstance(other, FlowField) and np.array_equal(self.u, other.u) \
               and np.array_equal(self.v, other.v)


    def __repr__(self):
        return "FlowField(%sx%s)" % self.shape



class FlowSet(object):
    """Flows between adjacent frames of a sequence, in both directions."""

    def __init__(self, forward, backward):
        """
        @param   forward   list of FlowField, forward[i] warps frame i onto frame i+1
        @param   backward  list of FlowField, backward[i] warps frame i+1 onto frame i
        """
        self.forward, self.backward = list(forward), list(backward)


    def validate(self, count, shape=None):
        """Raises DimensionError naming the first missing or mismatched flow."""
        for name, flows in (("forward", self.forward), ("backward", self.backward)):
            for i in range(count - 1):
                if i >= len(flows) or flows[i] is None:
                    raise DimensionError("missing %s flow for timestep %s" % (name, i + 1))
                if shape is not None and flows[i].shape != tuple(shape):
                    raise DimensionError("%s flow at timestep %s has size %s, frames are %s"
                                         % (name, i + 1, flows[i].shape, tuple(shape)))


    def crop(self, y, x, h, w):
        return FlowSet([f.crop(y, x, h, w) for f in self.forward],
                       [f.crop(y, x, h, w) for f in self.backward])


    def __len__(self):
        return len(self.forward)



def to_gray(frame):
    """Returns a 2-D float64 luma image from a (3, h, w) / (1, 3, h, w) / (h, w) frame."""
    arr = frame.data if isinstance(frame, Tensor) else np.asarray(frame)
    arr = np.asarray(arr, dtype=np.float64)
    if 4 == arr.ndim: arr = arr[0]
    if 2 == arr.ndim: return arr
    if 1 == arr.shape[0]: return arr[0]
    return np.tensordot(LUMA_WEIGHTS, arr[:3], axes=1)


def estimate_flow(ref, target, levels=None, iters=None, window=None):
    """
    Estimates flow warping target onto ref's grid, with coarse-to-fine
    Lucas-Kanade and iterative refinement on each pyramid level.

    @param   ref     reference frame, RGB or grayscale
    @param   target  frame to be warped, same size as ref
    @param   levels  pyramid levels, reduced automatically for small frames
    @param   iters   refinement iterations per level
    @param   window  Lucas-Kanade window size
    @return          FlowField
    """
    levels = conf.FlowLevels if levels is None else levels
    iters = conf.FlowIterations if iters is None else iters
    window = conf.FlowWindow if window is None else window
    a, b = to_gray(ref), to_gray(target)
    if a.shape != b.shape:
        raise DimensionError("flow frames differ in size: %s vs %s" % (a.shape, b.shape))
    if not a.size: return FlowField(np.zeros(a.shape), np.zeros(a.shape))

    wanted = levels = max(1, int(levels))
    while levels > 1 and min(a.shape) < 2 ** levels: levels -= 1
    if levels != wanted:
        logger.warning("Frames of %sx%s too small for %s pyramid levels, using %s.",
                       a.shape[0], a.shape[1], wanted, levels)

    pyramid = [(a, b)]
    for _ in range(levels - 1):
        pyramid.append(tuple(_downsample(x) for x in pyramid[-1]))

    u = v = None
    for fixed, moving in reversed(pyramid):
        if u is None: u, v = np.zeros(fixed.shape), np.zeros(fixed.shape)
        else: u, v = _upsample_flow(u, v, fixed.shape)
        for _ in range(iters):
            du, dv = _lucas_kanade_step(fixed, moving, u, v, window)
            u, v = u + du, v + dv
            if max(np.abs(du).max(), np.abs(dv).max()) < 1e-6: break  # for _
    return FlowField(u, v)


def _downsample(image):
    return ndimage.gaussian_filter(image, 1.0, mode="nearest")[::2, ::2]


def _upsample_flow(u, v, shape):
    """Resamples a coarse flow to shape with bilinear weights, scaling displacements."""
    h, w = shape
    sy, sx = float(u.shape[0]) / h, float(u.shape[1]) / w
    yy, xx = np.meshgrid((np.arange(h) + 0.5) * sy - 0.5, (np.arange(w) + 0.5) * sx - 0.5,
                         indexing="ij")
    resample = lambda f: ndimage.map_coordinates(f, [yy, xx], order=1, mode="nearest")
    return resample(u) / sx, resample(v) / sy


def _warp_gray(image, u, v):
    if not u.any() and not v.any(): return image
    yy, xx = np.meshgrid(np.arange(image.shape[0]), np.arange(image.shape[1]), indexing="ij")
    return ndimage.map_coordinates(image, [yy + v, xx + u], order=1, mode="nearest")


def _gradient(image):
    """Returns (d/dy, d/dx) of image, zero along an axis of a single pixel."""
    return tuple(np.gradient(image, axis=i) if image.shape[i] > 1 else np.zeros(image.shape)
                 for i in (0, 1))


def _lucas_kanade_step(fixed, moving, u, v, window):
    """Returns the flow increment solving the windowed linearized brightness constancy."""
    warped = _warp_gray(moving, u, v)
    gy1, gx1 = _gradient(fixed)
    gy2, gx2 = _gradient(warped)
    ix, iy, it = 0.5 * (gx1 + gx2), 0.5 * (gy1 + gy2), warped - fixed
    box = lambda x: ndimage.uniform_filter(x, size=window, mode="nearest")
    sxx, syy, sxy = box(ix * ix), box(iy * iy), box(ix * iy)
    sxt, syt = box(ix * it), box(iy * it)
    ridge = 1e-3 * float(np.mean(sxx + syy)) + 1e-12
    sxx, syy = sxx + ridge, syy + ridge
    det = sxx * syy - sxy * sxy
    du = -(syy * sxt - sxy * syt) / det
    dv = -(sxx * syt - sxy * sxt) / det
    return du, dv


def estimate_sequence_flows(frames, levels=None, iters=None, window=None):
    """
    Estimates flows between all adjacent frames, in parallel.

    @return  FlowSet
    """
    pairs = [(frames[i + 1], frames[i]) for i in range(len(frames) - 1)] + \
            [(frames[i], frames[i + 1]) for i in range(len(frames) - 1)]
    run = lambda pair: estimate_flow(pair[0], pair[1], levels, iters, window)
    with futures.ThreadPoolExecutor(max_workers=conf.thread_count()) as executor:
        flows = list(executor.map(run, pairs))
    half = len(frames) - 1
    return FlowSet(flows[:half], flows[half:])


def warp_frame(frame, flow):
    """
    Warps a plain (c, h, w) array by flow with bilinear sampling and border
    clamping, returning an array of the same shape.
    """
    arr = np.asarray(frame, dtype=np.float64)
    if arr.shape[1:] != flow.shape:
        raise DimensionError("frame size %s differs from flow size %s" % (arr.shape[1:], flow.shape))
    return bilinear_sample(Tensor(arr[None]), flow.coords()).data[0]


def gt_translation_flow(shape, dx, dy):
    """Returns a constant flow field (dx, dy) of shape (h, w)."""
    return FlowField(np.full(shape, float(dx)), np.full(shape, float(dy)))


def gt_rotation_flow(shape, angle, center=None):
    """
    Returns the flow of a rotation about center: s(p) = R(angle)(p - c) - (p - c).

    @param   angle   rotation in degrees, counter-clockwise in image coordinates
    @param   center  (cx, cy), defaults to the image center
    """
    h, w = shape
    cx, cy = ((w - 1) / 2.0, (h - 1) / 2.0) if center is None else center
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    rad = np.deg2rad(angle)
    cos, sin = np.cos(rad), np.sin(rad)
    return FlowField(cos * xx - sin * yy - xx, sin * xx + cos * yy - yy)


def encode_flo(flow):
    """Returns .flo file bytes for FlowField."""
    h, w = flow.shape
    data = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    return FLO_HEADER.pack(FLO_MAGIC, w, h) + data.tobytes()


def decode_flo(buffer):
    """Parses .flo file bytes into FlowField with float32 components."""
    if len(buffer) < 4:
        raise FormatError("truncated .flo header at offset %s" % len(buffer))
    if struct.unpack_from("<f", buffer, 0)[0] != FLO_MAGIC:
        raise FormatError("bad .flo magic at offset 0")
    if len(buffer) < FLO_HEADER.size:
        raise FormatError("truncated .flo header at offset %s" % len(buffer))
    _, w, h = FLO_HEADER.unpack_from(buffer, 0)
    if w < 0 or h < 0:
        raise FormatError("negative .flo size %sx%s at offset 4" % (w, h))
    count = 2 * w * h
    if len(buffer) < FLO_HEADER.size + 4 * count:
        raise FormatError("truncated .flo payload at offset %s" % len(buffer))
    if not count: return FlowField(np.zeros((h, w), np.float32), np.zeros((h, w), np.float32))
    data = np.frombuffer(buffer, dtype="<f4", count=count, offset=FLO_HEADER.size)
    data = data.astype(np.float32).reshape(h, w, 2)
    return FlowField(data[..., 0].copy(), data[..., 1].copy())


def write_flo(flow, path):
    with open(path, "wb") as f: f.write(encode_flo(flow))


def read_flo(path):
    with open(path, "rb") as f: return decode_flo(f.read())

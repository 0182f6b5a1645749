# -*- coding: utf-8 -*-
"""
Video sequences and frame data: PNG frame I/O, JSON sequence manifests,
bicubic and blur-downsampling degradations, synthetic moving-texture
clips with ground-truth flow, and training patch sampling.

Frames are float64 arrays (3, h, w) with values nominally in [0, 1].

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     15.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
from concurrent import futures
import glob
import json
import logging
import os

import numpy as np
from PIL import Image
from scipy import ndimage

from . import conf
from . import flow as F
from . tensor import DimensionError, Tensor, make_rng

logger = logging.getLogger(__name__)


"""Synthetic clip kinds accepted by synth_sequence()."""
SYNTH_KINDS = ("translate", "rotate-texture")

"""Degradations accepted by degrade()."""
DEGRADATIONS = ("bi", "bd")

"""Name of the manifest file in a sequence directory."""
MANIFEST_NAME = "manifest.json"


class VideoSequence(object):
    """Ordered LR frames with optional HR targets and ground-truth flows."""

    def __init__(self, frames, hr_targets=None, gt_flows=None, name="sequence"):
        """
        @param   frames      list of arrays (3, h, w)
        @param   hr_targets  list of arrays (3, sh, sw), one per frame
        @param   gt_flows    FlowSet between adjacent frames, at LR size
        """
        self.frames = [np.asarray(x, dtype=np.float64) for x in frames]
        self.hr_targets = None if hr_targets is None else \
                          [np.asarray(x, dtype=np.float64) for x in hr_targets]
        self.gt_flows = gt_flows
        self.name = name
        self.origin = None  # (y, x) in the source sequence, for crops
        self.validate()


    def validate(self):
        if not self.frames: return
        shape = self.frames[0].shape
        if len(shape) != 3:
            raise DimensionError("frames must be (c, h, w) arrays, got %s" % (shape, ))
        for i, frame in enumerate(self.frames):
            if frame.shape != shape:
                raise DimensionError("frame %s has shape %s, frame 1 has %s" % (i + 1, frame.shape, shape))
        if self.hr_targets is not None:
            if len(self.hr_targets) != len(self.frames):
                raise DimensionError("%s HR targets for %s frames"
                                     % (len(self.hr_targets), len(self.frames)))
            hr_shape = (shape[0], shape[1] * conf.Scale, shape[2] * conf.Scale)
            for i, target in enumerate(self.hr_targets):
                if target.shape != hr_shape:
                    raise DimensionError("HR target %s has shape %s, expected %s"
                                         % (i + 1, target.shape, hr_shape))
        if self.gt_flows is not None:
            self.gt_flows.validate(len(self.frames), shape[1:])


    @property
    def shape(self):
        """Returns LR frame (h, w)."""
        return self.frames[0].shape[1:] if self.frames else (0, 0)


    def tensors(self, dtype=np.float64):
        """Returns frames as Tensors (1, 3, h, w)."""
        return [Tensor(x[None], dtype=dtype) for x in self.frames]


    def __len__(self):
        return len(self.frames)


    def __repr__(self):
        return "VideoSequence(%r, %s frames of %sx%s%s%s)" % (
            self.name, len(self), self.shape[0], self.shape[1],
            ", HR" if self.hr_targets is not None else "",
            ", flows" if self.gt_flows is not None else "")



def _cubic(x, a):
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    return np.where(x <= 1, (a + 2) * x3 - (a + 3) * x2 + 1,
                    np.where(x < 2, a * x3 - 5 * a * x2 + 8 * a * x - 4 * a, 0.0))


def resize_weights(in_len, out_len, a=None):
    """
    Returns the (out_len, in_len) bicubic interpolation matrix: pixel centers
    aligned, kernel widened by the scale factor when shrinking, rows
    normalized to sum 1, out-of-range taps clamped to the border pixel.
    """
    a = conf.BicubicA if a is None else a
    if in_len < 1 or out_len < 1:
        raise DimensionError("resize sizes must be positive, got %s -> %s" % (in_len, out_len))
    scale = float(out_len) / in_len
    width = 4.0 / scale if scale < 1 else 4.0
    u = (np.arange(1, out_len + 1) / scale) + 0.5 * (1 - 1 / scale)
    left = np.floor(u - width / 2)
    taps = int(np.ceil(width)) + 2
    indices = left[:, None] + np.arange(taps)[None, :]
    if scale < 1: weights = scale * _cubic(scale * (u[:, None] - indices), a)
    else: weights = _cubic(u[:, None] - indices, a)
    weights /= weights.sum(axis=1, keepdims=True)
    indices = np.clip(indices, 1, in_len).astype(np.intp) - 1
    matrix = np.zeros((out_len, in_len))
    rows = np.repeat(np.arange(out_len), taps)
    np.add.at(matrix, (rows, indices.reshape(-1)), weights.reshape(-1))
    return matrix


def resize_bicubic(img, out_h, out_w):
    """
    Resizes an image array (..., h, w) or Tensor with antialiased bicubic
    interpolation. Returns the same kind as given.
    """
    arr = img.data if isinstance(img, Tensor) else np.asarray(img, dtype=np.float64)
    h, w = arr.shape[-2:]
    if (h, w) == (out_h, out_w): result = arr.copy()
    else:
        rows, cols = resize_weights(h, out_h), resize_weights(w, out_w)
        result = np.matmul(np.matmul(rows, arr), cols.T)
    return Tensor(result, dtype=arr.dtype) if isinstance(img, Tensor) else result


def gaussian_kernel(size=None, sigma=None):
    """Returns a normalized 1-D Gaussian kernel of odd size."""
    size = conf.BlurKernelSize if size is None else size
    sigma = conf.BlurSigma if sigma is None else sigma
    if size < 1 or not size % 2:
        raise ValueError("kernel size must be odd and positive, got %s" % size)
    x = np.arange(size) - (size - 1) / 2.0
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(img, sigma=None, size=None):
    """Blurs an array (..., h, w) with a separable normalized Gaussian, reflective borders."""
    kernel = gaussian_kernel(size, sigma)
    result = ndimage.correlate1d(np.asarray(img, dtype=np.float64), kernel, axis=-2, mode="reflect")
    return ndimage.correlate1d(result, kernel, axis=-1, mode="reflect")


def _check_divisible(hr, scale):
    if not hr.frames: raise DimensionError("cannot degrade an empty sequence")
    h, w = hr.shape
    if h % scale or w % scale:
        raise DimensionError("HR size %sx%s is not divisible by scale %s" % (h, w, scale))


def _downscale_flows(flows, shape, scale):
    """Returns flows resized to LR shape, displacements divided by scale."""
    if flows is None: return None
    resize = lambda f: F.FlowField(resize_bicubic(f.u, *shape) / scale,
                                   resize_bicubic(f.v, *shape) / scale)
    return F.FlowSet([resize(f) for f in flows.forward], [resize(f) for f in flows.backward])


def _degrade(hr, scale, func, suffix):
    _check_divisible(hr, scale)
    with futures.ThreadPoolExecutor(max_workers=conf.thread_count()) as executor:
        frames = list(executor.map(func, hr.frames))
    shape = frames[0].shape[1:]
    return VideoSequence(frames, hr_targets=[x.copy() for x in hr.frames],
                         gt_flows=_downscale_flows(hr.gt_flows, shape, scale),
                         name="%s_%s" % (hr.name, suffix))


def degrade_bi(hr, scale=None):
    """Returns LR sequence by antialiased bicubic downscaling, HR frames as targets."""
    scale = conf.Scale if scale is None else scale
    h, w = hr.shape
    return _degrade(hr, scale, lambda x: resize_bicubic(x, h // scale, w // scale), "bi")


def degrade_bd(hr, sigma=None, scale=None):
    """
    Returns LR sequence by Gaussian blur then point sampling every scale-th
    pixel from offset (scale - 1) // 2, HR frames as targets.
    """
    scale = conf.Scale if scale is None else scale
    offset = (scale - 1) // 2
    sample = lambda x: gaussian_blur(x, sigma)[..., offset::scale, offset::scale].copy()
    return _degrade(hr, scale, sample, "bd")


def degrade(hr, kind="bi", scale=None):
    """Returns LR sequence with named degradation, "bi" or "bd"."""
    if kind not in DEGRADATIONS:
        raise conf.ConfigError("degradation must be one of %s, got %r" % (", ".join(DEGRADATIONS), kind))
    return degrade_bi(hr, scale=scale) if "bi" == kind else degrade_bd(hr, scale=scale)


def _texture(seed, detail=None, count=6):
    """
    Returns function(x, y) -> (3, ...) evaluating a seeded sum of sinusoids
    at LR pixel coordinates. Wavelengths are drawn in HR pixels: count
    components from conf.SynthBaseBand and count from conf.SynthDetailBand,
    the latter carrying the given share of amplitude. Values stay within
    0.5 +- 0.4.
    """
    detail = conf.SynthDetail if detail is None else detail
    rng = make_rng(seed, "synth:texture")
    wavelengths = np.concatenate([rng.uniform(*conf.SynthBaseBand, size=count),
                                  rng.uniform(*conf.SynthDetailBand, size=count)]) / conf.Scale
    angles = rng.uniform(0, np.pi, size=2 * count)
    phases = rng.uniform(0, 2 * np.pi, size=2 * count)
    amplitudes = rng.uniform(0.2, 1.0, size=(3, 2 * count))
    for part, share in ((slice(None, count), 1 - detail), (slice(count, None), detail)):
        amplitudes[:, part] *= 0.4 * share / amplitudes[:, part].sum(axis=1, keepdims=True)
    kx = 2 * np.pi * np.cos(angles) / wavelengths
    ky = 2 * np.pi * np.sin(angles) / wavelengths

    def evaluate(x, y):
        waves = np.sin(kx * x[..., None] + ky * y[..., None] + phases)  # (..., count)
        return 0.5 + np.moveaxis(np.tensordot(waves, amplitudes, axes=([-1], [1])), -1, 0)
    return evaluate


def _motion_args(kind, motion):
    values = np.atleast_1d(np.asarray(motion, dtype=np.float64)).tolist()
    if "translate" == kind:
        if len(values) != 2:
            raise conf.ConfigError("translate motion must be two values dx,dy, got %r" % (motion, ))
    elif len(values) != 1:
        raise conf.ConfigError("rotate-texture motion must be one angle in degrees, got %r" % (motion, ))
    return values


def synth_sequence(kind="translate", n_frames=5, size=32, motion=(1.0, 0.0), seed=0,
                   degradation="bi", detail=None):
    """
    Renders a moving band-limited texture at HR, degrades it to LR, and
    attaches exact flows.

    @param   kind         "translate": frame t shows texture at x + t * (dx, dy);
                          "rotate-texture": frame t shows texture rotated by t * angle
                          degrees about the frame center
    @param   size         LR frame size, int or (h, w)
    @param   motion       (dx, dy) in LR pixels per frame, or angle in degrees per frame
    @param   detail       share of texture amplitude in the detail band, which
                          degradation attenuates or aliases, default conf.SynthDetail
    @return               VideoSequence with LR frames, HR targets and gt_flows
    """
    if kind not in SYNTH_KINDS:
        raise conf.ConfigError("synth kind must be one of %s, got %r" % (", ".join(SYNTH_KINDS), kind))
    if n_frames < 1: raise conf.ConfigError("synth frame count must be >= 1, got %r" % (n_frames, ))
    h, w = (size, size) if np.isscalar(size) else tuple(size)
    if h < 1 or w < 1: raise conf.ConfigError("synth size must be positive, got %r" % (size, ))
    values, scale = _motion_args(kind, motion), conf.Scale
    detail = conf.SynthDetail if detail is None else detail
    if not 0 <= detail <= 1:
        raise conf.ConfigError("synth detail must be within [0, 1], got %r" % (detail, ))
    texture = _texture(seed, detail)

    # HR pixel centers in LR pixel coordinates
    ys = (np.arange(h * scale) + 0.5) / scale - 0.5
    xs = (np.arange(w * scale) + 0.5) / scale - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    def render(t):
        if "translate" == kind:
            return texture(xx + t * values[0], yy + t * values[1])
        rad = np.deg2rad(t * values[0])
        dx, dy = xx - cx, yy - cy
        return texture(cx + np.cos(rad) * dx - np.sin(rad) * dy,
                       cy + np.sin(rad) * dx + np.cos(rad) * dy)

    hr = VideoSequence([render(t) for t in range(n_frames)], name="%s_%s" % (kind, seed))
    lr = degrade(hr, degradation)
    if "translate" == kind:
        fwd = F.gt_translation_flow((h, w), values[0], values[1])
        bwd = F.gt_translation_flow((h, w), -values[0], -values[1])
    else:
        fwd = F.gt_rotation_flow((h, w), values[0], (cx, cy))
        bwd = F.gt_rotation_flow((h, w), -values[0], (cx, cy))
    count = n_frames - 1
    lr.gt_flows = F.FlowSet([fwd] * count, [bwd] * count)
    lr.name = hr.name
    logger.debug("Synthesized %r.", lr)
    return lr


def sample_patches(seq, patch, count, seed=0, key="patches"):
    """
    Returns count co-located crops of seq: LR patch x patch crops, HR crops of
    scale times the size at scale times the offset, and cropped flows.

    @param   key  random stream name, e.g. per training step
    """
    h, w = seq.shape
    if patch < 1 or patch > h or patch > w:
        raise DimensionError("patch size %s does not fit frames of %sx%s" % (patch, h, w))
    rng, scale, result = make_rng(seed, key), conf.Scale, []
    for i in range(count):
        y, x = int(rng.integers(0, h - patch + 1)), int(rng.integers(0, w - patch + 1))
        frames = [f[:, y:y + patch, x:x + patch].copy() for f in seq.frames]
        targets = None if seq.hr_targets is None else \
                  [f[:, scale * y:scale * (y + patch), scale * x:scale * (x + patch)].copy()
                   for f in seq.hr_targets]
        flows = None if seq.gt_flows is None else seq.gt_flows.crop(y, x, patch, patch)
        crop = VideoSequence(frames, targets, flows, name="%s_patch%s" % (seq.name, i))
        crop.origin = (y, x)
        result.append(crop)
    return result


def read_png(path):
    """Returns a PNG image as float64 array (3, h, w) in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr.transpose(2, 0, 1).copy()


def write_png(frame, path):
    """Writes an array (3, h, w) or (1, h, w) as 8-bit PNG, clipping to [0, 1]."""
    arr = np.asarray(frame.data if isinstance(frame, Tensor) else frame, dtype=np.float64)
    if 4 == arr.ndim: arr = arr[0]
    arr = np.round(np.clip(arr, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)
    Image.fromarray(arr[..., 0] if 1 == arr.shape[-1] else arr).save(path)


def read_frames(directory):
    """Returns all PNG frames in directory as arrays, in sorted filename order."""
    paths = sorted(glob.glob(os.path.join(directory, "*.png")))
    if not paths: raise IOError("no PNG frames in %s" % directory)
    return [read_png(p) for p in paths]


def save_sequence(seq, directory):
    """
    Writes sequence frames, HR targets and flows under directory, with a
    manifest.json listing them. Returns manifest path.
    """
    for sub in ("lr", "hr", "flow"):
        if "hr" == sub and seq.hr_targets is None or "flow" == sub and seq.gt_flows is None:
            continue  # for sub
        if not os.path.isdir(os.path.join(directory, sub)): os.makedirs(os.path.join(directory, sub))
    manifest = {"name": seq.name, "frames": []}
    for i, frame in enumerate(seq.frames):
        manifest["frames"].append("lr/%08d.png" % i)
        write_png(frame, os.path.join(directory, manifest["frames"][-1]))
    if seq.hr_targets is not None:
        manifest["hr"] = []
        for i, frame in enumerate(seq.hr_targets):
            manifest["hr"].append("hr/%08d.png" % i)
            write_png(frame, os.path.join(directory, manifest["hr"][-1]))
    if seq.gt_flows is not None:
        manifest["flows"] = {"forward": [], "backward": []}
        for direction in ("forward", "backward"):
            for i, field in enumerate(getattr(seq.gt_flows, direction)):
                manifest["flows"][direction].append("flow/%s_%08d.flo" % (direction, i))
                F.write_flo(field, os.path.join(directory, manifest["flows"][direction][-1]))
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "w") as f: json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def load_sequence(path):
    """
    Reads a sequence from a manifest file, or from a directory holding one.
    Paths in the manifest are relative to its own directory.
    """
    if os.path.isdir(path): path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(path): raise IOError("no sequence manifest at %s" % path)
    with open(path) as f:
        try: manifest = json.load(f)
        except ValueError as e: raise conf.ConfigError("invalid manifest %s: %s" % (path, e))
    if not isinstance(manifest, dict) or not manifest.get("frames"):
        raise conf.ConfigError("manifest %s lists no frames" % path)
    unknown = sorted(set(manifest) - {"name", "frames", "hr", "flows"})
    if unknown: raise conf.ConfigError("unknown key %s in manifest %s" % (unknown[0], path))
    root = os.path.dirname(os.path.abspath(path))
    resolve = lambda p: os.path.join(root, p)
    frames = [read_png(resolve(p)) for p in manifest["frames"]]
    hr = [read_png(resolve(p)) for p in manifest["hr"]] if manifest.get("hr") else None
    flows = None
    if manifest.get("flows"):
        flows = F.FlowSet([F.read_flo(resolve(p)) for p in manifest["flows"].get("forward", [])],
                          [F.read_flo(resolve(p)) for p in manifest["flows"].get("backward", [])])
    return VideoSequence(frames, hr, flows, name=manifest.get("name") or
                         os.path.basename(root))

# -*- coding: utf-8 -*-
"""
Quality metrics and model accounting: PSNR on RGB or luma, SSIM on luma,
temporal profiles, evaluation reports, parameter counts and analytic
FLOP estimates.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     16.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
from concurrent import futures
import collections
import json
import logging
import math

import numpy as np
from skimage.metrics import structural_similarity

from . import conf
from . tensor import DimensionError, Tensor

logger = logging.getLogger(__name__)


"""BT.601 studio-range luma coefficients for RGB in [0, 1], and offset."""
Y_WEIGHTS = (65.481, 128.553, 24.966)
Y_OFFSET = 16.0

"""Channel modes accepted by psnr()."""
MODES = ("rgb", "y")


def _array(x):
    """Returns float64 array (c, h, w) from Tensor or array, dropping a batch of one."""
    arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if 4 == arr.ndim:
        if arr.shape[0] != 1:
            raise DimensionError("metrics take single images, got batch of %s" % arr.shape[0])
        arr = arr[0]
    if 2 == arr.ndim: arr = arr[None]
    if arr.ndim != 3: raise DimensionError("expected an image, got shape %s" % (arr.shape, ))
    return arr


def rgb_to_y(img):
    """Returns luma (1, h, w) in [16/255, 235/255] for RGB (3, h, w) in [0, 1]."""
    arr = _array(img)
    if 1 == arr.shape[0]: return arr
    if arr.shape[0] != 3: raise DimensionError("rgb_to_y needs 3 channels, got %s" % arr.shape[0])
    return ((np.tensordot(Y_WEIGHTS, arr, axes=1) + Y_OFFSET) / 255.0)[None]


def psnr(a, b, mode="rgb"):
    """
    Returns peak signal-to-noise ratio in dB for unit peak, capped at
    conf.PsnrCap for identical images.

    @param   mode  "rgb" over all channels, or "y" over BT.601 luma
    """
    if mode not in MODES: raise ValueError("unknown PSNR mode %r" % (mode, ))
    a, b = _array(a), _array(b)
    if a.shape != b.shape:
        raise DimensionError("PSNR inputs differ in shape: %s vs %s" % (a.shape, b.shape))
    if "y" == mode: a, b = rgb_to_y(a), rgb_to_y(b)
    mse = float(np.mean((a - b) ** 2))
    if not mse: return float(conf.PsnrCap)
    return min(float(conf.PsnrCap), 10 * math.log10(1.0 / mse))


def ssim(a, b):
    """
    Returns structural similarity of luma images, with a Gaussian window
    (conf.SsimWindow, conf.SsimSigma) and unit dynamic range, averaged over
    window positions fully inside the image. No border crop.
    """
    a, b = rgb_to_y(a)[0], rgb_to_y(b)[0]
    if a.shape != b.shape:
        raise DimensionError("SSIM inputs differ in shape: %s vs %s" % (a.shape, b.shape))
    if min(a.shape) < conf.SsimWindow:
        raise DimensionError("image %sx%s is smaller than the %sx%s SSIM window"
                             % (a.shape + (conf.SsimWindow, conf.SsimWindow)))
    return float(structural_similarity(a, b, data_range=1.0, gaussian_weights=True,
                                       sigma=conf.SsimSigma, use_sample_covariance=False,
                                       K1=0.01, K2=0.03))


def temporal_profile(frames, row):
    """
    Stacks pixel row `row` of each frame into a Tensor (T, c, 1, w), in frame order.
    """
    frames = [_array(x) for x in frames]
    if not frames: raise DimensionError("temporal profile needs at least one frame")
    h = frames[0].shape[1]
    if not 0 <= row < h:
        raise DimensionError("profile row %s out of range for frame height %s" % (row, h))
    return Tensor(np.stack([x[:, row:row + 1, :] for x in frames]))


def profile_image(profile):
    """Returns a temporal profile as image array (c, T, w), one row per frame."""
    return profile.data[:, :, 0, :].transpose(1, 0, 2).copy()



class EvalReport(object):
    """Per-frame and mean PSNR and SSIM of a frame sequence against targets."""

    NOTE = "SSIM on Y channel, Gaussian window, no border crop"


    def __init__(self, psnr_values, ssim_values, mode="y", name=""):
        self.psnr = [float(x) for x in psnr_values]
        self.ssim = [float(x) for x in ssim_values]
        self.mode = mode
        self.name = name


    @property
    def frames(self):
        return len(self.psnr)


    @property
    def mean_psnr(self):
        return float(np.mean(self.psnr)) if self.psnr else float("nan")


    @property
    def mean_ssim(self):
        return float(np.mean(self.ssim)) if self.ssim else float("nan")


    def to_dict(self):
        return collections.OrderedDict([
            ("name", self.name), ("mode", self.mode), ("frames", self.frames),
            ("note", self.NOTE), ("mean_psnr", self.mean_psnr), ("mean_ssim", self.mean_ssim),
            ("psnr", self.psnr), ("ssim", self.ssim),
        ])


    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


    def table(self):
        """Returns the report as aligned text columns."""
        lines = ["# %s%s, PSNR on %s" % (self.name + ": " if self.name else "", self.NOTE,
                                         self.mode.upper()),
                 "%-6s %10s %8s" % ("frame", "psnr_db", "ssim")]
        for i, (p, s) in enumerate(zip(self.psnr, self.ssim)):
            lines.append("%-6s %10.4f %8.5f" % (i + 1, p, s))
        lines.append("%-6s %10.4f %8.5f" % ("mean", self.mean_psnr, self.mean_ssim))
        return "\n".join(lines) + "\n"



def evaluate(outputs, targets, mode="y", name=""):
    """Returns EvalReport of outputs against targets, frames compared in parallel."""
    if len(outputs) != len(targets):
        raise DimensionError("%s output frames for %s targets" % (len(outputs), len(targets)))
    score = lambda pair: (psnr(pair[0], pair[1], mode), ssim(pair[0], pair[1]))
    with futures.ThreadPoolExecutor(max_workers=conf.thread_count()) as executor:
        results = list(executor.map(score, zip(outputs, targets)))
    return EvalReport([x[0] for x in results], [x[1] for x in results], mode, name)


def conv_params(c_in, c_out, k, bias=True):
    """Returns parameter count of a k x k convolution."""
    return c_in * c_out * k * k + (c_out if bias else 0)


def count_params(model):
    """Returns the exact number of scalar parameters in model."""
    return int(sum(p.size for p in model.parameters()))


def log_param_count(model):
    """Logs model parameter count next to the full-size reference figure."""
    count = count_params(model)
    logger.info("Model has %s parameters (%.2f M), reference full-size model %.1f M. "
                "Comparison is informational: the reference may include the flow network.",
                count, count / 1e6, conf.ReferenceParamsMillions)
    return count



class _FlopCounter(object):
    """Accumulates FLOPs for one LR frame of given pixel count."""

    def __init__(self, pixels):
        self.pixels, self.total = pixels, 0


    def conv(self, c_in, c_out, k, scale=1):
        self.total += 2 * c_in * c_out * k * k * self.pixels * scale


    def depthwise(self, c, k):
        self.total += 2 * c * k * k * self.pixels


    def elementwise(self, channels, ops=1, scale=1):
        self.total += channels * self.pixels * ops * scale


    def resblock(self, c):
        self.conv(c, c, 3)
        self.conv(c, c, 3)
        self.elementwise(c, ops=2)  # relu, skip add



def estimate_flops(config, h=None, w=None, n_frames=None):
    """
    Returns analytic FLOPs of one forward pass over n_frames frames of h x w:
    2 per multiply-accumulate of every convolution, plus 1 per output element
    of every warp, activation and elementwise arithmetic op. Flow estimation
    is not counted.

    @param   config  ModelConfig or CfdModel
    """
    config = getattr(config, "config", config)
    h = conf.FlopFrameSize[0] if h is None else h
    w = conf.FlopFrameSize[1] if w is None else w
    n_frames = conf.FlopFrameCount if n_frames is None else n_frames
    C, s2 = config.channels, config.scale * config.scale
    c = _FlopCounter(h * w)

    c.conv(3, C, 3)
    for _ in range(config.fe_blocks): c.resblock(C)

    prop_in = {"dac": 2 * C, "concat": 3 * C, "warp": 2 * C}[config.alignment]
    for _ in range(config.prop_rounds * 2):
        c.elementwise(C)  # warp
        c.resblock(C)
        if "dac" == config.alignment: c.elementwise(C)
        c.conv(prop_in, C, 3)
        c.elementwise(C)
        for _ in range(config.prop_blocks): c.resblock(C)

    if config.use_cfp:
        c.elementwise(3 * C)  # layer norm
        c.conv(3 * C, C, 3)
        c.conv(3 * C, C, 3)
        c.conv(2 * C, C, 3)
        c.elementwise(C, ops=8)  # sigmoids, tanh, w * h_f, gated update
        for _ in range(config.gcfb_count):
            if "gcfb" == config.cfp_block:
                c.conv(2 * C, 4 * C, 1)
                c.depthwise(4 * C, 3)
                c.elementwise(2 * C, ops=2)
                c.conv(2 * C, C, 1)
                c.elementwise(C, ops=2)
            else: c.resblock(C)

    c.conv((4 if config.use_cfp else 3) * C, C, 3)
    for _ in range(config.rec_blocks): c.resblock(C)
    c.conv(C, 4 * C, 3)
    c.elementwise(C, scale=4)
    c.conv(C, 4 * C, 3, scale=4)
    c.elementwise(C, scale=16)
    c.conv(C, 3, 3, scale=s2)
    c.elementwise(3, ops=2, scale=s2)  # bilinear skip, add
    return int(c.total * n_frames)

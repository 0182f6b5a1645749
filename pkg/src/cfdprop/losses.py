# -*- coding: utf-8 -*-
"""
Training objective and optimizer: Charbonnier loss, Fourier-domain L1 loss,
their weighted sum, Adam with bias correction, and cosine annealing of the
learning rate.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     15.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import collections
import logging
import math

import numpy as np

from . import conf
from . import tensor as T
from . tensor import DimensionError

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when training cannot continue, e.g. on a non-finite gradient."""



class LossConfig(object):
    """Loss hyperparameters: Charbonnier epsilon and Fourier term weight."""

    FIELDS = ("eps", "fft_weight")


    def __init__(self, eps=None, fft_weight=None):
        self.eps        = conf.CharbonnierEpsilon if eps        is None else eps
        self.fft_weight = conf.FftWeight          if fft_weight is None else fft_weight
        if not isinstance(self.eps, (int, float)) or not self.eps > 0:
            raise conf.ConfigError("loss.eps must be positive, got %r" % (self.eps, ))
        if not isinstance(self.fft_weight, (int, float)) or self.fft_weight < 0:
            raise conf.ConfigError("loss.fft_weight must be non-negative, got %r" % (self.fft_weight, ))


    def to_dict(self):
        return collections.OrderedDict((k, getattr(self, k)) for k in self.FIELDS)


    @classmethod
    def from_dict(cls, data):
        unknown = sorted(set(data) - set(cls.FIELDS))
        if unknown: raise conf.ConfigError("unknown key loss.%s" % unknown[0])
        return cls(**data)



def _check_pair(sr, gt):
    if sr.shape != gt.shape:
        raise DimensionError("loss inputs differ in shape: %s vs %s" % (sr.shape, gt.shape))
    return gt if isinstance(gt, T.Tensor) else T.Tensor(gt, dtype=sr.dtype)


def charbonnier(sr, gt, eps=None):
    """Returns mean of sqrt((sr - gt)^2 + eps^2) as a (1, 1, 1, 1) Tensor."""
    eps = conf.CharbonnierEpsilon if eps is None else eps
    diff = sr - _check_pair(sr, gt)
    return T.mean(T.sqrt(diff * diff + eps * eps))


def fft_loss(sr, gt):
    """
    Returns the L1 distance of unnormalized 2-D DFTs per channel, summed over
    complex moduli and divided by the element count.
    """
    gt = _check_pair(sr, gt)
    diff = sr.data - gt.data
    spectrum = np.fft.fft2(diff, axes=(2, 3))
    modulus = np.abs(spectrum)
    count = max(diff.size, 1)
    out = np.asarray(modulus.sum() / count, dtype=sr.dtype).reshape(1, 1, 1, 1)

    def backward(g):
        h, w = diff.shape[2:]
        unit = np.divide(spectrum, modulus, out=np.zeros_like(spectrum), where=modulus > 0)
        grad = np.real(np.fft.ifft2(unit, axes=(2, 3))) * (h * w / float(count))
        grad = grad * g.reshape(())
        return [grad, -grad]
    return T.apply_op(out, [sr, gt], backward)


def total_loss(sr, gt, cfg=None):
    """
    Returns (total, charbonnier, fft) Tensors, total = charbonnier + weight * fft.
    The Fourier term is skipped at zero weight.
    """
    cfg = cfg or LossConfig()
    char = charbonnier(sr, gt, cfg.eps)
    if not cfg.fft_weight: return char, char, None
    freq = fft_loss(sr, gt)
    return char + freq * float(cfg.fft_weight), char, freq



class OptimState(object):
    """Adam moment buffers and step counter for a list of parameters."""

    def __init__(self, params, betas=None, eps=None):
        self.betas = tuple(conf.AdamBetas if betas is None else betas)
        self.eps   = conf.AdamEpsilon if eps is None else eps
        self.step  = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


    def astype(self, dtype):
        self.m = [x.astype(dtype) for x in self.m]
        self.v = [x.astype(dtype) for x in self.v]
        return self



def adam_step(params, grads, state, lr):
    """
    Applies one bias-corrected Adam update in place.

    @param   params  list of parameter Tensors
    @param   grads   list of gradient arrays, None meaning zero
    @param   state   OptimState, updated in place
    @param   lr      learning rate
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("adam_step got %s parameters, %s gradients, state for %s"
                             % (len(params), len(grads), len(state.m)))
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is not None and not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient for parameter %s at step %s"
                                % (p.name or "#%s" % i, state.step + 1))
    state.step += 1
    b1, b2 = state.betas
    c1, c2 = 1.0 - b1 ** state.step, 1.0 - b2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None: g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise DimensionError("gradient shape %s differs from parameter %s shape %s"
                                 % (g.shape, p.name, p.shape))
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        update = lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + state.eps)
        p.data -= update.astype(p.dtype, copy=False)


def cosine_lr(step, total, eta_max=None, eta_min=None):
    """Returns the cosine-annealed learning rate, eta_min from step total onwards."""
    eta_max = conf.LearningRateMax if eta_max is None else eta_max
    eta_min = conf.LearningRateMin if eta_min is None else eta_min
    if total <= 0 or step >= total: return float(eta_min)
    step = max(step, 0)
    return eta_min + 0.5 * (eta_max - eta_min) * (1 + math.cos(math.pi * step / float(total)))

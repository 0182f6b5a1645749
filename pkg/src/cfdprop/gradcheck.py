# -*- coding: utf-8 -*-
"""
Finite-difference gradient check suite over every differentiable primitive,
network block and loss, plus a whole-model check on a tiny configuration.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     17.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import collections
import json
import logging
import os

import numpy as np

from . import conf
from . import flow as F
from . import losses
from . import network as N
from . import tensor as T
from . tensor import Tensor

logger = logging.getLogger(__name__)


"""Relative error tolerance for elementwise primitives."""
ELEMENTWISE_TOLERANCE = 1e-4

"""Relative error tolerance and sampled parameter count for the whole-model check."""
MODEL_TOLERANCE = 1e-2
MODEL_ELEMENTS = 25


def _leaf(rng, shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _away_from_zero(rng, shape, margin=0.05):
    """Returns a leaf with values in +-[margin, 1], clear of activation kinks."""
    values = rng.uniform(margin, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Tensor(values, requires_grad=True)


def _tiny_model(seed, channels=2, **kwargs):
    cfg = N.ModelConfig(channels=channels, fe_blocks=1, prop_blocks=1, rec_blocks=1,
                        gcfb_count=1, prop_rounds=1, seed=seed, **kwargs)
    return N.CfdModel(cfg)


def _params(model, prefix):
    return [p for name, p in model.named_parameters() if name.startswith(prefix)]


def _random_flow(rng, shape, magnitude=1.5):
    return F.FlowField(rng.uniform(-magnitude, magnitude, size=shape),
                       rng.uniform(-magnitude, magnitude, size=shape))


def _elementwise_cases():
    """Yields (name, builder(rng, seed) -> (func, inputs))."""
    shape = (2, 3, 4, 4)
    yield "add", lambda rng, seed: (T.add, [_leaf(rng, shape), _leaf(rng, (1, 3, 1, 1))])
    yield "sub", lambda rng, seed: (T.sub, [_leaf(rng, shape), _leaf(rng, shape)])
    yield "mul", lambda rng, seed: (T.mul, [_leaf(rng, shape), _leaf(rng, (1, 3, 1, 4))])
    yield "sqrt", lambda rng, seed: (T.sqrt, [_leaf(rng, shape, 0.5, 2.0)])
    yield "total", lambda rng, seed: (T.total, [_leaf(rng, shape)])
    yield "mean", lambda rng, seed: (T.mean, [_leaf(rng, shape)])
    for kind in T.ACTIVATIONS:
        yield "activation_" + kind, lambda rng, seed, kind=kind: (
            lambda x: T.activation(x, kind), [_away_from_zero(rng, shape)])


def _structured_cases():
    yield "conv2d", lambda rng, seed: (
        lambda x, w, b: T.conv2d(x, w, b, padding=1),
        [_leaf(rng, (2, 3, 5, 5)), _leaf(rng, (4, 3, 3, 3)), _leaf(rng, (1, 4, 1, 1))])
    yield "conv1x1", lambda rng, seed: (
        T.conv1x1, [_leaf(rng, (1, 4, 4, 4)), _leaf(rng, (2, 4, 1, 1)), _leaf(rng, (1, 2, 1, 1))])
    yield "depthwise_conv2d", lambda rng, seed: (
        lambda x, w, b: T.depthwise_conv2d(x, w, b, padding=1),
        [_leaf(rng, (1, 3, 5, 5)), _leaf(rng, (3, 1, 3, 3)), _leaf(rng, (1, 3, 1, 1))])
    yield "layer_norm", lambda rng, seed: (
        lambda x, g, b: T.layer_norm(x, g, b, conf.LayerNormEpsilon),
        [_leaf(rng, (2, 3, 4, 4)), _leaf(rng, (1, 3, 1, 1), 0.5, 1.5), _leaf(rng, (1, 3, 1, 1))])
    yield "pixel_shuffle", lambda rng, seed: (
        lambda x: T.pixel_shuffle(x, 2), [_leaf(rng, (1, 8, 3, 3))])
    yield "pixel_unshuffle", lambda rng, seed: (
        lambda x: T.pixel_unshuffle(x, 2), [_leaf(rng, (1, 2, 4, 6))])
    yield "concat_split", lambda rng, seed: (
        lambda a, b: T.split_channels(T.concat_channels([a, b]), [1, 4]),
        [_leaf(rng, (1, 2, 3, 3)), _leaf(rng, (1, 3, 3, 3))])
    yield "bilinear_sample", lambda rng, seed: _bilinear_case(rng)
    yield "where", lambda rng, seed: _where_case(rng)
    yield "dac", lambda rng, seed: (N.dac, [_leaf(rng, (1, 3, 4, 4)), _leaf(rng, (1, 3, 4, 4))])
    yield "warp", lambda rng, seed: _warp_case(rng)
    yield "residual_block", lambda rng, seed: _block_case(
        rng, seed, "extract.block0", lambda m, x: N.residual_block(x, m, "extract.block0"))
    yield "residual_block_x2", lambda rng, seed: _two_blocks_case(rng, seed)
    yield "feedback_convgru", lambda rng, seed: _convgru_case(rng, seed)
    yield "gcfb", lambda rng, seed: _gcfb_case(rng, seed)
    yield "reconstruct", lambda rng, seed: _reconstruct_case(rng, seed)
    yield "fft_loss", lambda rng, seed: (
        losses.fft_loss, [_leaf(rng, (1, 2, 5, 6)), Tensor(rng.uniform(size=(1, 2, 5, 6)))])


def _bilinear_case(rng):
    coords = np.stack([rng.uniform(-1, 6, size=(2, 4, 7)),   # x past both borders
                       rng.uniform(-1, 5, size=(2, 4, 7))], axis=1)
    return (lambda x: T.bilinear_sample(x, coords), [_leaf(rng, (2, 2, 5, 6))])


def _where_case(rng):
    mask = rng.uniform(size=(1, 2, 3, 3)) > 0.5
    return (lambda a, b: T.where(mask, a, b), [_leaf(rng, (1, 2, 3, 3)), _leaf(rng, (1, 2, 3, 3))])


def _warp_case(rng):
    flow = _random_flow(rng, (5, 5))
    return (lambda h: N.warp(h, flow), [_leaf(rng, (1, 3, 5, 5))])


def _block_case(rng, seed, prefix, func):
    model = _tiny_model(seed)
    x = _leaf(rng, (1, 2, 5, 5))
    return (lambda *args: func(model, x), [x] + _params(model, prefix))


def _two_blocks_case(rng, seed):
    model = N.CfdModel(N.ModelConfig(channels=2, fe_blocks=2, prop_blocks=1, rec_blocks=1,
                                     gcfb_count=1, prop_rounds=1, seed=seed))
    x = _leaf(rng, (1, 2, 5, 5))
    chain = lambda *args: N.residual_block(N.residual_block(x, model, "extract.block0"),
                                           model, "extract.block1")
    return (chain, [x] + _params(model, "extract.block"))


def _convgru_case(rng, seed):
    model = _tiny_model(seed)
    inputs = [_leaf(rng, (1, 2, 4, 4)) for _ in range(3)]
    return (lambda *args: N.feedback_convgru(inputs[0], inputs[1], inputs[2], model),
            inputs + [p for p in _params(model, "cfp.") if not p.name.startswith("cfp.gcfb")])


def _gcfb_case(rng, seed):
    model = _tiny_model(seed)
    r, h = _leaf(rng, (1, 2, 4, 4)), _leaf(rng, (1, 2, 4, 4))
    return (lambda *args: N.gcfb(r, h, model, 0), [r, h] + _params(model, "cfp.gcfb0"))


def _reconstruct_case(rng, seed):
    model = _tiny_model(seed)
    feats = [_leaf(rng, (1, 2, 3, 3)) for _ in range(4)]
    lr = _leaf(rng, (1, 3, 3, 3), 0.0, 1.0)
    return (lambda *args: N.reconstruct(feats[0], feats[1], feats[2], feats[3], lr, model),
            feats + [lr] + _params(model, "rec."))


def _charbonnier_case(rng, seed):
    return (lambda a, b: losses.charbonnier(a, b, conf.CharbonnierEpsilon),
            [_leaf(rng, (1, 3, 4, 4)), Tensor(rng.uniform(-1, 1, size=(1, 3, 4, 4)))])


def _model_loss(seed):
    """Returns (func, inputs) for the total loss of a tiny model over two 8x8 frames."""
    model = _tiny_model(seed, channels=4)
    rng = T.make_rng(seed, "gradcheck:model")
    frames = [Tensor(rng.uniform(size=(1, 3, 8, 8))) for _ in range(2)]
    targets = [Tensor(rng.uniform(size=(1, 3, 32, 32))) for _ in range(2)]
    flows = F.FlowSet([_random_flow(rng, (8, 8))], [_random_flow(rng, (8, 8))])

    def func(*args):
        result = None
        for out, gt in zip(model.forward(frames, flows), targets):
            loss = losses.total_loss(out, gt)[0]
            result = loss if result is None else result + loss
        return result
    return func, model.parameters()



class GradcheckReport(object):
    """Outcome of a gradient check suite run."""

    def __init__(self, seed, trials):
        self.seed, self.trials = seed, trials
        self.checks = []


    def add(self, name, tolerance, errors, entry_errors=()):
        """
        Records a check, passed if every norm-wise error is below tolerance.

        @param   errors        norm-wise relative error per trial
        @param   entry_errors  largest per-entry relative error per trial, informational
        """
        errors = [float(e) for e in errors]
        entry_errors = [float(e) for e in entry_errors]
        passed = bool(all(e < tolerance for e in errors))
        self.checks.append(collections.OrderedDict([
            ("name", name), ("tolerance", tolerance), ("trials", len(errors)),
            ("max_error", max(errors) if errors else 0.0),
            ("max_entry_error", max(entry_errors) if entry_errors else 0.0), ("passed", passed),
        ]))
        log = logger.debug if passed else logger.warning
        log("Gradient check %s: max relative error %.3g, tolerance %g, %s.",
            name, max(errors) if errors else 0.0, tolerance, "passed" if passed else "FAILED")


    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)


    @property
    def failures(self):
        return [c["name"] for c in self.checks if not c["passed"]]


    def to_dict(self):
        return collections.OrderedDict([("seed", self.seed), ("trials", self.trials),
                                        ("passed", self.passed), ("checks", self.checks)])


    def write(self, path):
        with open(path, "w") as f: f.write(json.dumps(self.to_dict(), indent=2) + "\n")



def _dump(directory, stem, inputs, comparison):
    """Writes inputs and analytic and numeric gradients of a failed trial as raw tensors."""
    if not os.path.isdir(directory): os.makedirs(directory)
    indices = [i for i, t in enumerate(inputs) if t.requires_grad]
    for i, t in enumerate(inputs):
        T.write_tensor(os.path.join(directory, "%s.input%s.cfdt" % (stem, i)), t)
    for i, analytic, numeric in zip(indices, comparison.analytic, comparison.numeric):
        for kind, values in (("analytic", analytic), ("numeric", numeric)):
            T.write_tensor(os.path.join(directory, "%s.grad%s.%s.cfdt" % (stem, i, kind)),
                           Tensor(values))
    logger.info("Wrote inputs and gradients of failed check %s to %s.", stem, directory)


def run_suite(seed=0, trials=None, step=None, tolerance=None, include_model=True,
              dump_dir=None):
    """
    Runs every gradient check for the given number of random trials each.

    @param   seed       root seed, trial inputs derive from it by case name
    @param   trials     trials per check, defaults to conf.GradcheckTrials
    @param   dump_dir   directory for raw tensor files of failed trials,
                        named like "conv2d_3.input0.cfdt" and
                        "conv2d_3.grad0.numeric.cfdt"
    @return             GradcheckReport
    """
    trials = conf.GradcheckTrials if trials is None else trials
    step = conf.GradcheckStep if step is None else step
    tolerance = conf.GradcheckTolerance if tolerance is None else tolerance
    report = GradcheckReport(seed, trials)
    cases = [(n, b, ELEMENTWISE_TOLERANCE) for n, b in _elementwise_cases()] + \
            [(n, b, tolerance) for n, b in _structured_cases()] + \
            [("charbonnier", _charbonnier_case, ELEMENTWISE_TOLERANCE)]
    for name, builder, limit in cases:
        errors, entry_errors = [], []
        for trial in range(trials):
            rng = T.make_rng(seed, "gradcheck:%s:%s" % (name, trial))
            func, inputs = builder(rng, seed * 1000 + trial)
            result = T.compare_gradients(func, inputs, step=step, seed=trial)
            errors.append(result.error)
            entry_errors.append(result.max_entry_error)
            if dump_dir and not result.error < limit:
                _dump(dump_dir, "%s_%s" % (name, trial), inputs, result)
        report.add(name, limit, errors, entry_errors)
    if include_model:
        func, inputs = _model_loss(seed)
        result = T.compare_gradients(func, inputs, step=step, seed=seed, elements=MODEL_ELEMENTS)
        if dump_dir and not result.error < MODEL_TOLERANCE:
            _dump(dump_dir, "model_total_loss", inputs, result)
        report.add("model_total_loss", MODEL_TOLERANCE, [result.error], [result.max_entry_error])
    return report

# -*- coding: utf-8 -*-
"""
Desk-scale training loop: random co-located patches from one clip, the
total loss accumulated over a batch of patch sequences, Adam with cosine
annealing, CSV progress log and periodic checkpoints.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     17.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import collections
import csv
import logging
import os
import time

import numpy as np

from . import conf
from . import data
from . import losses
from . import metrics
from . import network
from . flow import FlowSet
from . tensor import GradTape, Tensor

logger = logging.getLogger(__name__)


"""Columns of the training log CSV."""
LOG_COLUMNS = ["step", "lr", "charbonnier", "fft", "total", "wall_ms"]

"""Window of the moving average over per-step losses."""
SMOOTHING_WINDOW = 200

"""Precisions accepted by TrainingConfig."""
PRECISIONS = {"float64": np.float64, "float32": np.float32}


class TrainingConfig(object):
    """Training loop settings, defaults from conf."""

    FIELDS = ("batch_size", "patch_size", "steps", "lr_max", "lr_min", "seed", "precision",
              "log_interval", "checkpoint_interval")


    def __init__(self, batch_size=None, patch_size=None, steps=None, lr_max=None, lr_min=None,
                 seed=0, precision=None, log_interval=None, checkpoint_interval=None):
        self.batch_size = conf.TrainBatchSize if batch_size is None else batch_size
        self.patch_size = conf.TrainPatchSize if patch_size is None else patch_size
        self.steps      = conf.TrainSteps     if steps      is None else steps
        self.lr_max     = conf.LearningRateMax if lr_max    is None else lr_max
        self.lr_min     = conf.LearningRateMin if lr_min    is None else lr_min
        self.precision  = conf.Precision      if precision  is None else precision
        self.log_interval = conf.LogInterval  if log_interval is None else log_interval
        self.checkpoint_interval = conf.CheckpointInterval if checkpoint_interval is None \
                                   else checkpoint_interval
        self.seed = seed
        for name in ("batch_size", "patch_size"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise conf.ConfigError("training.%s must be an integer >= 1, got %r"
                                       % (name, getattr(self, name)))
        for name in ("steps", "seed", "log_interval", "checkpoint_interval"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise conf.ConfigError("training.%s must be a non-negative integer, got %r"
                                       % (name, getattr(self, name)))
        if not 0 <= self.lr_min <= self.lr_max:
            raise conf.ConfigError("training.lr_min must be within [0, lr_max], got %r"
                                   % (self.lr_min, ))
        if self.precision not in PRECISIONS:
            raise conf.ConfigError("training.precision must be one of %s, got %r"
                                   % (", ".join(sorted(PRECISIONS)), self.precision))


    @property
    def dtype(self):
        return PRECISIONS[self.precision]


    def to_dict(self):
        return collections.OrderedDict((k, getattr(self, k)) for k in self.FIELDS)


    @classmethod
    def from_dict(cls, values):
        unknown = sorted(set(values) - set(cls.FIELDS))
        if unknown: raise conf.ConfigError("unknown key training.%s" % unknown[0])
        return cls(**values)



class Trainer(object):
    """
    Trains a model on patches of one clip with HR targets and flows.

    Writes train_log.csv, checkpoints and the final model.cfdm under output
    directory, if given.
    """

    def __init__(self, sequence, model_config, loss_config=None, training_config=None,
                 output_dir=None):
        if sequence.hr_targets is None:
            raise conf.ConfigError("training data %r has no HR targets" % sequence.name)
        if sequence.gt_flows is None and len(sequence) > 1:
            raise conf.ConfigError("training data %r has no flows" % sequence.name)
        self.sequence = sequence
        self.loss_config = loss_config or losses.LossConfig()
        self.config = training_config or TrainingConfig()
        self.output_dir = output_dir
        self.model = network.CfdModel(model_config, dtype=self.config.dtype)
        self.state = losses.OptimState(self.model.parameters())
        self.history = []  # [total loss per step]
        if sequence.gt_flows is None: sequence.gt_flows = FlowSet([], [])


    def step(self, index):
        """Runs one optimizer step, returns log row dictionary."""
        started = time.time()
        cfg, dtype = self.config, self.config.dtype
        lr = losses.cosine_lr(index, cfg.steps, cfg.lr_max, cfg.lr_min)
        patches = data.sample_patches(self.sequence, cfg.patch_size, cfg.batch_size,
                                      cfg.seed, key="patches:%s" % index)
        self.model.zero_grad()
        sums = collections.Counter()
        for patch in patches:
            targets = [Tensor(x[None], dtype=dtype) for x in patch.hr_targets]
            with GradTape() as tape:
                outputs = self.model.forward(patch.tensors(dtype), patch.gt_flows)
                loss = None
                for out, gt in zip(outputs, targets):
                    total, char, freq = losses.total_loss(out, gt, self.loss_config)
                    sums["charbonnier"] += char.item()
                    sums["fft"] += freq.item() if freq is not None else 0.0
                    loss = total if loss is None else loss + total
                loss = loss * (1.0 / (len(outputs) * len(patches)))
            tape.backward(loss)
            sums["total"] += loss.item()
        params = self.model.parameters()
        losses.adam_step(params, [p.grad for p in params], self.state, lr)
        count = float(len(patches) * len(self.sequence))
        row = collections.OrderedDict([
            ("step", index + 1), ("lr", lr), ("charbonnier", sums["charbonnier"] / count),
            ("fft", sums["fft"] / count), ("total", sums["total"]),
            ("wall_ms", int(round((time.time() - started) * 1000))),
        ])
        self.history.append(row["total"])
        return row


    def run(self):
        """Runs all configured steps, returns summary dictionary."""
        metrics.log_param_count(self.model)
        logger.info("Training %s steps on %r, batch %s, patch %s.", self.config.steps,
                    self.sequence.name, self.config.batch_size, self.config.patch_size)
        logfile = writer = None
        if self.output_dir:
            if not os.path.isdir(self.output_dir): os.makedirs(self.output_dir)
            logfile = open(os.path.join(self.output_dir, "train_log.csv"), "w", newline="")
            writer = csv.DictWriter(logfile, LOG_COLUMNS)
            writer.writeheader()
        try:
            for index in range(self.config.steps):
                row = self.step(index)
                if writer: writer.writerow(row)
                if self.config.log_interval and not row["step"] % self.config.log_interval:
                    logger.info("Step %s/%s: lr %.3g, loss %.6f (smoothed %.6f).", row["step"],
                                self.config.steps, row["lr"], row["total"], self.smoothed()[-1])
                interval = self.config.checkpoint_interval
                if self.output_dir and interval and not row["step"] % interval:
                    self.save(os.path.join(self.output_dir, "checkpoint_%06d.cfdm" % row["step"]))
        finally:
            if logfile: logfile.close()
        if self.output_dir: self.save(os.path.join(self.output_dir, "model.cfdm"))
        summary = self.evaluate()
        summary["steps"] = self.config.steps
        summary["final_loss"] = self.history[-1] if self.history else None
        logger.info("Training done: Y-PSNR %.2f dB, bicubic baseline %.2f dB.",
                    summary["model_psnr"], summary["bicubic_psnr"])
        return summary


    def smoothed(self, window=None):
        """Returns the moving average of per-step losses over trailing window steps."""
        window = window or SMOOTHING_WINDOW
        values = np.asarray(self.history, dtype=np.float64)
        if not values.size: return []
        sums = np.cumsum(np.concatenate([[0.0], values]))
        starts = np.maximum(np.arange(1, values.size + 1) - window, 0)
        ends = np.arange(1, values.size + 1)
        return ((sums[ends] - sums[starts]) / (ends - starts)).tolist()


    def evaluate(self):
        """Returns mean Y-PSNR on the full clip for the model and for bicubic upsampling."""
        seq, scale = self.sequence, self.model.config.scale
        outputs = self.model.forward(seq.tensors(self.config.dtype), seq.gt_flows)
        h, w = seq.shape
        model_psnr, bicubic_psnr = [], []
        for out, lr, hr in zip(outputs, seq.frames, seq.hr_targets):
            result = np.clip(out.data[0].astype(np.float64), 0, 1)
            baseline = np.clip(data.resize_bicubic(lr, h * scale, w * scale), 0, 1)
            model_psnr.append(metrics.psnr(result, hr, "y"))
            bicubic_psnr.append(metrics.psnr(baseline, hr, "y"))
        result = collections.OrderedDict([("model_psnr", float(np.mean(model_psnr))),
                                          ("bicubic_psnr", float(np.mean(bicubic_psnr)))])
        result["gain"] = result["model_psnr"] - result["bicubic_psnr"]
        return result


    def save(self, path):
        network.save_checkpoint(self.model, path)
        logger.info("Saved checkpoint %s.", path)

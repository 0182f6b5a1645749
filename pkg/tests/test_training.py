# -*- coding: utf-8 -*-
"""
Tests for training configuration and the training loop.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     19.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import csv
import math

import numpy as np
import pytest

from cfdprop import conf
from cfdprop import data
from cfdprop import main
from cfdprop import network
from cfdprop import training


def short_config(**kwargs):
    values = dict(batch_size=1, patch_size=8, steps=3, log_interval=1, checkpoint_interval=2)
    values.update(kwargs)
    return training.TrainingConfig(**values)



class TestTrainingConfig(object):

    def test_defaults(self):
        cfg = training.TrainingConfig()
        assert cfg.steps == conf.TrainSteps and cfg.dtype is np.float64
        assert list(cfg.to_dict()) == list(training.TrainingConfig.FIELDS)


    @pytest.mark.parametrize("kwargs, match", [
        ({"batch_size": 0}, "training.batch_size"),
        ({"patch_size": 2.5}, "training.patch_size"),
        ({"steps": -1}, "training.steps"),
        ({"lr_min": 1.0, "lr_max": 0.1}, "training.lr_min"),
        ({"precision": "float16"}, "training.precision"),
    ])
    def test_invalid(self, kwargs, match):
        with pytest.raises(conf.ConfigError, match=match):
            training.TrainingConfig(**kwargs)


    def test_unknown_key(self):
        with pytest.raises(conf.ConfigError, match="unknown key training.epochs"):
            training.TrainingConfig.from_dict({"epochs": 5})



class TestTrainer(object):

    def test_requires_targets_and_flows(self, tiny_config):
        lr_only = data.VideoSequence([np.zeros((3, 8, 8))] * 2, name="bare")
        with pytest.raises(conf.ConfigError, match="no HR targets"):
            training.Trainer(lr_only, tiny_config)
        seq = data.synth_sequence("translate", 2, 8, (1, 0))
        seq.gt_flows = None
        with pytest.raises(conf.ConfigError, match="no flows"):
            training.Trainer(seq, tiny_config)


    def test_short_run(self, tiny_config, tmp_path):
        seq = data.synth_sequence("translate", 3, 16, (1, 0), seed=2)
        trainer = training.Trainer(seq, tiny_config, training_config=short_config(),
                                   output_dir=str(tmp_path))
        summary = trainer.run()

        with open(str(tmp_path / "train_log.csv")) as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == training.LOG_COLUMNS
        assert [int(r["step"]) for r in rows] == [1, 2, 3]
        assert all(math.isfinite(float(r["total"])) for r in rows)
        assert float(rows[0]["lr"]) == pytest.approx(conf.LearningRateMax)
        assert (tmp_path / "checkpoint_000002.cfdm").is_file()

        model = network.load_checkpoint(str(tmp_path / "model.cfdm"))
        assert model.config == tiny_config
        for name, param in trainer.model.named_parameters():
            assert np.array_equal(model[name].data, param.data)
        assert summary["steps"] == 3 and summary["final_loss"] == trainer.history[-1]
        assert summary["gain"] == pytest.approx(summary["model_psnr"] - summary["bicubic_psnr"])


    def test_steps_change_parameters(self, tiny_config):
        seq = data.synth_sequence("translate", 2, 8, (1, 0), seed=2)
        trainer = training.Trainer(seq, tiny_config, training_config=short_config(steps=1))
        before = {n: p.data.copy() for n, p in trainer.model.named_parameters()}
        row = trainer.step(0)
        assert row["step"] == 1 and row["total"] > 0
        changed = [n for n, p in trainer.model.named_parameters()
                   if not np.array_equal(before[n], p.data)]
        assert changed and 1 == trainer.state.step


    def test_same_seed_same_losses(self, tiny_config):
        seq = data.synth_sequence("translate", 2, 8, (1, 0), seed=2)
        runs = [training.Trainer(seq, tiny_config, training_config=short_config(steps=2))
                for _ in range(2)]
        for trainer in runs:
            for index in range(2): trainer.step(index)
        assert runs[0].history == runs[1].history


    def test_single_frame_without_flows(self, tiny_config):
        seq = data.synth_sequence("translate", 1, 8, (0, 0))
        seq.gt_flows = None
        trainer = training.Trainer(seq, tiny_config, training_config=short_config(steps=1))
        assert math.isfinite(trainer.step(0)["total"])


    def test_smoothed(self, tiny_config):
        seq = data.synth_sequence("translate", 1, 8, (0, 0))
        trainer = training.Trainer(seq, tiny_config)
        assert [] == trainer.smoothed()
        trainer.history = [4.0, 2.0, 0.0, 6.0]
        assert trainer.smoothed(window=2) == [4.0, 3.0, 1.0, 3.0]
        assert trainer.smoothed()[-1] == 3.0


    @pytest.mark.slow
    def test_beats_bicubic(self):
        run = main.RunConfig()
        seq = data.synth_sequence("translate", conf.TrainFrames, 2 * conf.TrainPatchSize,
                                  (1.0, 0.5), seed=0)
        trainer = training.Trainer(seq, run.model, run.loss, run.training)
        summary = trainer.run()
        assert summary["gain"] >= 1.5
        smoothed = trainer.smoothed()
        window = training.SMOOTHING_WINDOW
        checkpoints = smoothed[window - 1::window]
        assert all(a >= b for a, b in zip(checkpoints, checkpoints[1:]))

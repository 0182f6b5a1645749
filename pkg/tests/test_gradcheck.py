# -*- coding: utf-8 -*-
"""
Tests for the gradient check suite and its report.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     19.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import json

import numpy as np
import pytest

from cfdprop import gradcheck
from cfdprop import tensor as T


@pytest.fixture(scope="module")
def quick_report():
    return gradcheck.run_suite(seed=0, trials=2, include_model=False)



class TestGradcheckSuite(object):

    def test_quick_suite_passes(self, quick_report):
        assert quick_report.passed, quick_report.failures
        names = [c["name"] for c in quick_report.checks]
        for name in ("conv2d", "layer_norm", "bilinear_sample", "dac", "warp",
                     "feedback_convgru", "gcfb", "reconstruct", "fft_loss", "charbonnier"):
            assert name in names
        assert all(2 == c["trials"] for c in quick_report.checks)


    def test_report_is_deterministic(self, quick_report, tmp_path):
        again = gradcheck.run_suite(seed=0, trials=2, include_model=False)
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        quick_report.write(str(first))
        again.write(str(second))
        assert first.read_bytes() == second.read_bytes()
        assert json.loads(first.read_text())["passed"] is True


    def test_failures_listed(self):
        report = gradcheck.GradcheckReport(3, 1)
        report.add("ok", 1e-3, [1e-6])
        report.add("bad", 1e-3, [1e-6, 0.5])
        assert not report.passed and ["bad"] == report.failures
        assert report.to_dict()["checks"][1]["max_error"] == 0.5


    def test_entry_errors_reported(self, quick_report):
        report = gradcheck.GradcheckReport(0, 2)
        report.add("x", 1e-3, [1e-5, 2e-5], [4e-4, 0.3])
        check = report.to_dict()["checks"][0]
        assert check["passed"] and check["max_entry_error"] == 0.3
        assert all(c["max_entry_error"] >= 0 for c in quick_report.checks)


    def test_failed_trials_written_as_tensors(self, tmp_path):
        report = gradcheck.run_suite(seed=0, trials=1, tolerance=0.0, include_model=False,
                                     dump_dir=str(tmp_path))
        assert "conv2d" in report.failures and "add" not in report.failures
        x = T.read_tensor(str(tmp_path / "conv2d_0.input0.cfdt"))
        assert x.shape == (2, 3, 5, 5)
        analytic = T.read_tensor(str(tmp_path / "conv2d_0.grad1.analytic.cfdt")).data
        numeric = T.read_tensor(str(tmp_path / "conv2d_0.grad1.numeric.cfdt")).data
        assert analytic.shape == numeric.shape == (4, 3, 3, 3)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-3, atol=1e-6)
        assert not list(tmp_path.glob("add_*"))


    @pytest.mark.slow
    def test_full_suite(self):
        report = gradcheck.run_suite(seed=0)
        assert report.passed, report.failures
        assert "model_total_loss" == report.checks[-1]["name"]

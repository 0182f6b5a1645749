# -*- coding: utf-8 -*-
"""
Tests for flow fields, .flo files, flow estimation and warping.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     19.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import logging

import numpy as np
import pytest

from cfdprop import data
from cfdprop import flow as F
from cfdprop import metrics
from cfdprop.tensor import DimensionError, FormatError


@pytest.fixture(scope="module")
def texture():
    """Smooth RGB texture 80x80 without the detail band, for cropping shifted pairs."""
    return data.synth_sequence("translate", 1, 80, (0, 0), seed=5, detail=0.0).frames[0]


def shifted_pair(texture, dx, dy, size=64, margin=8):
    """Returns (ref, target) with target(x + (dx, dy)) == ref(x)."""
    ref = texture[:, margin:margin + size, margin:margin + size]
    target = texture[:, margin - dy:margin - dy + size, margin - dx:margin - dx + size]
    return ref, target


def interior_mean(field, margin=4):
    return (field.u[margin:-margin, margin:-margin].mean(),
            field.v[margin:-margin, margin:-margin].mean())



class TestFlowField(object):

    def test_component_shapes_checked(self):
        with pytest.raises(DimensionError):
            F.FlowField(np.zeros((2, 3)), np.zeros((3, 2)))


    def test_coords(self):
        coords = F.gt_translation_flow((2, 3), 1.5, -1).coords()
        assert coords.shape == (1, 2, 2, 3)
        assert coords[0, 0, 1].tolist() == [1.5, 2.5, 3.5]
        assert coords[0, 1, 1].tolist() == [0.0, 0.0, 0.0]


    def test_crop(self):
        field = F.FlowField(np.arange(16.0).reshape(4, 4), np.zeros((4, 4)))
        crop = field.crop(1, 2, 2, 2)
        assert crop.shape == (2, 2)
        assert crop.u.tolist() == [[6.0, 7.0], [10.0, 11.0]]


    def test_flow_set_validate(self):
        zero = F.gt_translation_flow((4, 4), 0, 0)
        F.FlowSet([zero, zero], [zero, zero]).validate(3, (4, 4))
        with pytest.raises(DimensionError, match="missing backward flow for timestep 2"):
            F.FlowSet([zero, zero], [zero]).validate(3)
        with pytest.raises(DimensionError, match="has size"):
            F.FlowSet([zero], [zero]).validate(2, (5, 4))



class TestGroundTruth(object):

    def test_translation(self):
        field = F.gt_translation_flow((4, 4), 1, 0)
        assert (field.u == 1).all() and (field.v == 0).all()
        zero = F.gt_translation_flow((4, 4), 0, 0)
        assert not zero.u.any() and not zero.v.any()


    def test_rotation_zero_angle(self):
        field = F.gt_rotation_flow((5, 7), 0)
        assert np.allclose(field.u, 0) and np.allclose(field.v, 0)


    def test_rotation_quarter_turn(self):
        field = F.gt_rotation_flow((5, 5), 90)
        assert abs(field.u[2, 2]) < 1e-12 and abs(field.v[2, 2]) < 1e-12  # center stays
        np.testing.assert_allclose([field.u[2, 3], field.v[2, 3]], [-1, 1], atol=1e-12)


    def test_rotation_inverse(self):
        center = (3.0, 2.0)
        fwd, bwd = F.gt_rotation_flow((6, 8), 5, center), F.gt_rotation_flow((6, 8), -5, center)
        yy, xx = np.mgrid[0:6, 0:8].astype(float)
        # Rotating forth then back returns every point to itself
        x1, y1 = xx + fwd.u, yy + fwd.v
        rad = np.deg2rad(-5)
        x2 = center[0] + np.cos(rad) * (x1 - center[0]) - np.sin(rad) * (y1 - center[1])
        y2 = center[1] + np.sin(rad) * (x1 - center[0]) + np.cos(rad) * (y1 - center[1])
        np.testing.assert_allclose(x2, xx, atol=1e-12)
        np.testing.assert_allclose(y2, yy, atol=1e-12)
        assert bwd.is_finite()



class TestEstimateFlow(object):

    def test_identical_frames(self, texture):
        ref, _ = shifted_pair(texture, 0, 0)
        field = F.estimate_flow(ref, ref)
        assert np.abs(field.u).max() < 1e-6 and np.abs(field.v).max() < 1e-6


    @pytest.mark.parametrize("dx, dy", [(2, 0), (1, 0), (0, 3), (-2, 1), (4, 0), (0, -4)])
    def test_integer_translation(self, texture, dx, dy):
        ref, target = shifted_pair(texture, dx, dy)
        u, v = interior_mean(F.estimate_flow(ref, target))
        assert abs(u - dx) < 0.25 and abs(v - dy) < 0.25


    def test_subpixel_translation(self, texture):
        ref, _ = shifted_pair(texture, 0, 0)
        target = F.warp_frame(ref, F.gt_translation_flow(ref.shape[1:], -0.5, 0.5))
        u, v = interior_mean(F.estimate_flow(ref, target))
        assert abs(u - 0.5) < 0.25 and abs(v + 0.5) < 0.25


    def test_small_frames_reduce_levels(self, caplog):
        frame = np.random.default_rng(0).uniform(size=(3, 6, 6))
        with caplog.at_level(logging.WARNING, logger="cfdprop.flow"):
            field = F.estimate_flow(frame, frame, levels=3)
        assert field.shape == (6, 6)
        assert "too small for 3 pyramid levels" in caplog.text


    @pytest.mark.parametrize("h, w", [(1, 8), (8, 1), (1, 1)])
    def test_single_pixel_axis(self, h, w):
        rng = np.random.default_rng(1)
        ref, target = rng.uniform(size=(3, h, w)), rng.uniform(size=(3, h, w))
        field = F.estimate_flow(ref, target)
        assert field.shape == (h, w)
        assert np.isfinite(field.u).all() and np.isfinite(field.v).all()
        if 1 == h: assert not field.v.any()
        if 1 == w: assert not field.u.any()


    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            F.estimate_flow(np.zeros((3, 8, 8)), np.zeros((3, 8, 9)))


    def test_sequence_flows(self):
        seq = data.synth_sequence("translate", 3, 64, (1, 0), seed=2)
        flows = F.estimate_sequence_flows(seq.frames)
        assert len(flows.forward) == len(flows.backward) == 2
        for fwd, bwd in zip(flows.forward, flows.backward):
            assert abs(interior_mean(fwd)[0] - 1) < 0.25
            assert abs(interior_mean(bwd)[0] + 1) < 0.25



class TestWarpFrame(object):

    def test_ground_truth_inverts_translation(self):
        seq = data.synth_sequence("translate", 3, 32, (2, 0), seed=1)
        crop = lambda x: x[:, 4:-4, 4:-4]
        for t in range(2):
            back = F.warp_frame(seq.frames[t + 1], seq.gt_flows.backward[t])
            ahead = F.warp_frame(seq.frames[t], seq.gt_flows.forward[t])
            assert metrics.psnr(crop(back), crop(seq.frames[t])) > 40
            assert metrics.psnr(crop(ahead), crop(seq.frames[t + 1])) > 40


    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            F.warp_frame(np.zeros((3, 4, 4)), F.gt_translation_flow((4, 5), 0, 0))



class TestFloFile(object):

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        field = F.FlowField(rng.normal(size=(8, 6)).astype(np.float32),
                            rng.normal(size=(8, 6)).astype(np.float32))
        path = str(tmp_path / "a.flo")
        F.write_flo(field, path)
        result = F.read_flo(path)
        assert result.shape == (8, 6)
        assert result == field


    def test_header(self):
        buffer = F.encode_flo(F.gt_translation_flow((2, 3), 0, 0))
        assert buffer[:4] == b"PIEH"
        assert len(buffer) == 12 + 2 * 3 * 2 * 4


    def test_empty_field(self, tmp_path):
        path = str(tmp_path / "empty.flo")
        F.write_flo(F.FlowField(np.zeros((0, 0)), np.zeros((0, 0))), path)
        assert F.read_flo(path).shape == (0, 0)


    def test_bad_magic(self):
        buffer = b"XXXX" + F.encode_flo(F.gt_translation_flow((2, 2), 1, 1))[4:]
        with pytest.raises(FormatError, match="bad .flo magic at offset 0"):
            F.decode_flo(buffer)


    def test_truncated(self):
        buffer = F.encode_flo(F.gt_translation_flow((2, 2), 1, 1))
        with pytest.raises(FormatError, match="truncated .flo payload at offset %s"
                                               % (len(buffer) - 4)):
            F.decode_flo(buffer[:-4])
        with pytest.raises(FormatError, match="truncated .flo header"):
            F.decode_flo(buffer[:6])

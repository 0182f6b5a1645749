# -*- coding: utf-8 -*-
"""
Tests for network blocks, the assembled model and checkpoint files.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     19.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import numpy as np
import pytest

from cfdprop import conf
from cfdprop import data
from cfdprop import network as N
from cfdprop import tensor as T
from cfdprop.flow import FlowSet, gt_translation_flow
from cfdprop.tensor import DimensionError, FormatError, Tensor


def frames_of(rng, count, h, w):
    return [Tensor(rng.uniform(size=(1, 3, h, w))) for _ in range(count)]


def features_of(rng, count, c, h, w):
    return [Tensor(rng.uniform(-1, 1, size=(1, c, h, w))) for _ in range(count)]



class TestModelConfig(object):

    def test_defaults(self):
        cfg = N.ModelConfig()
        assert (cfg.channels, cfg.scale, cfg.fe_blocks, cfg.prop_blocks, cfg.rec_blocks,
                cfg.gcfb_count, cfg.prop_rounds) == (64, 4, 5, 10, 3, 5, 2)
        assert ("dac", True, "gcfb") == (cfg.alignment, cfg.use_cfp, cfg.cfp_block)


    @pytest.mark.parametrize("kwargs, field", [
        ({"channels": 0}, "model.channels"), ({"scale": 2}, "model.scale"),
        ({"prop_rounds": 0}, "model.prop_rounds"), ({"alignment": "none"}, "model.alignment"),
        ({"cfp_block": "mlp"}, "model.cfp_block"), ({"use_cfp": "yes"}, "model.use_cfp"),
        ({"fe_blocks": 1.5}, "model.fe_blocks"), ({"seed": -1}, "model.seed"),
    ])
    def test_invalid(self, kwargs, field):
        with pytest.raises(conf.ConfigError, match=field):
            N.ModelConfig(**kwargs)


    def test_dict_roundtrip_and_unknown_key(self, tiny_config):
        assert N.ModelConfig.from_dict(tiny_config.to_dict()) == tiny_config
        with pytest.raises(conf.ConfigError, match="unknown key model.depth"):
            N.ModelConfig.from_dict({"depth": 3})



class TestCfdModel(object):

    def test_seeded_parameters(self, tiny_config):
        a, b = N.CfdModel(tiny_config), N.CfdModel(tiny_config)
        other = N.CfdModel(N.ModelConfig.from_dict(dict(tiny_config.to_dict(), seed=8)))
        assert list(a.params) == list(b.params)
        assert all(np.array_equal(a[k].data, b[k].data) for k in a.params)
        assert not np.array_equal(a["extract.conv_in.weight"].data,
                                  other["extract.conv_in.weight"].data)


    def test_parameters_independent_of_construction_order(self):
        one = N.CfdModel(N.ModelConfig(channels=2, fe_blocks=1, prop_blocks=1, rec_blocks=1,
                                       gcfb_count=1, prop_rounds=1))
        two = N.CfdModel(N.ModelConfig(channels=2, fe_blocks=3, prop_blocks=1, rec_blocks=1,
                                       gcfb_count=1, prop_rounds=1))
        for name in one.params:
            assert np.array_equal(one[name].data, two[name].data), name


    def test_parameter_naming(self, tiny_model):
        names = set(tiny_model.params)
        for name in ("extract.conv_in.weight", "prop.forward.warp_block.conv1.bias",
                     "prop.backward.conv_in.weight", "cfp.norm.gamma", "cfp.conv_z.weight",
                     "cfp.conv_w.weight", "cfp.conv_q.bias", "cfp.gcfb0.expand.weight",
                     "cfp.gcfb0.dconv.weight", "cfp.gcfb0.project.weight", "rec.up2.bias",
                     "rec.conv_out.weight"):
            assert name in names
        assert not any(n.startswith("cfp.gcfb") and n.endswith(".bias") for n in names)
        assert all(p.requires_grad and p.name == n for n, p in tiny_model.named_parameters())


    def test_ablation_variants(self, tiny_config):
        base = dict(tiny_config.to_dict())
        sizes = {}
        for key, value in [("alignment", "dac"), ("alignment", "concat"), ("alignment", "warp"),
                           ("use_cfp", False), ("cfp_block", "resblock")]:
            model = N.CfdModel(N.ModelConfig.from_dict(dict(base, **{key: value})))
            sizes[value] = sum(p.size for p in model.parameters())
        assert sizes["dac"] == sizes["warp"] < sizes["concat"]
        assert sizes[False] < sizes["dac"]
        assert not any(n.startswith("cfp.") for n in N.CfdModel(
            N.ModelConfig.from_dict(dict(base, use_cfp=False))).params)


    def test_copy_is_independent(self, tiny_model):
        twin = tiny_model.copy()
        twin.zero_()
        assert tiny_model["rec.conv_out.weight"].data.any()
        assert twin.config == tiny_model.config


    def test_astype(self, tiny_model):
        tiny_model.astype(np.float32)
        assert all(p.dtype == np.float32 for p in tiny_model.parameters())



class TestWarpAndDac(object):

    def test_zero_flow_identity(self, rng):
        h = Tensor(rng.uniform(-1, 1, size=(1, 4, 6, 5)))
        assert np.array_equal(N.warp(h, gt_translation_flow((6, 5), 0, 0)).data, h.data)


    def test_integer_flow_shifts(self, rng):
        h = Tensor(rng.uniform(-1, 1, size=(1, 2, 5, 6)))
        out = N.warp(h, gt_translation_flow((5, 6), 1, 0)).data
        assert np.array_equal(out[..., :-1], h.data[..., 1:])
        out = N.warp(h, gt_translation_flow((5, 6), 0, -2)).data
        assert np.array_equal(out[..., 2:, :], h.data[..., :-2, :])


    def test_warp_size_mismatch(self, rng):
        with pytest.raises(DimensionError):
            N.warp(Tensor(np.zeros((1, 2, 4, 4))), gt_translation_flow((4, 5), 0, 0))


    def test_dac_examples(self):
        w = Tensor(np.array([0.2, 0.7, -0.3]).reshape(1, 3, 1, 1))
        s = Tensor(np.array([-0.5, 0.7, 0.1]).reshape(1, 3, 1, 1))
        assert N.dac(w, s).data.reshape(-1).tolist() == [-0.5, 0.7, -0.3]


    def test_dac_algebra(self):
        rng = np.random.default_rng(99)
        w = rng.uniform(-1, 1, size=(1000, 2, 3, 3))
        s = rng.uniform(-1, 1, size=(1000, 2, 3, 3))
        s[:, :, 0, 0] = -w[:, :, 0, 0]  # ties of equal magnitude
        warped, shallow = Tensor(w), Tensor(s)
        out = N.dac(warped, shallow)
        assert np.array_equal(np.abs(out.data), np.maximum(np.abs(w), np.abs(s)))
        assert np.array_equal(out.data[:, :, 0, 0], w[:, :, 0, 0])
        assert np.array_equal(N.dac(out, shallow).data, out.data)


    def test_dac_keeps_dominant_warped(self, rng):
        w = Tensor(rng.uniform(1, 2, size=(1, 3, 4, 4)))
        s = Tensor(rng.uniform(-1, 1, size=(1, 3, 4, 4)))
        assert np.array_equal(N.dac(w, s).data, w.data)


    def test_dac_shape_mismatch(self):
        with pytest.raises(DimensionError):
            N.dac(Tensor(np.zeros((1, 2, 2, 2))), Tensor(np.zeros((1, 3, 2, 2))))



class TestBlocks(object):

    def test_feature_extract(self, rng):
        model = N.CfdModel(N.ModelConfig(channels=8, fe_blocks=1, prop_blocks=1, rec_blocks=1,
                                         gcfb_count=1))
        feats = N.feature_extract(frames_of(rng, 2, 32, 32), model)
        assert [f.shape for f in feats] == [(1, 8, 32, 32)] * 2
        model.zero_()
        assert not any(f.data.any() for f in N.feature_extract(frames_of(rng, 1, 8, 8), model))


    def test_feature_extract_accepts_sequence(self, tiny_model):
        seq = data.synth_sequence("translate", 2, 8, (1, 0), seed=0)
        assert len(N.feature_extract(seq, tiny_model)) == 2


    def test_propagate_single_frame(self, rng, tiny_model):
        feats = features_of(rng, 1, 4, 6, 6)
        for direction in ("forward", "backward"):
            result = N.propagate(feats, FlowSet([], []), tiny_model, direction)
            assert [h.shape for h in result] == [(1, 4, 6, 6)]


    def test_propagate_zero_weights(self, rng, tiny_model, zero_flows):
        tiny_model.zero_()
        result = N.propagate(features_of(rng, 3, 4, 5, 5), zero_flows(3, (5, 5)), tiny_model,
                             "forward")
        assert not any(h.data.any() for h in result)


    def test_propagate_missing_flow(self, rng, tiny_model):
        zero = gt_translation_flow((5, 5), 0, 0)
        with pytest.raises(DimensionError, match="missing forward flow for timestep 3"):
            N.propagate(features_of(rng, 3, 4, 5, 5), FlowSet([zero], []), tiny_model, "forward")
        with pytest.raises(DimensionError, match="missing backward flow for timestep 2"):
            N.propagate(features_of(rng, 3, 4, 5, 5), FlowSet([], [zero]), tiny_model, "backward")


    def test_propagate_stationary_without_recurrence(self, rng, tiny_model, zero_flows):
        # With the aligned-feature half of the input conv zeroed, h_t depends on f_t only
        C = tiny_model.config.channels
        for direction in ("forward", "backward"):
            tiny_model["prop.%s.conv_in.weight" % direction].data[:, C:] = 0
        f = features_of(rng, 1, C, 6, 6)[0]
        for direction in ("forward", "backward"):
            result = N.propagate([f, f, f], zero_flows(3, (6, 6)), tiny_model, direction)
            assert np.array_equal(result[0].data, result[1].data)
            assert np.array_equal(result[1].data, result[2].data)


    def test_feedback_convgru_zero_params(self, rng, tiny_model):
        tiny_model.zero_()
        r, hf, hb = features_of(rng, 3, 4, 6, 6)
        out = N.feedback_convgru(r, hf, hb, tiny_model)
        assert np.array_equal(out.data, 0.5 * hf.data)


    def test_feedback_convgru_shape_and_channels(self, rng):
        model = N.CfdModel(N.ModelConfig(channels=8, fe_blocks=1, prop_blocks=1, rec_blocks=1,
                                         gcfb_count=1))
        r, hf, hb = features_of(rng, 3, 8, 16, 16)
        assert N.feedback_convgru(r, hf, hb, model).shape == (1, 8, 16, 16)
        with pytest.raises(DimensionError, match="channels"):
            N.feedback_convgru(r, hf, features_of(rng, 1, 4, 16, 16)[0], model)


    def test_gcfb_shapes(self):
        model = N.CfdModel(N.ModelConfig(channels=8, fe_blocks=1, prop_blocks=1, rec_blocks=1,
                                         gcfb_count=1))
        assert model["cfp.gcfb0.expand.weight"].shape == (32, 16, 1, 1)
        assert model["cfp.gcfb0.dconv.weight"].shape == (32, 1, 3, 3)
        assert model["cfp.gcfb0.project.weight"].shape == (8, 16, 1, 1)
        r, hb = features_of(np.random.default_rng(0), 2, 8, 16, 16)
        assert N.gcfb(r, hb, model).shape == (1, 8, 16, 16)


    def test_gcfb_zero_expand(self, rng, tiny_model):
        tiny_model["cfp.gcfb0.expand.weight"].data[...] = 0
        r, hb = features_of(rng, 2, 4, 5, 5)
        assert not N.gcfb(r, hb, tiny_model).data.any()


    def test_cfp_single_and_zero(self, rng, tiny_model):
        hf, hb = features_of(rng, 1, 4, 5, 5), features_of(rng, 1, 4, 5, 5)
        assert len(N.cfp(hf, hb, tiny_model)) == 1
        tiny_model.zero_()
        hf, hb = features_of(rng, 3, 4, 5, 5), features_of(rng, 3, 4, 5, 5)
        assert not any(r.data.any() for r in N.cfp(hf, hb, tiny_model))
        with pytest.raises(DimensionError):
            N.cfp(hf, hb[:2], tiny_model)


    def test_cfp_resblock_variant(self, rng, tiny_config):
        model = N.CfdModel(N.ModelConfig.from_dict(dict(tiny_config.to_dict(),
                                                        cfp_block="resblock")))
        out = N.cfp(features_of(rng, 2, 4, 5, 5), features_of(rng, 2, 4, 5, 5), model)
        assert [r.shape for r in out] == [(1, 4, 5, 5)] * 2


    def test_reconstruct_zero_weights(self, rng, tiny_model):
        tiny_model.zero_()
        f, hf, hb, r = features_of(rng, 4, 4, 32, 32)
        lr = frames_of(rng, 1, 32, 32)[0]
        out = N.reconstruct(f, hf, hb, r, lr, tiny_model)
        assert out.shape == (1, 3, 128, 128)
        assert np.array_equal(out.data, T.resize_bilinear(lr, 128, 128).data)



class TestModelForward(object):

    @pytest.mark.parametrize("count", [1, 2, 5])
    @pytest.mark.parametrize("h, w", [(8, 8), (17, 13), (32, 32)])
    def test_shapes(self, rng, tiny_model, zero_flows, count, h, w):
        frames = [rng.uniform(size=(3, h, w)) for _ in range(count)]
        outputs = N.model_forward(frames, tiny_model, zero_flows(count, (h, w)))
        assert [o.shape for o in outputs] == [(1, 3, 4 * h, 4 * w)] * count
        assert all(np.isfinite(o.data).all() for o in outputs)


    def test_zero_model_is_bilinear_upsampling(self, rng, tiny_model, zero_flows):
        tiny_model.zero_()
        frames = [rng.uniform(size=(3, 8, 6)) for _ in range(2)]
        outputs = N.model_forward(frames, tiny_model, zero_flows(2, (8, 6)))
        for out, frame in zip(outputs, frames):
            expected = T.resize_bilinear(Tensor(frame[None]), 32, 24).data
            assert np.array_equal(out.data, expected)


    def test_stationary_without_recurrence(self, rng, tiny_config, zero_flows):
        cfg = N.ModelConfig.from_dict(dict(tiny_config.to_dict(), use_cfp=False, prop_rounds=2))
        model = N.CfdModel(cfg)
        for direction in ("forward", "backward"):
            model["prop.%s.conv_in.weight" % direction].data[:, cfg.channels:] = 0
        frame = rng.uniform(size=(3, 8, 8))
        outputs = N.model_forward([frame] * 3, model, zero_flows(3, (8, 8)))
        assert np.array_equal(outputs[0].data, outputs[1].data)
        assert np.array_equal(outputs[1].data, outputs[2].data)


    def test_deterministic(self, rng, tiny_config, zero_flows):
        frames = [rng.uniform(size=(3, 8, 8)) for _ in range(3)]
        a = N.model_forward(frames, N.CfdModel(tiny_config), zero_flows(3, (8, 8)))
        b = N.model_forward(frames, N.CfdModel(tiny_config), zero_flows(3, (8, 8)))
        assert all(np.array_equal(x.data, y.data) for x, y in zip(a, b))


    def test_uses_attached_flows(self, tiny_model):
        seq = data.synth_sequence("translate", 3, 8, (1, 0), seed=0)
        direct = tiny_model.forward(seq.tensors(), seq.gt_flows)
        outputs = N.model_forward(seq, tiny_model)
        assert all(np.array_equal(x.data, y.data) for x, y in zip(direct, outputs))


    def test_estimates_missing_flows(self, rng, tiny_model):
        frames = [rng.uniform(size=(3, 8, 8)) for _ in range(2)]
        assert len(N.model_forward(frames, tiny_model)) == 2


    @pytest.mark.parametrize("h, w", [(1, 8), (8, 1), (1, 1)])
    def test_estimates_flows_for_thin_frames(self, rng, tiny_model, h, w):
        frames = [rng.uniform(size=(3, h, w)) for _ in range(2)]
        outputs = N.model_forward(frames, tiny_model)
        assert [o.shape for o in outputs] == [(1, 3, 4 * h, 4 * w)] * 2
        assert all(np.isfinite(o.data).all() for o in outputs)


    def test_empty_sequence(self, tiny_model):
        with pytest.raises(DimensionError):
            N.model_forward([], tiny_model)


    def test_frame_shape_mismatch(self, rng, tiny_model, zero_flows):
        frames = [Tensor(rng.uniform(size=(1, 3, 8, 8))), Tensor(rng.uniform(size=(1, 3, 8, 9)))]
        with pytest.raises(DimensionError, match="frame 2"):
            tiny_model.forward(frames, zero_flows(2, (8, 8)))


    def test_gradients_reach_every_parameter(self, rng, tiny_model, zero_flows):
        frames = frames_of(rng, 2, 6, 6)
        with T.GradTape() as tape:
            outputs = tiny_model(frames, zero_flows(2, (6, 6)))
            loss = T.mean(outputs[0] * outputs[0]) + T.mean(outputs[1])
        tape.backward(loss)
        missing = [n for n, p in tiny_model.named_parameters() if p.grad is None]
        assert not missing



class TestCheckpoint(object):

    def test_roundtrip(self, tiny_model, tmp_path):
        path = str(tmp_path / "model.cfdm")
        N.save_checkpoint(tiny_model, path)
        loaded = N.load_checkpoint(path)
        assert loaded.config == tiny_model.config
        assert list(loaded.params) == list(tiny_model.params)
        for name, param in tiny_model.named_parameters():
            assert np.array_equal(loaded[name].data, param.data)


    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cfdm"
        path.write_bytes(b"XXXX\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="bad checkpoint magic at offset 0"):
            N.load_checkpoint(str(path))


    def test_truncated(self, tiny_model, tmp_path):
        path = tmp_path / "model.cfdm"
        N.save_checkpoint(tiny_model, str(path))
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(FormatError, match="truncated"):
            N.load_checkpoint(str(path))

# -*- coding: utf-8 -*-
"""
The video super-resolution network: feature warping with discriminative
alignment correction, bidirectional recurrent propagation, collaborative
feedback propagation (feedback ConvGRU and gated collaborative feed-forward
blocks), and HR reconstruction. Also model checkpoint file I/O.

Feature lists hold one Tensor (n, C, h, w) per timestep.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     15.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import collections
import json
import logging
import struct

import numpy as np

from . import conf
from . import tensor as T
from . flow import FlowSet, estimate_sequence_flows
from . tensor import DimensionError, FormatError, Tensor

logger = logging.getLogger(__name__)


"""Magic bytes opening a model checkpoint file."""
CHECKPOINT_MAGIC = b"CFDM"

"""Accepted values of ModelConfig.alignment."""
ALIGNMENTS = ("dac", "concat", "warp")

"""Accepted values of ModelConfig.cfp_block."""
CFP_BLOCKS = ("gcfb", "resblock")


class ModelConfig(object):
    """Architecture hyperparameters, defaults from conf."""

    FIELDS = ("channels", "scale", "fe_blocks", "prop_blocks", "rec_blocks", "gcfb_count",
              "prop_rounds", "alignment", "use_cfp", "cfp_block", "seed")


    def __init__(self, channels=None, scale=None, fe_blocks=None, prop_blocks=None,
                 rec_blocks=None, gcfb_count=None, prop_rounds=None, alignment=None,
                 use_cfp=True, cfp_block=None, seed=0):
        self.channels    = conf.Channels             if channels    is None else channels
        self.scale       = conf.Scale                if scale       is None else scale
        self.fe_blocks   = conf.FeatureBlocks        if fe_blocks   is None else fe_blocks
        self.prop_blocks = conf.PropagationBlocks    if prop_blocks is None else prop_blocks
        self.rec_blocks  = conf.ReconstructionBlocks if rec_blocks  is None else rec_blocks
        self.gcfb_count  = conf.GcfbCount            if gcfb_count  is None else gcfb_count
        self.prop_rounds = conf.PropagationRounds    if prop_rounds is None else prop_rounds
        self.alignment   = conf.Alignment            if alignment   is None else alignment
        self.cfp_block   = conf.CfpBlock             if cfp_block   is None else cfp_block
        self.use_cfp     = use_cfp
        self.seed        = seed
        self.validate()


    def validate(self):
        """Raises ConfigError on invalid values."""
        for name in ("channels", "fe_blocks", "prop_blocks", "rec_blocks", "gcfb_count",
                     "prop_rounds"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise conf.ConfigError("model.%s must be an integer >= 1, got %r" % (name, value))
        if self.scale != 4:
            raise conf.ConfigError("model.scale must be 4, got %r" % (self.scale, ))
        if self.alignment not in ALIGNMENTS:
            raise conf.ConfigError("model.alignment must be one of %s, got %r"
                                   % (", ".join(ALIGNMENTS), self.alignment))
        if self.cfp_block not in CFP_BLOCKS:
            raise conf.ConfigError("model.cfp_block must be one of %s, got %r"
                                   % (", ".join(CFP_BLOCKS), self.cfp_block))
        if not isinstance(self.use_cfp, bool):
            raise conf.ConfigError("model.use_cfp must be true or false, got %r" % (self.use_cfp, ))
        if not isinstance(self.seed, int) or self.seed < 0:
            raise conf.ConfigError("model.seed must be a non-negative integer, got %r" % (self.seed, ))


    def to_dict(self):
        return collections.OrderedDict((k, getattr(self, k)) for k in self.FIELDS)


    @classmethod
    def from_dict(cls, data):
        """Returns ModelConfig from a dictionary, rejecting unknown keys."""
        unknown = sorted(set(data) - set(cls.FIELDS))
        if unknown:
            raise conf.ConfigError("unknown key model.%s" % unknown[0])
        return cls(**data)


    def __eq__(self, other):
        return isinstance(other, ModelConfig) and self.to_dict() == other.to_dict()


    def __repr__(self):
        return "ModelConfig(%s)" % ", ".join("%s=%r" % x for x in self.to_dict().items())



class CfdModel(object):
    """
    The assembled parameter set. Parameters are Tensors with requires_grad,
    named by dotted path, initialized from the config seed independently of
    construction order.
    """

    def __init__(self, config=None, dtype=np.float64):
        self.config = config or ModelConfig()
        self.dtype = dtype
        self.params = collections.OrderedDict()
        self._build()


    def _build(self):
        cfg, C = self.config, self.config.channels
        self._conv("extract.conv_in", 3, C, 3)
        for i in range(cfg.fe_blocks): self._resblock("extract.block%s" % i, C)

        prop_in = {"dac": 2 * C, "concat": 3 * C, "warp": 2 * C}[cfg.alignment]
        for direction in ("backward", "forward"):
            prefix = "prop.%s" % direction
            self._resblock(prefix + ".warp_block", C)
            self._conv(prefix + ".conv_in", prop_in, C, 3)
            for i in range(cfg.prop_blocks): self._resblock("%s.block%s" % (prefix, i), C)

        if cfg.use_cfp:
            self._norm("cfp.norm", 3 * C)
            self._conv("cfp.conv_z", 3 * C, C, 3)
            self._conv("cfp.conv_w", 3 * C, C, 3)
            self._conv("cfp.conv_q", 2 * C, C, 3)
            for i in range(cfg.gcfb_count):
                if "gcfb" == cfg.cfp_block:
                    # Bias-free: zero gate input gives zero output
                    self._conv("cfp.gcfb%s.expand" % i, 2 * C, 4 * C, 1, bias=False)
                    self._depthwise("cfp.gcfb%s.dconv" % i, 4 * C, 3)
                    self._conv("cfp.gcfb%s.project" % i, 2 * C, C, 1, bias=False)
                else:
                    self._resblock("cfp.block%s" % i, C)

        self._conv("rec.conv_in", (4 if cfg.use_cfp else 3) * C, C, 3)
        for i in range(cfg.rec_blocks): self._resblock("rec.block%s" % i, C)
        self._conv("rec.up1", C, 4 * C, 3)
        self._conv("rec.up2", C, 4 * C, 3)
        self._conv("rec.conv_out", C, 3, 3)


    def _add(self, name, data):
        param = Tensor(data, requires_grad=True, dtype=self.dtype)
        param.name = name
        self.params[name] = param


    def _conv(self, name, c_in, c_out, k, bias=True):
        fan_in = c_in * k * k
        self._add(name + ".weight", T.init_uniform((c_out, c_in, k, k), fan_in,
                                                   self._rng(name + ".weight"), self.dtype))
        if bias: self._add(name + ".bias", T.init_uniform((1, c_out, 1, 1), fan_in,
                                                 self._rng(name + ".bias"), self.dtype))


    def _depthwise(self, name, c, k):
        self._add(name + ".weight", T.init_uniform((c, 1, k, k), k * k,
                                                   self._rng(name + ".weight"), self.dtype))


    def _norm(self, name, c):
        self._add(name + ".gamma", np.ones((1, c, 1, 1)))
        self._add(name + ".beta", np.zeros((1, c, 1, 1)))


    def _resblock(self, name, c):
        self._conv(name + ".conv1", c, c, 3)
        self._conv(name + ".conv2", c, c, 3)


    def _rng(self, key):
        return T.make_rng(self.config.seed, "param:" + key)


    def __getitem__(self, name):
        return self.params[name]


    def parameters(self):
        return list(self.params.values())


    def named_parameters(self):
        return list(self.params.items())


    def zero_grad(self):
        for p in self.params.values(): p.zero_grad()


    def zero_(self):
        """Sets every parameter to zero, in place."""
        for p in self.params.values(): p.data[...] = 0
        return self


    def astype(self, dtype):
        """Casts all parameters to dtype, in place."""
        self.dtype = dtype
        for name, p in self.params.items(): self.params[name] = p.astype(dtype)
        return self


    def copy(self):
        """Returns an independent model with equal config and parameter values."""
        result = CfdModel.__new__(CfdModel)
        result.config, result.dtype = ModelConfig.from_dict(self.config.to_dict()), self.dtype
        result.params = collections.OrderedDict()
        for name, p in self.params.items(): result._add(name, p.data.copy())
        return result


    def forward(self, frames, flows):
        """
        Runs the full network.

        @param   frames  list of LR Tensors (n, 3, h, w)
        @param   flows   FlowSet between adjacent frames
        @return          list of HR Tensors (n, 3, 4h, 4w)
        """
        if not frames: raise DimensionError("model forward needs at least one frame")
        shape = frames[0].shape
        for i, frame in enumerate(frames):
            if frame.shape != shape or shape[1] != 3:
                raise DimensionError("frame %s has shape %s, expected (n, 3, h, w) equal to %s"
                                     % (i + 1, frame.shape, shape))
        flows.validate(len(frames), shape[2:])

        features = feature_extract(frames, self)
        sources_b = sources_f = features
        for _ in range(self.config.prop_rounds):
            h_bwd = propagate(features, flows, self, "backward", sources=sources_b)
            h_fwd = propagate(features, flows, self, "forward", sources=sources_f)
            sources_b, sources_f = h_bwd, h_fwd
        refined = cfp(h_fwd, h_bwd, self) if self.config.use_cfp else [None] * len(frames)
        return [reconstruct(f, hf, hb, r, lr, self)
                for f, hf, hb, r, lr in zip(features, h_fwd, h_bwd, refined, frames)]


    def __call__(self, frames, flows):
        return self.forward(frames, flows)



def _conv(x, model, name, padding=1):
    return T.conv2d(x, model[name + ".weight"], model.params.get(name + ".bias"), padding=padding)


def residual_block(x, model, name):
    """Returns x + conv(relu(conv(x)))."""
    y = T.activation(_conv(x, model, name + ".conv1"), "relu")
    return x + _conv(y, model, name + ".conv2")


def warp(h, s):
    """
    Warps features h by flow s: h(x + s(x)) with bilinear sampling and border
    clamping. Differentiable with respect to h only.
    """
    if h.shape[2:] != s.shape:
        raise DimensionError("feature size %s differs from flow size %s" % (h.shape[2:], s.shape))
    return T.bilinear_sample(h, s.coords(h.dtype))


def dac(warped, shallow):
    """
    Discriminative alignment correction: keeps the warped value where its
    magnitude is at least the shallow feature's, else the shallow value.
    """
    if warped.shape != shallow.shape:
        raise DimensionError("dac needs equal shapes, got %s and %s" % (warped.shape, shallow.shape))
    return T.where(np.abs(warped.data) >= np.abs(shallow.data), warped, shallow)


def feature_extract(frames, model):
    """Returns shallow features f_t for each LR frame: conv then residual blocks."""
    frames = frames.frames if hasattr(frames, "frames") else frames
    result = []
    for frame in frames:
        if not isinstance(frame, Tensor): frame = Tensor(np.asarray(frame)[None], dtype=model.dtype)
        x = _conv(frame, model, "extract.conv_in")
        for i in range(model.config.fe_blocks):
            x = residual_block(x, model, "extract.block%s" % i)
        result.append(x)
    return result


def propagate(features, flows, model, direction, sources=None):
    """
    Runs one recurrent propagation branch.

    h_t = PropBlocks(Concat(x_t, DAC(ResBlock(Warp(h_prev, s_t)), f_t))), with
    a zero hidden state at the branch start.

    @param   features   shallow features f_t, the correction reference
    @param   flows      FlowSet
    @param   direction  "forward" (t increasing) or "backward"
    @param   sources    branch inputs x_t, defaults to features; later
                        propagation rounds pass the previous round's output
    @return             list of hidden features h_t in timestep order
    """
    if direction not in ("forward", "backward"):
        raise ValueError("unknown propagation direction %r" % (direction, ))
    sources = features if sources is None else sources
    if len(sources) != len(features):
        raise DimensionError("propagation inputs have %s timesteps, features %s"
                             % (len(sources), len(features)))
    count, prefix, alignment = len(features), "prop.%s" % direction, model.config.alignment
    order = range(count) if "forward" == direction else range(count - 1, -1, -1)
    result, hidden = [None] * count, None
    for t in order:
        f = features[t]
        if hidden is None:
            aligned = Tensor(np.zeros(f.shape, dtype=f.dtype))
        else:
            flowlist = flows.forward if "forward" == direction else flows.backward
            index = t - 1 if "forward" == direction else t
            if index >= len(flowlist) or flowlist[index] is None:
                raise DimensionError("missing %s flow for timestep %s" % (direction, t + 1))
            aligned = warp(hidden, flowlist[index])
        corrected = residual_block(aligned, model, prefix + ".warp_block")
        if "dac" == alignment:
            x = T.concat_channels([sources[t], dac(corrected, f)])
        elif "concat" == alignment:
            x = T.concat_channels([sources[t], corrected, f])
        else:
            x = T.concat_channels([sources[t], corrected])
        x = T.activation(_conv(x, model, prefix + ".conv_in"), "relu")
        for i in range(model.config.prop_blocks):
            x = residual_block(x, model, "%s.block%s" % (prefix, i))
        result[t] = hidden = x
    return result


def feedback_convgru(r_prev, h_f, h_b_next, model):
    """
    Feedback ConvGRU step:

      v = LN(Concat(r_prev, h_f, h_b_next))
      z = sigmoid(Conv_z(v)), w = sigmoid(Conv_w(v))
      q = tanh(Conv_q(Concat(w * h_f, h_b_next)))
      r = (1 - z) * h_f + z * q
    """
    C = model.config.channels
    for name, x in (("r_prev", r_prev), ("h_f", h_f), ("h_b_next", h_b_next)):
        if x.shape[1] != C:
            raise DimensionError("feedback ConvGRU input %s has %s channels, expected %s"
                                 % (name, x.shape[1], C))
    v = T.layer_norm(T.concat_channels([r_prev, h_f, h_b_next]),
                     model["cfp.norm.gamma"], model["cfp.norm.beta"], conf.LayerNormEpsilon)
    z = T.activation(_conv(v, model, "cfp.conv_z"), "sigmoid")
    w = T.activation(_conv(v, model, "cfp.conv_w"), "sigmoid")
    q = T.activation(_conv(T.concat_channels([w * h_f, h_b_next]), model, "cfp.conv_q"), "tanh")
    return (1.0 - z) * h_f + z * q


def gcfb(r, h_b_next, model, index=0):
    """
    Gated collaborative feed-forward block:

      r^ = Conv1x1(Concat(r, h_b_next))          2C -> 4C
      r1, r2 = Split(DConv(r^))                  4C -> 2C + 2C
      out = Conv1x1(GELU(r1) * r2) * GELU(h_b_next)   2C -> C
    """
    C, prefix = model.config.channels, "cfp.gcfb%s" % index
    if r.shape[1] != C or h_b_next.shape[1] != C:
        raise DimensionError("GCFB inputs have %s and %s channels, expected %s"
                             % (r.shape[1], h_b_next.shape[1], C))
    expanded = _conv(T.concat_channels([r, h_b_next]), model, prefix + ".expand", padding=0)
    spatial = T.depthwise_conv2d(expanded, model[prefix + ".dconv.weight"], padding=1)
    r1, r2 = T.split_channels(spatial, [2 * C, 2 * C])
    gated = T.activation(r1, "gelu") * r2
    return _conv(gated, model, prefix + ".project", padding=0) * T.activation(h_b_next, "gelu")


def cfp(h_fwd, h_bwd, model):
    """
    Collaborative feedback propagation, scanning t = 1..N:
    r_t = Blocks(feedback_convgru(r_{t-1}, h_t^f, h_{t+1}^b)), with zero r_0
    and zero h_{N+1}^b; gated blocks also consume h_{t+1}^b.
    """
    if len(h_fwd) != len(h_bwd):
        raise DimensionError("CFP branches differ in length: %s forward, %s backward"
                             % (len(h_fwd), len(h_bwd)))
    result, r = [], None
    for t, h_f in enumerate(h_fwd):
        zeros = Tensor(np.zeros(h_f.shape, dtype=h_f.dtype))
        h_b_next = h_bwd[t + 1] if t + 1 < len(h_bwd) else zeros
        r = feedback_convgru(zeros if r is None else r, h_f, h_b_next, model)
        for i in range(model.config.gcfb_count):
            if "gcfb" == model.config.cfp_block: r = gcfb(r, h_b_next, model, i)
            else: r = residual_block(r, model, "cfp.block%s" % i)
        result.append(r)
    return result


def reconstruct(f, h_f, h_b, r, lr_frame, model):
    """
    Returns the HR frame R(Concat(f, h^f, h^b, r)) + bilinear x4 upsample of
    the LR frame. r is None when the model has no collaborative propagation.
    """
    parts = [f, h_f, h_b] + ([r] if r is not None else [])
    for x in parts:
        if x.shape[2:] != lr_frame.shape[2:]:
            raise DimensionError("reconstruction feature size %s differs from LR frame size %s"
                                 % (x.shape[2:], lr_frame.shape[2:]))
    x = _conv(T.concat_channels(parts), model, "rec.conv_in")
    for i in range(model.config.rec_blocks):
        x = residual_block(x, model, "rec.block%s" % i)
    for name in ("rec.up1", "rec.up2"):
        x = T.activation(T.pixel_shuffle(_conv(x, model, name), 2), "relu")
    x = _conv(x, model, "rec.conv_out")
    scale, (h, w) = model.config.scale, lr_frame.shape[2:]
    return x + T.resize_bilinear(lr_frame, h * scale, w * scale)


def model_forward(sequence, model, flows=None):
    """
    Runs the network over a video sequence.

    @param   sequence  VideoSequence, or list of (3, h, w) arrays
    @param   flows     FlowSet, defaults to the sequence's attached flows or,
                       if none, flows estimated from the frames
    @return            list of HR Tensors (1, 3, 4h, 4w)
    """
    frames = sequence.frames if hasattr(sequence, "frames") else list(sequence)
    if not frames: raise DimensionError("model_forward needs at least one frame")
    if flows is None: flows = getattr(sequence, "gt_flows", None)
    if flows is None: flows = estimate_sequence_flows(frames)
    tensors = [Tensor(np.asarray(x)[None], dtype=model.dtype) for x in frames]
    return model.forward(tensors, flows)


def save_checkpoint(model, path):
    """
    Writes model to file: "CFDM", u32 length + JSON config, u32 parameter
    count, then per parameter u32 length + UTF-8 name and a raw tensor.
    """
    config = json.dumps(model.config.to_dict()).encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(config)), config,
              struct.pack("<I", len(model.params))]
    for name, param in model.params.items():
        raw = name.encode("utf-8")
        chunks += [struct.pack("<I", len(raw)), raw, T.encode_tensor(param)]
    with open(path, "wb") as f: f.write(b"".join(chunks))
    logger.debug("Wrote checkpoint %s with %s parameters.", path, len(model.params))


def load_checkpoint(path, dtype=np.float64):
    """Reads a model written by save_checkpoint()."""
    with open(path, "rb") as f: buffer = f.read()
    if buffer[:4] != CHECKPOINT_MAGIC:
        raise FormatError("bad checkpoint magic at offset 0")

    def read_u32(offset):
        if len(buffer) < offset + 4:
            raise FormatError("truncated checkpoint at offset %s" % offset)
        return struct.unpack_from("<I", buffer, offset)[0], offset + 4

    size, offset = read_u32(4)
    try: config = ModelConfig.from_dict(json.loads(buffer[offset:offset + size].decode("utf-8")))
    except ValueError as e:
        raise FormatError("bad checkpoint config at offset %s: %s" % (offset, e))
    offset += size
    count, offset = read_u32(offset)
    model = CfdModel(config, dtype=dtype)
    for _ in range(count):
        size, offset = read_u32(offset)
        name = buffer[offset:offset + size].decode("utf-8")
        param, next_offset = T.decode_tensor(buffer, offset + size)
        if name not in model.params or model.params[name].shape != param.shape:
            raise FormatError("unexpected parameter %r at offset %s" % (name, offset))
        model.params[name].data[...] = param.data
        offset = next_offset
    if count != len(model.params):
        raise FormatError("checkpoint has %s parameters, model expects %s"
                          % (count, len(model.params)))
    return model

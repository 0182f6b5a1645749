# -*- coding: utf-8 -*-
"""
Program entry point: command-line interface for synthesizing and degrading
clips, training, inference, evaluation, temporal profiles, gradient checks
and model accounting.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 gradient check failure.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     18.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import argparse
import collections
import json
import logging
import os
import sys
import time
import warnings

import numpy as np

from . import conf
from . import data
from . import gradcheck
from . import losses
from . import metrics
from . import network
from . import training
from . flow import FlowSet, estimate_sequence_flows, gt_translation_flow

logger = logging.getLogger(__name__)


"""Exit codes by outcome."""
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_GRADCHECK = 0, 1, 2, 3

"""Flow sources accepted in run configuration."""
FLOW_SOURCES = ("estimate", "files", "ground-truth")

"""Log line format for command-line runs."""
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    """Raised on invalid command-line usage."""



class ArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting on bad arguments."""

    def error(self, message):
        raise UsageError("%s: %s" % (self.prog, message))



class RunConfig(object):
    """
    Run configuration from one JSON document with a root seed and sections
    model, loss, training, data and flow. Missing values take defaults,
    unknown keys are rejected with their dotted path. The root seed drives
    model initialization, clip synthesis and patch sampling, each consumer
    drawing from its own keyed stream.
    """

    SECTIONS = ("model", "loss", "training", "data", "flow")


    def __init__(self, values=None):
        values = values or {}
        if not isinstance(values, dict):
            raise conf.ConfigError("run configuration must be a JSON object")
        unknown = sorted(set(values) - set(self.SECTIONS) - set(["seed"]))
        if unknown: raise conf.ConfigError("unknown key %s" % unknown[0])
        seed = values.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise conf.ConfigError("seed must be a non-negative integer, got %r" % (seed, ))
        merged = {}
        for section, defaults in self.defaults().items():
            merged[section] = _merge(defaults, values.get(section) or {}, section)
        self.seed     = seed
        self.model    = network.ModelConfig.from_dict(dict(merged["model"], seed=seed))
        self.loss     = losses.LossConfig.from_dict(merged["loss"])
        self.training = training.TrainingConfig.from_dict(dict(merged["training"], seed=seed))
        self.data, self.flow = merged["data"], merged["flow"]
        if self.flow["source"] not in FLOW_SOURCES:
            raise conf.ConfigError("flow.source must be one of %s, got %r"
                                   % (", ".join(FLOW_SOURCES), self.flow["source"]))
        if self.data["degradation"] not in data.DEGRADATIONS:
            raise conf.ConfigError("data.degradation must be one of %s, got %r"
                                   % (", ".join(data.DEGRADATIONS), self.data["degradation"]))
        if self.data["kind"] not in data.SYNTH_KINDS:
            raise conf.ConfigError("data.kind must be one of %s, got %r"
                                   % (", ".join(data.SYNTH_KINDS), self.data["kind"]))


    @staticmethod
    def defaults():
        """Returns default configuration sections, desk-scale model and training."""
        blocks = conf.TrainBlocks
        model = network.ModelConfig(channels=conf.TrainChannels, fe_blocks=blocks,
                                    prop_blocks=blocks, rec_blocks=blocks, gcfb_count=blocks)
        return collections.OrderedDict([
            ("model", _unseeded(model.to_dict())),
            ("loss", losses.LossConfig().to_dict()),
            ("training", _unseeded(training.TrainingConfig().to_dict())),
            ("data", collections.OrderedDict([
                ("manifest", None), ("kind", "translate"), ("frames", conf.TrainFrames),
                ("size", 2 * conf.TrainPatchSize), ("motion", [1.0, 0.5]),
                ("degradation", "bi"), ("detail", conf.SynthDetail),
            ])),
            ("flow", collections.OrderedDict([("source", "estimate")])),
        ])


    @classmethod
    def from_file(cls, path):
        if not os.path.isfile(path): raise conf.ConfigError("no config file %s" % path)
        with open(path) as f:
            try: values = json.load(f, object_pairs_hook=collections.OrderedDict)
            except ValueError as e: raise conf.ConfigError("invalid JSON in %s: %s" % (path, e))
        return cls(values)


    def set_seed(self, seed):
        """Sets the root seed for model, data and training."""
        self.seed = self.model.seed = self.training.seed = seed


    def to_dict(self):
        return collections.OrderedDict([
            ("seed", self.seed), ("model", _unseeded(self.model.to_dict())),
            ("loss", self.loss.to_dict()), ("training", _unseeded(self.training.to_dict())),
            ("data", self.data), ("flow", self.flow),
        ])


    def write(self, directory):
        """Writes effective configuration into directory, returns file path."""
        if not os.path.isdir(directory): os.makedirs(directory)
        path = os.path.join(directory, conf.EffectiveConfigName)
        with open(path, "w") as f: f.write(json.dumps(self.to_dict(), indent=2) + "\n")
        return path



def _unseeded(section):
    return collections.OrderedDict((k, v) for k, v in section.items() if k != "seed")


def _merge(defaults, given, path):
    """Returns defaults updated with given values, type-checked against defaults."""
    if not isinstance(given, dict):
        raise conf.ConfigError("%s must be a JSON object" % path)
    result = collections.OrderedDict(defaults)
    for key, value in given.items():
        if key not in defaults: raise conf.ConfigError("unknown key %s.%s" % (path, key))
        default = defaults[key]
        if default is not None and value is not None:
            numeric = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)
            same = isinstance(value, bool) if isinstance(default, bool) else \
                   numeric(value) if isinstance(default, float) else \
                   isinstance(value, type(default)) and not isinstance(value, bool)
            if not same:
                raise conf.ConfigError("%s.%s must be %s, got %r"
                                       % (path, key, type(default).__name__, value))
        result[key] = value
    return result


def load_run_config(args):
    return RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()


def resolve_flows(seq, source):
    """Attaches flows to sequence according to flow source."""
    if len(seq) < 2:
        seq.gt_flows = seq.gt_flows or FlowSet([], [])
    elif "estimate" == source:
        logger.info("Estimating flows for %s frames of %r.", len(seq), seq.name)
        seq.gt_flows = estimate_sequence_flows(seq.frames)
    elif seq.gt_flows is None:
        where = "the manifest" if "files" == source else "a synthesized clip"
        raise conf.ConfigError("flow.source %r needs flows from %s, none for %r"
                               % (source, where, seq.name))
    return seq


def synth_clip(run):
    """Returns a clip synthesized from the data section and root seed of run configuration."""
    d = run.data
    return data.synth_sequence(d["kind"], d["frames"], d["size"], d["motion"], run.seed,
                               d["degradation"], d["detail"])


def _pair(text, kind=float):
    try: values = [kind(x) for x in text.split(",")]
    except ValueError: raise UsageError("expected comma-separated numbers, got %r" % text)
    return values


def cmd_synth(args):
    """Writes a synthetic clip with LR frames, HR targets and flows."""
    run = load_run_config(args)
    for key, value in (("kind", args.kind), ("frames", args.frames), ("size", args.size),
                       ("motion", args.motion), ("degradation", args.degradation),
                       ("detail", args.detail)):
        if value is not None: run.data[key] = value
    if args.seed is not None: run.set_seed(args.seed)
    seq = synth_clip(run)
    path = data.save_sequence(seq, args.out)
    run.write(args.out)
    logger.info("Wrote %r to %s.", seq, path)
    return EXIT_OK


def cmd_degrade(args):
    """Degrades HR frames into an LR sequence directory."""
    run = load_run_config(args)
    if args.degradation: run.data["degradation"] = args.degradation
    if os.path.isfile(os.path.join(args.input, data.MANIFEST_NAME)):
        hr = data.load_sequence(args.input)
    else:
        hr = data.VideoSequence(data.read_frames(args.input),
                                name=os.path.basename(os.path.normpath(args.input)))
    lr = data.degrade(hr, run.data["degradation"])
    path = data.save_sequence(lr, args.out)
    run.write(args.out)
    logger.info("Wrote %r to %s.", lr, path)
    return EXIT_OK


def cmd_train(args):
    """Trains a model on a manifest clip or a synthesized clip."""
    run = load_run_config(args)
    if args.data: run.data["manifest"] = args.data
    if args.steps is not None: run.training.steps = args.steps
    if args.seed is not None: run.set_seed(args.seed)
    seq = data.load_sequence(run.data["manifest"]) if run.data["manifest"] else synth_clip(run)
    resolve_flows(seq, run.flow["source"])
    run.write(args.out)
    trainer = training.Trainer(seq, run.model, run.loss, run.training, args.out)
    summary = trainer.run()
    with open(os.path.join(args.out, "summary.json"), "w") as f:
        f.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_infer(args):
    """Super-resolves a sequence, writing HR frames as PNG."""
    run = load_run_config(args)
    if args.flow: run.flow["source"] = args.flow
    if args.checkpoint:
        if not os.path.isfile(args.checkpoint):
            raise conf.ConfigError("no checkpoint file %s" % args.checkpoint)
        model = network.load_checkpoint(args.checkpoint)
        run.model = model.config
        run.set_seed(model.config.seed)
    else:
        logger.warning("No checkpoint given, using untrained model from seed %s.", run.model.seed)
        model = network.CfdModel(run.model)
    seq = resolve_flows(data.load_sequence(args.input), run.flow["source"])
    outputs = network.model_forward(seq, model, seq.gt_flows)
    if not os.path.isdir(args.out): os.makedirs(args.out)
    for i, frame in enumerate(outputs):
        data.write_png(frame, os.path.join(args.out, "%08d.png" % i))
    run.write(args.out)
    logger.info("Wrote %s frames of %sx%s to %s.", len(outputs), outputs[0].shape[2],
                outputs[0].shape[3], args.out)
    return EXIT_OK


def cmd_eval(args):
    """Compares two frame directories, printing an aligned report."""
    a, b = data.read_frames(args.a), data.read_frames(args.b)
    report = metrics.evaluate(a, b, args.mode, name=os.path.basename(os.path.normpath(args.a)))
    sys.stdout.write(report.table())
    if args.json:
        with open(args.json, "w") as f: f.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_profile(args):
    """Writes the temporal profile of a frame row as PNG."""
    if os.path.isfile(os.path.join(args.input, data.MANIFEST_NAME)):
        frames = data.load_sequence(args.input).frames
    else: frames = data.read_frames(args.input)
    row = frames[0].shape[1] // 2 if args.row is None else args.row
    profile = metrics.temporal_profile(frames, row)
    data.write_png(metrics.profile_image(profile), args.out)
    logger.info("Wrote temporal profile of row %s over %s frames to %s.", row, len(frames), args.out)
    return EXIT_OK


def cmd_gradcheck(args):
    """Runs the gradient check suite, writing a JSON report."""
    dump_dir = args.dump or os.path.splitext(args.out)[0] + "_failures"
    report = gradcheck.run_suite(args.seed, args.trials, dump_dir=dump_dir)
    report.write(args.out)
    if not report.passed:
        logger.error("Gradient checks failed: %s. Inputs and gradients in %s.",
                     ", ".join(report.failures), dump_dir)
        return EXIT_GRADCHECK
    logger.info("All %s gradient checks passed, report in %s.", len(report.checks), args.out)
    return EXIT_OK


def cmd_params(args):
    """Prints parameter count and FLOPs, optionally forward runtime."""
    model_config = RunConfig.from_file(args.config).model if args.config \
                   else network.ModelConfig()
    model = network.CfdModel(model_config)
    h, w = _pair(args.size, int) if args.size else conf.FlopFrameSize
    count = metrics.log_param_count(model)
    flops = metrics.estimate_flops(model_config, h, w, args.frames)
    lines = ["parameters  %s (%.3f M)" % (count, count / 1e6),
             "reference   %.1f M, may include the flow network, informational" %
             conf.ReferenceParamsMillions,
             "flops       %.3f G on %s frames of %sx%s" % (flops / 1e9, args.frames, h, w)]
    if args.runtime:
        rng = np.random.default_rng(0)
        frames = [rng.uniform(size=(3, h, w)) for _ in range(args.frames)]
        flows = FlowSet([gt_translation_flow((h, w), 0, 0)] * (args.frames - 1),
                        [gt_translation_flow((h, w), 0, 0)] * (args.frames - 1))
        started = time.time()
        network.model_forward(frames, model, flows)
        lines.append("runtime     %.1f ms per frame" %
                     ((time.time() - started) * 1000 / args.frames))
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def make_parser():
    parser = ArgumentParser(prog=conf.Name, description="%s %s: video super-resolution with "
                            "collaborative feedback propagation." % (conf.Title, conf.Version))
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    def add(name, func, help):
        sub = subparsers.add_parser(name, help=help, description=help)
        sub.set_defaults(func=func)
        return sub

    p = add("synth", cmd_synth, "synthesize a moving-texture clip with exact flows")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--kind", choices=data.SYNTH_KINDS)
    p.add_argument("--frames", type=int)
    p.add_argument("--size", type=int, help="LR frame size in pixels")
    p.add_argument("--motion", type=float, nargs="+", metavar="V",
                   help="dx dy per frame for translate, degrees for rotate-texture")
    p.add_argument("--detail", type=float, help="texture amplitude share in the detail band")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--degradation", choices=data.DEGRADATIONS)
    p.add_argument("--out", required=True, help="output directory")

    p = add("degrade", cmd_degrade, "degrade HR frames into an LR sequence")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--input", required=True, help="directory of HR PNG frames or manifest")
    p.add_argument("--degradation", choices=data.DEGRADATIONS)
    p.add_argument("--out", required=True, help="output directory")

    p = add("train", cmd_train, "train a model at desk scale")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--data", help="sequence directory or manifest, else a synthesized clip")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int, help="root seed for model, data and patch sampling")
    p.add_argument("--out", required=True, help="output directory")

    p = add("infer", cmd_infer, "super-resolve a sequence")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--checkpoint", help="model checkpoint file")
    p.add_argument("--input", required=True, help="sequence directory or manifest")
    p.add_argument("--flow", choices=FLOW_SOURCES)
    p.add_argument("--out", required=True, help="output directory")

    p = add("eval", cmd_eval, "compare frame directories by PSNR and SSIM")
    p.add_argument("--a", required=True, help="directory of result frames")
    p.add_argument("--b", required=True, help="directory of reference frames")
    p.add_argument("--mode", choices=metrics.MODES, default="y", help="PSNR channels")
    p.add_argument("--json", help="write report JSON to this file")

    p = add("profile", cmd_profile, "write the temporal profile of a frame row")
    p.add_argument("--input", required=True, help="frame directory or sequence directory")
    p.add_argument("--row", type=int, help="pixel row, default middle")
    p.add_argument("--out", required=True, help="output PNG file")

    p = add("gradcheck", cmd_gradcheck, "run finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=conf.GradcheckTrials)
    p.add_argument("--out", default="gradcheck_report.json", help="report JSON file")
    p.add_argument("--dump", help="directory for raw tensors of failed checks, "
                   "default next to the report")

    p = add("params", cmd_params, "print parameter count and FLOPs")
    p.add_argument("--config", help="run configuration JSON, default full-size model")
    p.add_argument("--size", help="frame h,w for FLOPs, default %s,%s" % tuple(conf.FlopFrameSize))
    p.add_argument("--frames", type=int, default=conf.FlopFrameCount)
    p.add_argument("--runtime", action="store_true", help="also time one forward pass")
    return parser


def main(argv=None):
    """Runs command from arguments, returns exit code."""
    try:
        args = make_parser().parse_args(sys.argv[1:] if argv is None else argv)
        if not getattr(args, "func", None): raise UsageError("%s: no command given" % conf.Name)
        conf.load()
        level = logging.DEBUG if args.verbose else getattr(logging, str(conf.LogLevel).upper(),
                                                           logging.INFO)
        logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
        logging.getLogger().setLevel(level)
        return args.func(args)
    except (UsageError, conf.ConfigError, EnvironmentError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except Exception as e:
        logger.error("%s: %s", type(e).__name__, e)
        logger.debug("Traceback:", exc_info=True)
        return EXIT_RUNTIME


def run():
    warnings.simplefilter("ignore", UnicodeWarning)
    sys.exit(main())

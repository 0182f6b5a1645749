# -*- coding: utf-8 -*-
"""
Application settings, and functionality to load some of them from
an external file. Configuration file has simple INI file format,
and all values are kept in JSON.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     14.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import configparser
import json
import logging
import os
import sys

import appdirs

logger = logging.getLogger(__name__)

"""Program name, title, version number, and version date."""
Name = "cfdprop"
Title = "CFDProp"
Version = "1.0"
VersionDate = "19.10.2026"

ApplicationDirectory = os.path.abspath(os.path.join(__file__, ".."))
EtcDirectory = os.path.join(ApplicationDirectory, "etc")

"""List of attribute names that can be saved to and loaded from ConfigFile."""
FileDirectives = [
    "LogLevel", "Precision", "Threads",
]
"""List of user-modifiable attributes, loaded if present."""
OptionalFileDirectives = [
    "AdamBetas", "AdamEpsilon", "BicubicA", "BlurKernelSize", "BlurSigma",
    "CharbonnierEpsilon", "CheckpointInterval", "FftWeight", "FlopFrameSize",
    "FlowIterations", "FlowLevels", "FlowWindow", "GradcheckStep",
    "GradcheckTolerance", "GradcheckTrials", "LearningRateMax",
    "LearningRateMin", "LogInterval", "PsnrCap", "SsimSigma", "SsimWindow",
    "SynthBaseBand", "SynthDetail", "SynthDetailBand",
    "TrainBatchSize", "TrainBlocks", "TrainChannels", "TrainPatchSize", "TrainSteps",
]

"""Default path of file where FileDirectives are kept."""
ConfigFile = os.path.join(EtcDirectory, "%s.ini" % Name)

"""Environment variable capping internal parallelism."""
ThreadsEnvironmentVariable = "CFDPROP_THREADS"

"""Whether load() has run."""
Loaded = False

"""Maximum number of worker threads for per-frame work, 0 for CPU count."""
Threads = 0

"""Logging level name for command-line runs."""
LogLevel = "INFO"

"""Floating-point precision for training, "float64" or "float32"."""
Precision = "float64"

"""Feature channels C of the full-size model."""
Channels = 64

"""Upscaling factor, fixed by the reconstruction head."""
Scale = 4

"""Residual blocks in feature extractor, per propagation branch, and in reconstruction."""
FeatureBlocks = 5
PropagationBlocks = 10
ReconstructionBlocks = 3

"""Number of gated collaborative feed-forward blocks in collaborative propagation."""
GcfbCount = 5

"""Number of backward+forward propagation rounds."""
PropagationRounds = 2

"""Alignment correction after warping: "dac", "concat" or "warp"."""
Alignment = "dac"

"""Block type stacked after the feedback ConvGRU: "gcfb" or "resblock"."""
CfpBlock = "gcfb"

"""Epsilon for layer normalization in collaborative propagation."""
LayerNormEpsilon = 1e-5

"""Charbonnier loss epsilon."""
CharbonnierEpsilon = 1e-3

"""Weight of the frequency-domain loss term."""
FftWeight = 0.1

"""Adam moment coefficients and denominator epsilon."""
AdamBetas = [0.9, 0.99]
AdamEpsilon = 1e-8

"""Cosine annealing learning rate bounds for desk-scale training."""
LearningRateMax = 1e-3
LearningRateMin = 1e-7

"""Desk-scale training defaults: feature channels, LR patch size, batch size, steps."""
TrainChannels = 8
TrainPatchSize = 32
TrainBatchSize = 2
TrainSteps = 2000

"""Desk-scale residual block count per stage and gated block count."""
TrainBlocks = 1

"""Frames per training clip, when training on a synthesized clip."""
TrainFrames = 3

"""Steps between training log lines and between checkpoint writes (0: only final)."""
LogInterval = 50
CheckpointInterval = 0

"""Pyramidal Lucas-Kanade defaults: pyramid levels, iterations per level, window size."""
FlowLevels = 3
FlowIterations = 10
FlowWindow = 5

"""Bicubic kernel coefficient."""
BicubicA = -0.5

"""Gaussian blur for blur-downsampling degradation: sigma and kernel size."""
BlurSigma = 1.6
BlurKernelSize = 13

"""Synthetic texture wavelength ranges in HR pixels, smooth base band and detail band."""
SynthBaseBand = [24.0, 96.0]
SynthDetailBand = [6.0, 16.0]

"""Share of synthetic texture amplitude in the detail band."""
SynthDetail = 0.5

"""PSNR value reported for identical images, in dB."""
PsnrCap = 99.0

"""SSIM Gaussian window size and sigma."""
SsimWindow = 11
SsimSigma = 1.5

"""Finite-difference gradient check: step, relative error tolerance, trials per check."""
GradcheckStep = 1e-4
GradcheckTolerance = 1e-3
GradcheckTrials = 20

"""Frame size (h, w) and frame count for FLOP estimation."""
FlopFrameSize = [180, 320]
FlopFrameCount = 3

"""Reference parameter count for the full-size model, in millions."""
ReferenceParamsMillions = 6.6

"""Name of the file where commands echo their effective run configuration."""
EffectiveConfigName = "effective_config.json"


class ConfigError(ValueError):
    """Raised on invalid configuration values, message names the field."""


def load(force=False):
    """
    Loads known directives from the user or application INI file into this
    module's attributes, then applies the CFDPROP_THREADS override.
    Later calls are no-ops unless forced, keeping values assigned since.

    @param   force  reload even if already loaded
    """
    global Loaded
    if Loaded and not force: return

    configpaths = [ConfigFile]
    try: # Instantiate OS- and user-specific path
        p = appdirs.user_config_dir(Title, appauthor=False)
        # User-specific file takes precedence over application folder
        configpaths.insert(0, os.path.join(p, "%s.ini" % Name))
    except Exception: pass

    section = "*"
    module = sys.modules[__name__]
    parser = configparser.RawConfigParser()
    parser.optionxform = str # Force case-sensitivity on names
    try:
        for path in configpaths:
            if os.path.isfile(path) and parser.read(path):
                logger.debug("Loaded settings from %s.", path)
                break  # for path

        def parse_value(name):
            try:  # parser.get can throw an error if value not found
                value_raw = parser.get(section, name)
            except Exception:
                return None, False
            try:  # Try to interpret as JSON, fall back on raw string
                value = json.loads(value_raw)
            except ValueError:
                value = value_raw
            return value, True

        for name in FileDirectives + OptionalFileDirectives:
            [setattr(module, name, v) for v, s in [parse_value(name)] if s]
    except Exception:
        logger.warning("Failed to read settings from %s.", configpaths, exc_info=True)

    threads = os.environ.get(ThreadsEnvironmentVariable)
    if threads:
        try: module.Threads = max(0, int(threads))
        except ValueError:
            raise ConfigError("%s must be an integer, got %r" %
                              (ThreadsEnvironmentVariable, threads))
    Loaded = True


def thread_count():
    """Returns the number of worker threads to use, at least 1."""
    return Threads if Threads > 0 else (os.cpu_count() or 1)

"""Shadow removal for document images: matte guidance, a ViT restorer and metrics."""

import json

from . import _core
from ._core import (
    ConfigError,
    ContractError,
    DomainError,
    Error,
    FormatError,
    IoError,
    ShapeError,
    compute_matte,
    edit_distance,
    evaluate,
    gradient_audit,
    infer,
    lab_to_rgb,
    load_image,
    ocr_eval,
    psnr,
    restore,
    rgb_to_lab,
    rmse,
    save_image,
    ssim,
    synth_pair,
    write_synthetic_dataset,
)


def _dump(config):
    return config if isinstance(config, str) else json.dumps(config)


def normalize_config(config):
    """Full run config with defaults filled in; rejects unknown keys."""
    return json.loads(_core.normalize_config(_dump(config)))


def parameter_count(model=None):
    return _core.parameter_count(_dump(model or {}))


def train_matte_generator(config, resume=""):
    return _core.train_matte_generator(_dump(config), resume)


def train_removal(config, resume=""):
    return _core.train_removal(_dump(config), resume)

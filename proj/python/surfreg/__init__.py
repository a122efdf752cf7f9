"""Markerless model-to-scene surface registration (Python bindings)."""

import json as _json

from ._surfreg import (
    SurfregError,
    config_keys,
    default_torso_pose,
    eval_reconstruction,
    register,
    run_synthetic,
    sample_torso,
    score_pose,
    torso_landmarks,
    tre,
)
from ._surfreg import config_json as _config_json

__all__ = [
    "SurfregError",
    "config",
    "config_keys",
    "default_torso_pose",
    "eval_reconstruction",
    "register",
    "run_synthetic",
    "sample_torso",
    "score_pose",
    "torso_landmarks",
    "tre",
]


def config(path="", overrides=()):
    """Resolved configuration as a nested dict.

    Defaults are overlaid with the JSON file at `path` (or $SURFREG_CONFIG when
    `path` is empty), then with "dotted.key=value" overrides in order.
    """
    return _json.loads(_config_json(str(path), list(overrides)))

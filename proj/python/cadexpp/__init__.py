"""Dense point tracking by test-time optimization of an invertible deformation field."""

import json

from ._core import (
    ConfigError,
    DataError,
    Error,
    FormatError,
    NumericalError,
    evaluate,
    evaluate_files,
    fit,
    lattice_queries,
    read_raster,
    read_tracks,
    synth,
    track,
    write_raster,
)
from ._core import default_config as _default_config
from ._core import normalize_config as _normalize_config

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "FormatError",
    "NumericalError",
    "config",
    "evaluate",
    "evaluate_files",
    "fit",
    "lattice_queries",
    "read_raster",
    "read_tracks",
    "synth",
    "track",
    "write_raster",
]

__version__ = "0.1.0"


def config(**sections):
    """Return a full run configuration as JSON text, overriding the defaults.

    Nested sections are merged key by key, e.g.
    ``config(iterations=500, loss={"lambda_d": 0.5})``.
    """
    cfg = json.loads(_default_config())
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return _normalize_config(json.dumps(cfg))

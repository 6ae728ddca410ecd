"""Cascade popularity prediction: Python bindings over the C++ core."""

from ._autocas import (
    Config,
    ConfigError,
    Corpus,
    Experiment,
    ShapeError,
    ValidationError,
    cross_partition_boundaries,
    generate_corpus,
    load_config,
    load_corpus,
    log_popularity,
    mape,
    msle,
    parse_config,
    patch_boundaries,
    variant_names,
)

__all__ = [
    "Config",
    "ConfigError",
    "Corpus",
    "Experiment",
    "ShapeError",
    "ValidationError",
    "cross_partition_boundaries",
    "generate_corpus",
    "load_config",
    "load_corpus",
    "log_popularity",
    "mape",
    "msle",
    "parse_config",
    "patch_boundaries",
    "variant_names",
]

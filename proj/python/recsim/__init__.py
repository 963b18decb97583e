"""Closed-loop recommender simulation."""

from ._core import (
    ConfigError,
    Dataset,
    Model,
    ParseError,
    RecsimError,
    fit_trend,
    from_ratings,
    load_dataset,
    load_model,
    simulate,
    synthetic,
    train_mf,
    train_rnn,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "Model",
    "ParseError",
    "RecsimError",
    "fit_trend",
    "from_ratings",
    "load_dataset",
    "load_model",
    "simulate",
    "synthetic",
    "train_mf",
    "train_rnn",
]

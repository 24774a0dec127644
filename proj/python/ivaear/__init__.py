"""Spatio-temporal identifiable VAE with autoregressive latent priors."""

from ._ivaear import (
    CheckpointFormatError,
    Dataset,
    Error,
    InvalidArgument,
    Model,
    ShapeError,
    TrainingDiverged,
    UnsupportedVersion,
    build_rbf,
    correlation_matrix,
    extract_latents,
    fit,
    forecast,
    knee_index,
    lr_schedule,
    matern,
    mcc,
    persistence,
    run_cli,
    simulate,
)

__all__ = [
    "CheckpointFormatError",
    "Dataset",
    "Error",
    "InvalidArgument",
    "Model",
    "ShapeError",
    "TrainingDiverged",
    "UnsupportedVersion",
    "build_rbf",
    "correlation_matrix",
    "extract_latents",
    "fit",
    "forecast",
    "knee_index",
    "lr_schedule",
    "matern",
    "mcc",
    "persistence",
    "run_cli",
    "simulate",
]

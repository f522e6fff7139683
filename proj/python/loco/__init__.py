"""Pedestrian locomotion forecasting: completion, stream decomposition and QRNN forecasters."""

from ._core import (
    ANCHOR_JOINT,
    JOINT_COUNT,
    CompletionModel,
    baseline,
    chain_transforms,
    cli,
    decompose,
    generate_dataset,
    kde,
    load_dataset,
    mean_kde,
    qrnn_layer_forward,
    recombine,
    snap_to_lattice,
    train_completion,
)

__all__ = [
    "ANCHOR_JOINT",
    "JOINT_COUNT",
    "CompletionModel",
    "baseline",
    "chain_transforms",
    "cli",
    "decompose",
    "generate_dataset",
    "kde",
    "load_dataset",
    "mean_kde",
    "qrnn_layer_forward",
    "recombine",
    "snap_to_lattice",
    "train_completion",
]

"""Python bindings for the mmreg depth/video misalignment classifier."""

from ._mmreg import (
    Checkpoint,
    add_flow_channels,
    estimate_flow,
    generate_offsets,
    generate_sequence,
    mean_diagonal_accuracy,
    read_frame,
    write_frame,
)

__all__ = [
    "Checkpoint",
    "add_flow_channels",
    "estimate_flow",
    "generate_offsets",
    "generate_sequence",
    "mean_diagonal_accuracy",
    "read_frame",
    "write_frame",
]

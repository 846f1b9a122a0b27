"""Minimal gradient engine: two fixed architectures (fully connected nets
and a causal temporal convolutional network) with hand-derived backward
passes, an adaptive-moment optimizer, and a self-describing checkpoint
container."""

from .checkpoint import load_arrays, load_net, save_arrays, save_net
from .dense import DenseNet, DimensionMismatch, StaleCache
from .heads import (
    gaussian_head_backward,
    gaussian_head_deterministic,
    gaussian_head_sample,
)
from .optim import OptimState, ShapeMismatch, adam_step
from .tcn import TcnNet, WindowLengthMismatch

__all__ = [
    "DenseNet", "TcnNet", "OptimState", "adam_step",
    "gaussian_head_sample", "gaussian_head_deterministic", "gaussian_head_backward",
    "save_arrays", "load_arrays", "save_net", "load_net",
    "DimensionMismatch", "StaleCache", "ShapeMismatch", "WindowLengthMismatch",
]

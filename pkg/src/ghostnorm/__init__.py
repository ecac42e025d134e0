"""Batch, Ghost, Group and Sequential normalization in numpy, with a SimpleNet training harness."""

from .errors import GhostNormError
from .model import SimpleNet
from .norms import NormKind, NormSpec, NormState, backward, forward, rank_order_preserved

__version__ = "0.1.0"

__all__ = [
    "GhostNormError",
    "NormKind",
    "NormSpec",
    "NormState",
    "SimpleNet",
    "backward",
    "forward",
    "rank_order_preserved",
]

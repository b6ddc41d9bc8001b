"""Dense tensors with tape-based reverse mode, GRU cells, Adam, init and RNG."""
from . import checkpoint, ops
from .adam import AdamState, adam_step
from .gru import gru_cell, gru_sequence, init_gru
from .init import init_params, xavier_bound
from .ops import forward_primitive
from .rng import SeededRng, stream
from .tensor import Graph, NonFiniteError, ShapeError, Tensor, backward, const, param

__all__ = [
    "AdamState",
    "Graph",
    "NonFiniteError",
    "SeededRng",
    "ShapeError",
    "Tensor",
    "adam_step",
    "backward",
    "checkpoint",
    "const",
    "forward_primitive",
    "gru_cell",
    "gru_sequence",
    "init_gru",
    "init_params",
    "ops",
    "param",
    "stream",
    "xavier_bound",
]

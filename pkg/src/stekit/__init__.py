"""Stackable temporal encoder (STE) layers for video frame embeddings.

Frame embeddings are ``(frames, patches, dim)`` arrays. An STE layer with
ratio ``(t_u:t_o)`` maps every ``t_u`` frames to ``t_o`` abstract frames, so
stacks of layers shrink the number of visual tokens handed to a decoder.
"""

from .errors import (ContractError, DimensionError, FormatError, NumericError,
                     SpecError, SpecParseError)
from .planner import CompressionPlan, ladder_table, plan
from .specstr import format_stack, parse_stack
from .ste import (LayerSpec, LayerWeights, StackSpec, init_stack, init_weights, layer_forward,
                  param_count, stack_forward)
from .tensor import Tape, Tensor

__version__ = "0.1.0"

__all__ = [
    "CompressionPlan", "ContractError", "DimensionError", "FormatError", "LayerSpec",
    "LayerWeights", "NumericError", "SpecError", "SpecParseError", "StackSpec", "Tape",
    "Tensor", "format_stack", "init_stack", "init_weights", "ladder_table", "layer_forward",
    "param_count", "parse_stack", "plan", "stack_forward",
]

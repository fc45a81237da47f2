"""Position-decoupled self-attention encoder and its parameters."""

from pdmrec.model.checkpoint import load_checkpoint, save_checkpoint
from pdmrec.model.encoder import (
    SequenceRepresentation,
    attention_mask,
    cab_forward,
    embed_sequence,
    encode,
    item_attention_head,
    item_attention_weights,
    positional_attention_head,
    positional_attention_weights,
    score_all,
)
from pdmrec.model.params import ModelParams, ModelSpec

__all__ = [
    "ModelParams",
    "ModelSpec",
    "SequenceRepresentation",
    "attention_mask",
    "cab_forward",
    "embed_sequence",
    "encode",
    "item_attention_head",
    "item_attention_weights",
    "load_checkpoint",
    "positional_attention_head",
    "positional_attention_weights",
    "save_checkpoint",
    "score_all",
]

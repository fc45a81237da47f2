"""Sequence encoder: item attention, positional attention, aggregator, scoring.

AIDEV-NOTE: Shapes follow a row-per-slot convention: a batch of sequences
is (B, L) item indices, embeddings are (B, L, d), the positional table is
(L, d). The positional branch computes its attention weights from P alone
and applies them to values projected from the block input, so swapping
item content never changes those weights. Padding slots (index 0) are
masked as keys in both branches; a query row with no visible key yields a
zero row.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pdmrec.model.params import ModelParams
from pdmrec.numerics import ops
from pdmrec.numerics.autograd import Tensor


@dataclass(frozen=True)
class SequenceRepresentation:
    """Final hidden rows [h_1 .. h_L] and the user vector h_L."""

    hidden: Tensor
    user_vector: Tensor


def as_batch(seqs: ArrayLike) -> NDArray[np.int64]:
    """View a single fixed-length sequence or a batch as (B, L) int64."""
    return np.atleast_2d(np.asarray(seqs, dtype=np.int64))


def attention_mask(seqs: NDArray[np.int64], causal: bool) -> NDArray[np.bool_]:
    """(B, L, L) mask: query t may attend key s when s holds an item (and s <= t)."""
    batch = as_batch(seqs)
    length = batch.shape[1]
    mask = np.broadcast_to((batch != 0)[:, None, :], (batch.shape[0], length, length))
    if causal:
        mask = mask & np.tril(np.ones((length, length), dtype=bool))[None]
    return np.ascontiguousarray(mask)


def embed_sequence(seqs: ArrayLike, params: ModelParams) -> Tensor:
    """Look up item embeddings; padding slots map to row 0."""
    return ops.take_rows(params.item_embeddings, as_batch(seqs))


def _scaled_logits(queries: Tensor, keys: Tensor, head_dim: int) -> Tensor:
    return ops.scale(ops.matmul(queries, ops.transpose(keys)), 1.0 / math.sqrt(head_dim))


def item_attention_weights(
    e_in: Tensor, block: int, head: int, params: ModelParams, mask: NDArray[np.bool_]
) -> Tensor:
    """softmax((E W_Q)(E W_K)^T / sqrt(dh)) for one head, shape (B, L, L)."""
    names = params.spec.head_names(block, head)
    q = ops.matmul(e_in, params[names["w_q"]])
    k = ops.matmul(e_in, params[names["w_k"]])
    return ops.row_softmax(_scaled_logits(q, k, params.spec.head_dim), mask)


def item_attention_head(
    e_in: Tensor, block: int, head: int, params: ModelParams, mask: NDArray[np.bool_]
) -> Tensor:
    """Content self-attention output for one head, shape (B, L, dh)."""
    names = params.spec.head_names(block, head)
    weights = item_attention_weights(e_in, block, head, params, mask)
    return ops.matmul(weights, ops.matmul(e_in, params[names["w_v"]]))


def positional_attention_weights(
    positions: Tensor, block: int, head: int, params: ModelParams, mask: NDArray[np.bool_]
) -> Tensor:
    """softmax((P W^p_Q)(P W^p_K)^T / sqrt(dh)), broadcast over the batch mask."""
    names = params.spec.head_names(block, head)
    q = ops.matmul(positions, params[names["wp_q"]])
    k = ops.matmul(positions, params[names["wp_k"]])
    logits = ops.broadcast_to(_scaled_logits(q, k, params.spec.head_dim), mask.shape)
    return ops.row_softmax(logits, mask)


def positional_attention_head(
    e_in: Tensor,
    positions: Tensor,
    block: int,
    head: int,
    params: ModelParams,
    mask: NDArray[np.bool_],
) -> Tensor:
    """Position-driven attention over content values, shape (B, L, dh)."""
    names = params.spec.head_names(block, head)
    weights = positional_attention_weights(positions, block, head, params, mask)
    value = params[names.get("wp_v", names["w_v"])]
    return ops.matmul(weights, ops.matmul(e_in, value))


def _mlp(x: Tensor, block: int, params: ModelParams) -> Tensor:
    prefix = f"blocks.{block}.mlp"
    hidden = ops.add(ops.matmul(x, params[f"{prefix}.w1"]), params[f"{prefix}.b1"])
    hidden = ops.gelu(hidden) if params.spec.activation == "gelu" else ops.relu(hidden)
    return ops.add(ops.matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


def cab_forward(
    s_prev: Tensor,
    positions: Tensor | None,
    block: int,
    params: ModelParams,
    mask: NDArray[np.bool_],
    training: bool = False,
    rng: np.random.Generator | None = None,
    residual: Tensor | None = None,
) -> Tensor:
    """One context-aware block.

    S = LayerNorm(dropout(MLP(S^v + S^p)) + residual). `positions=None`
    drops the positional branch (S^p omitted). The residual defaults to the
    block input.
    """
    spec = params.spec
    heads = range(1, spec.hd + 1)
    s_v = ops.concat([item_attention_head(s_prev, block, h, params, mask) for h in heads])
    aggregated = s_v
    if positions is not None:
        s_p = ops.concat(
            [
                positional_attention_head(s_prev, positions, block, h, params, mask)
                for h in heads
            ]
        )
        aggregated = ops.add(s_v, s_p)
    out = ops.dropout(_mlp(aggregated, block, params), spec.dropout, training, rng)
    out = ops.add(out, s_prev if residual is None else residual)
    return ops.layer_norm(
        out,
        params[f"blocks.{block}.norm.gain"],
        params[f"blocks.{block}.norm.bias"],
        spec.layer_norm_eps,
    )


def encode(
    seqs: ArrayLike,
    params: ModelParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
    use_positional: bool = True,
) -> SequenceRepresentation:
    """Embed and run the N stacked blocks.

    `use_positional=False` runs the basic sequence encoder only: no
    positional branch and no positional input term.
    """
    spec = params.spec
    batch = as_batch(seqs)
    mask = attention_mask(batch, spec.causal_mask)
    positions = params.positional_embeddings if use_positional else None

    x = embed_sequence(batch, params)
    if positions is not None and spec.positional_mode == "additive":
        x = ops.add(x, positions)
    branch = positions if spec.positional_mode == "decoupled" else None

    s = x
    for block in range(1, spec.n_blocks + 1):
        residual = x if spec.residual_from_embeddings else None
        s = cab_forward(s, branch, block, params, mask, training, rng, residual)
    return SequenceRepresentation(
        hidden=s, user_vector=ops.index(s, (slice(None), -1, slice(None)))
    )


def score_all(user_vector: Tensor, params: ModelParams) -> Tensor:
    """Dot-product scores against items 1..|V| (padding and mask rows excluded)."""
    items = ops.index(params.item_embeddings, slice(1, params.spec.num_items + 1))
    if user_vector.ndim == 1:
        vec = ops.reshape(user_vector, (1, user_vector.shape[0]))
        return ops.reshape(ops.matmul(vec, ops.transpose(items)), (params.spec.num_items,))
    return ops.matmul(user_vector, ops.transpose(items))

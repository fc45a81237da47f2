"""Contrastive encoder and the reordering sequence loss.

AIDEV-NOTE: The contrastive encoder reuses the main model's parameters
with the positional branch switched off, so the loss never reaches P or
any W^p tensor. Row 2k and 2k+1 of a batch are the two views of source
sequence k; every other row is a negative. Sequence representations of
different lengths are compared by flattening all L slots with padding
slots zeroed, which aligns sequences at their most recent item under left
padding and makes the dot product a sum over commonly real slots.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pdmrec.model.encoder import as_batch, encode
from pdmrec.model.params import ModelParams
from pdmrec.numerics import ops
from pdmrec.numerics.autograd import Array, Tensor

logger = logging.getLogger(__name__)

ClRepresentation = Literal["concat", "last", "post_aggregation"]


@dataclass(frozen=True)
class ContrastiveBatch:
    """2M representation rows plus which slots of each row hold real items.

    Each row is `slot_mask.shape[1]` hidden vectors laid end to end.
    """

    representations: Tensor
    slot_mask: NDArray[np.bool_]

    @property
    def num_pairs(self) -> int:
        return self.representations.shape[0] // 2

    def vector(self, row: int) -> Array:
        """Concatenated hidden vectors of the real slots of one row."""
        data = self.representations.data[row]
        slots = self.slot_mask.shape[1]
        return data.reshape(slots, data.size // slots)[self.slot_mask[row]].reshape(-1)


def flatten_real_slots(hidden: Tensor, seqs: NDArray[np.int64]) -> Tensor:
    """(B, L, d) -> (B, L*d) with padding slots zeroed."""
    real = (seqs != 0).astype(hidden.dtype)[:, :, None]
    batch, length, width = hidden.shape
    return ops.reshape(ops.mul(hidden, real), (batch, length * width))


def contrastive_forward(
    views: ArrayLike,
    params: ModelParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
    representation: ClRepresentation = "concat",
) -> ContrastiveBatch:
    """Encode augmented fixed-length views with the basic sequence encoder.

    "concat" concatenates every real-slot hidden vector without positional
    information; "last" keeps only h_L; "post_aggregation" keeps the full
    encoder output including the positional branch.
    """
    seqs = as_batch(views)
    rep = encode(
        seqs,
        params,
        training=training,
        rng=rng,
        use_positional=representation == "post_aggregation",
    )
    if representation == "last":
        reps = rep.user_vector
        slot_mask = np.ones((seqs.shape[0], 1), dtype=bool)
    else:
        reps = flatten_real_slots(rep.hidden, seqs)
        slot_mask = seqs != 0
    return ContrastiveBatch(representations=reps, slot_mask=slot_mask)


def reordering_sequence_loss(batch: ContrastiveBatch, symmetric: bool = True) -> Tensor:
    """In-batch softmax loss with the paired view as positive.

    sim is the raw dot product. Each anchor's own row is left out of the
    normalizer, leaving one positive and 2M - 2 negatives. With
    `symmetric=False` only the first view of each pair acts as anchor.
    """
    reps = batch.representations
    rows = reps.shape[0]
    if batch.num_pairs < 2:
        logger.warning(
            "Contrastive batch has %d pair(s); no negatives, loss set to 0", batch.num_pairs
        )
        return Tensor(np.zeros((), dtype=reps.dtype))

    sim = ops.matmul(reps, ops.transpose(reps))
    candidates = ~np.eye(rows, dtype=bool)
    partners = np.arange(rows) ^ 1
    if symmetric:
        return ops.cross_entropy(sim, partners, candidates)
    anchors = np.arange(0, rows, 2)
    return ops.cross_entropy(
        ops.index(sim, slice(0, rows, 2)), partners[anchors], candidates[anchors]
    )

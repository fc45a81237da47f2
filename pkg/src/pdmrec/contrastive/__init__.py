"""Reordering augmentation and the reordering sequence loss."""

from pdmrec.contrastive.augment import (
    AugmentationOp,
    augment_pair,
    crop_items,
    mask_items,
    reorder,
)
from pdmrec.contrastive.loss import (
    ContrastiveBatch,
    contrastive_forward,
    flatten_real_slots,
    reordering_sequence_loss,
)

__all__ = [
    "AugmentationOp",
    "ContrastiveBatch",
    "augment_pair",
    "contrastive_forward",
    "crop_items",
    "flatten_real_slots",
    "mask_items",
    "reorder",
    "reordering_sequence_loss",
]

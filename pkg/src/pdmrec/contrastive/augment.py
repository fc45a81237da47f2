"""Sequence augmentations: reorder (default), mask and crop.

All three take a plain item list and an explicit numpy Generator, and
never mutate their input.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from pdmrec.errors import ConfigError

AugmentationKind = Literal["reorder", "mask", "crop"]


def _window(n: int, proportion: float) -> int:
    return math.floor(proportion * n)


def reorder(seq: Sequence[int], alpha: float, rng: np.random.Generator) -> list[int]:
    """Shuffle one contiguous window of length floor(alpha * |seq|)."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    out = list(seq)
    width = _window(len(out), alpha)
    if width < 2:
        return out
    start = int(rng.integers(0, len(out) - width + 1))
    window = out[start : start + width]
    out[start : start + width] = [window[i] for i in rng.permutation(width)]
    return out


def mask_items(
    seq: Sequence[int], gamma: float, rng: np.random.Generator, mask_token: int
) -> list[int]:
    """Replace floor(gamma * |seq|) distinct positions with `mask_token`."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must be in [0, 1), got {gamma}")
    out = list(seq)
    count = _window(len(out), gamma)
    if count == 0:
        return out
    for pos in rng.choice(len(out), size=count, replace=False):
        out[int(pos)] = mask_token
    return out


def crop_items(seq: Sequence[int], eta: float, rng: np.random.Generator) -> list[int]:
    """Delete one contiguous window of length floor(eta * |seq|)."""
    if not 0.0 <= eta < 1.0:
        raise ConfigError(f"eta must be in [0, 1), got {eta}")
    out = list(seq)
    width = _window(len(out), eta)
    if width == 0:
        return out
    start = int(rng.integers(0, len(out) - width + 1))
    return out[:start] + out[start + width :]


@dataclass(frozen=True)
class AugmentationOp:
    """One augmentation kind with its proportion."""

    kind: AugmentationKind
    proportion: float

    def __post_init__(self) -> None:
        upper_ok = self.proportion <= 1.0 if self.kind == "reorder" else self.proportion < 1.0
        if self.proportion < 0.0 or not upper_ok:
            raise ConfigError(f"{self.kind} proportion out of range: {self.proportion}")

    def apply(
        self, seq: Sequence[int], rng: np.random.Generator, mask_token: int | None = None
    ) -> list[int]:
        if self.kind == "reorder":
            return reorder(seq, self.proportion, rng)
        if self.kind == "crop":
            return crop_items(seq, self.proportion, rng)
        if mask_token is None:
            raise ConfigError("mask augmentation needs a mask token")
        return mask_items(seq, self.proportion, rng, mask_token)


def augment_pair(
    seq: Sequence[int],
    augmentations: Sequence[AugmentationOp],
    rng: np.random.Generator,
    mask_token: int | None = None,
) -> tuple[list[int], list[int]]:
    """Two independent views; with several ops each view picks one uniformly."""
    if not augmentations:
        raise ConfigError("augment_pair needs at least one augmentation")
    views = []
    for _ in range(2):
        op = (
            augmentations[0]
            if len(augmentations) == 1
            else augmentations[int(rng.integers(len(augmentations)))]
        )
        views.append(op.apply(seq, rng, mask_token))
    return views[0], views[1]

"""Synthetic interaction logs with latent interest clusters.

AIDEV-NOTE: Items are split into contiguous clusters. Each user picks one
cluster. In "shuffled" mode a user draws mostly in-cluster items and their
order carries no signal. In "cycle" mode a user walks their cluster's item
cycle from a random start, so the next item is a deterministic function of
the current one. Records carry engagement values that pass every filter
preset.
"""

import logging
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from pdmrec.data.models import InteractionRecord

logger = logging.getLogger(__name__)


class SyntheticConfig(BaseModel):
    """Generator parameters."""

    n_users: Annotated[int, Field(ge=1)] = 200
    n_items: Annotated[int, Field(ge=1)] = 100
    n_clusters: Annotated[int, Field(ge=1)] = 4
    min_len: Annotated[int, Field(ge=1)] = 5
    max_len: Annotated[int, Field(ge=1)] = 20
    purity: Annotated[float, Field(ge=0.0, le=1.0)] = Field(
        default=0.9, description="Probability a shuffled-mode draw is in-cluster"
    )
    order: Literal["shuffled", "cycle"] = "shuffled"
    seed: int = 0

    @model_validator(mode="after")
    def validate_ranges(self) -> "SyntheticConfig":
        """Length bounds must be ordered and clusters cannot outnumber items."""
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")
        if self.n_clusters > self.n_items:
            raise ValueError("n_clusters must not exceed n_items")
        return self


def item_clusters(config: SyntheticConfig) -> list[list[int]]:
    """Zero-based item numbers of each cluster."""
    return [
        block.tolist() for block in np.array_split(np.arange(config.n_items), config.n_clusters)
    ]


def _shuffled_session(
    cluster: list[int], n_items: int, length: int, purity: float, rng: np.random.Generator
) -> list[int]:
    pool = list(rng.permutation(cluster))
    items: list[int] = []
    for _ in range(length):
        if pool and rng.random() < purity:
            items.append(int(pool.pop()))
        else:
            items.append(int(rng.integers(n_items)))
    return [int(i) for i in rng.permutation(items)]


def _cycle_session(cluster: list[int], length: int, rng: np.random.Generator) -> list[int]:
    start = int(rng.integers(len(cluster)))
    return [cluster[(start + step) % len(cluster)] for step in range(length)]


def generate_synthetic(config: SyntheticConfig) -> list[InteractionRecord]:
    """Deterministic synthetic log for the given config."""
    rng = np.random.default_rng(config.seed)
    clusters = item_clusters(config)
    records: list[InteractionRecord] = []
    for user in range(config.n_users):
        cluster = clusters[int(rng.integers(len(clusters)))]
        length = int(rng.integers(config.min_len, config.max_len + 1))
        if config.order == "cycle":
            items = _cycle_session(cluster, length, rng)
        else:
            items = _shuffled_session(cluster, config.n_items, length, config.purity, rng)
        for step, item in enumerate(items):
            records.append(
                InteractionRecord(
                    user_id=f"u{user}",
                    item_id=f"i{item}",
                    timestamp=1_000 * step + user,
                    watch_time=60.0,
                    loop_times=1.5,
                    flags=frozenset({"like"}),
                )
            )
    logger.info(
        "Generated %d synthetic records for %d users (%s order)",
        len(records),
        config.n_users,
        config.order,
    )
    return records

"""Positive filtering, k-core pruning, sequence building and splitting.

AIDEV-NOTE: All functions are pure over their inputs and keep input order
wherever the output is a subset, so runs are reproducible record-for-record.
"""

import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from pdmrec.data.models import (
    DatasetStats,
    FilterRule,
    IndexMap,
    InteractionRecord,
    PositiveSequence,
    SplitDataset,
    UserSplit,
)
from pdmrec.errors import ConfigError

logger = logging.getLogger(__name__)

MIN_SEQUENCE_LENGTH = 3


def filter_positive(
    log: Iterable[InteractionRecord], rule: FilterRule
) -> list[InteractionRecord]:
    """Keep records the rule accepts, in input order."""
    records = list(log)
    kept = [r for r in records if rule.accepts(r)]
    logger.info(
        "Filter %s kept %d of %d records", rule.name, len(kept), len(records)
    )
    return kept


def sample_users(
    records: Sequence[InteractionRecord], fraction: float, seed: int
) -> list[InteractionRecord]:
    """Keep every record of a random `fraction` of users."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"user sample fraction must be in (0, 1], got {fraction}")
    users = sorted({r.user_id for r in records})
    if fraction == 1.0:
        return list(records)
    rng = np.random.default_rng(seed)
    count = max(1, math.floor(fraction * len(users)))
    chosen = {users[i] for i in rng.choice(len(users), size=count, replace=False)}
    return [r for r in records if r.user_id in chosen]


def k_core_prune(
    records: Sequence[InteractionRecord], k: int
) -> list[InteractionRecord]:
    """Drop users and items with fewer than k interactions until stable."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    current = list(records)
    rounds = 0
    while True:
        rounds += 1
        user_counts = Counter(r.user_id for r in current)
        current_users = [r for r in current if user_counts[r.user_id] >= k]
        item_counts = Counter(r.item_id for r in current_users)
        pruned = [r for r in current_users if item_counts[r.item_id] >= k]
        if len(pruned) == len(current):
            break
        current = pruned
    logger.info(
        "%d-core kept %d of %d records after %d rounds",
        k,
        len(current),
        len(records),
        rounds,
    )
    return current


def build_sequences(
    records: Sequence[InteractionRecord],
) -> tuple[list[PositiveSequence], IndexMap]:
    """Group records per user, sort by timestamp and map ids to dense indices.

    Ties in timestamp keep input order. Users with fewer than three records
    are dropped; dense item indices are assigned in order of first
    appearance over the surviving, time-sorted sequences.
    """
    per_user: dict[str, list[InteractionRecord]] = {}
    for r in records:
        per_user.setdefault(r.user_id, []).append(r)

    item_index: dict[str, int] = {}
    index_map = IndexMap()
    sequences: list[PositiveSequence] = []
    dropped = 0
    for user_id, user_records in per_user.items():
        if len(user_records) < MIN_SEQUENCE_LENGTH:
            dropped += 1
            continue
        ordered = sorted(user_records, key=lambda r: r.timestamp)
        items: list[int] = []
        for r in ordered:
            if r.item_id not in item_index:
                item_index[r.item_id] = len(item_index) + 1
                index_map.item_ids.append(r.item_id)
            items.append(item_index[r.item_id])
        sequences.append(PositiveSequence(user_index=len(sequences), items=items))
        index_map.user_ids.append(user_id)

    if dropped:
        logger.info("Dropped %d users with fewer than %d interactions", dropped, MIN_SEQUENCE_LENGTH)
    return sequences, index_map


def to_fixed_length(
    seq: Sequence[int], length: int, pad_left: bool = True
) -> NDArray[np.int64]:
    """Keep the latest `length` items and pad with 0 to exactly `length` slots.

    With left padding the most recent item always sits in the last slot.
    """
    if length < 1:
        raise ConfigError(f"sequence length must be >= 1, got {length}")
    tail = list(seq)[-length:]
    out = np.zeros(length, dtype=np.int64)
    if tail:
        if pad_left:
            out[length - len(tail) :] = tail
        else:
            out[: len(tail)] = tail
    return out


def leave_one_out_split(
    sequences: Sequence[PositiveSequence], index_map: IndexMap | None = None
) -> SplitDataset:
    """Last item -> test, second to last -> validation, the rest -> train."""
    users: list[UserSplit] = []
    excluded = 0
    for seq in sequences:
        if len(seq.items) < MIN_SEQUENCE_LENGTH:
            excluded += 1
            continue
        users.append(
            UserSplit(
                user_index=seq.user_index,
                train=seq.items[:-2],
                valid=seq.items[-2],
                test=seq.items[-1],
            )
        )
    if excluded:
        logger.warning("Excluded %d sequences shorter than %d", excluded, MIN_SEQUENCE_LENGTH)

    index_map = index_map or IndexMap()
    num_items = index_map.num_items or max(
        (max(s.items) for s in sequences if s.items), default=1
    )
    logger.info("Split %d users over %d items", len(users), num_items)
    return SplitDataset(num_items=num_items, users=users, index_map=index_map)


def dataset_statistics(split: SplitDataset) -> DatasetStats:
    """User/item/interaction counts, density and average sequence length."""
    interactions = sum(len(u.train) + 2 for u in split.users)
    users = split.num_users
    return DatasetStats(
        users=users,
        items=split.num_items,
        interactions=interactions,
        density=interactions / (users * split.num_items) if users else 0.0,
        avg_sequence_length=interactions / users if users else 0.0,
    )

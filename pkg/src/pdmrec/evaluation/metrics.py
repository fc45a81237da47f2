"""Full-catalog ranking and top-K metrics.

AIDEV-NOTE: Every item the user has not interacted with is a candidate;
no negative sampling. Ties are pessimistic: an item scoring exactly the
ground truth's score counts as ranked above it.
"""

import logging
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from pdmrec.config import TrainConfig
from pdmrec.data.models import SplitDataset
from pdmrec.data.pipeline import to_fixed_length
from pdmrec.errors import DataError
from pdmrec.evaluation.report import EvalReport
from pdmrec.model.encoder import encode, score_all
from pdmrec.model.params import ModelParams
from pdmrec.numerics.autograd import Tensor, no_grad

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


@dataclass(frozen=True)
class RankingContext:
    """Ground truth plus the items excluded from this user's candidates."""

    ground_truth: int
    excluded: frozenset[int]

    def __post_init__(self) -> None:
        if self.ground_truth < 1:
            raise DataError(f"ground truth must be an item index >= 1, got {self.ground_truth}")
        if self.ground_truth in self.excluded:
            object.__setattr__(self, "excluded", self.excluded - {self.ground_truth})

    @classmethod
    def from_history(cls, ground_truth: int, history: Iterable[int]) -> "RankingContext":
        return cls(ground_truth=ground_truth, excluded=frozenset(history))


def rank_from_scores(scores: NDArray[np.floating], ctx: RankingContext) -> int:
    """1-based rank of the ground truth among non-excluded items.

    `scores[i - 1]` is the score of item i.
    """
    if ctx.ground_truth > scores.shape[0]:
        raise DataError(f"ground truth {ctx.ground_truth} outside {scores.shape[0]} items")
    candidate = np.ones(scores.shape[0], dtype=bool)
    if ctx.excluded:
        candidate[np.fromiter(ctx.excluded, dtype=np.int64) - 1] = False
    target = scores[ctx.ground_truth - 1]
    # counts the ground truth itself, so the best rank is 1
    return int(np.count_nonzero(candidate & (scores >= target)))


def rank_user(user_vector: Tensor, ctx: RankingContext, params: ModelParams) -> int:
    """Rank of the ground truth for one user vector."""
    with no_grad():
        scores = score_all(user_vector, params).data
    return rank_from_scores(scores.reshape(-1), ctx)


def batch_ranks(
    scores: NDArray[np.floating], contexts: Sequence[RankingContext]
) -> NDArray[np.int64]:
    """Vectorized rank_from_scores over rows of a (B, |V|) score matrix."""
    candidate = np.ones(scores.shape, dtype=bool)
    for row, ctx in enumerate(contexts):
        if ctx.excluded:
            candidate[row, np.fromiter(ctx.excluded, dtype=np.int64) - 1] = False
    truth = np.array([c.ground_truth - 1 for c in contexts], dtype=np.int64)
    target = scores[np.arange(len(contexts)), truth][:, None]
    return np.count_nonzero(candidate & (scores >= target), axis=1).astype(np.int64)


def recall_at_k(ranks: Sequence[int] | NDArray[np.integer], k: int) -> float:
    """Fraction of users whose ground truth ranks within the top k."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    arr = np.asarray(ranks)
    if arr.size == 0:
        return 0.0
    return float(np.count_nonzero(arr <= k) / arr.size)


def ndcg_at_k(ranks: Sequence[int] | NDArray[np.integer], k: int) -> float:
    """Mean of 1/log2(rank + 1) for hits within k, 0 otherwise (ideal DCG is 1)."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    arr = np.asarray(ranks, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    gains = np.where(arr <= k, 1.0 / np.log2(arr + 1.0), 0.0)
    return float(gains.mean())


def user_ranks(
    params: ModelParams,
    dataset: SplitDataset,
    split: Literal["valid", "test"],
    config: TrainConfig,
    user_positions: Sequence[int] | None = None,
) -> NDArray[np.int64]:
    """Ground-truth rank for each selected user (all users by default)."""
    positions = list(range(dataset.num_users)) if user_positions is None else list(user_positions)
    ranks: list[NDArray[np.int64]] = []
    with no_grad():
        for start in range(0, len(positions), EVAL_BATCH_SIZE):
            chunk = [dataset.users[i] for i in positions[start : start + EVAL_BATCH_SIZE]]
            seqs = np.stack(
                [to_fixed_length(u.history(split), config.max_len, config.pad_left) for u in chunk]
            )
            rep = encode(seqs, params, training=False)
            scores = score_all(rep.user_vector, params).data
            contexts = [RankingContext.from_history(u.target(split), u.history(split)) for u in chunk]
            ranks.append(batch_ranks(scores, contexts))
    return np.concatenate(ranks) if ranks else np.zeros(0, dtype=np.int64)


def evaluate(
    params: ModelParams,
    dataset: SplitDataset,
    split: Literal["valid", "test"],
    config: TrainConfig,
    ks: Sequence[int] | None = None,
    user_positions: Sequence[int] | None = None,
) -> EvalReport:
    """Recall@K and NDCG@K over the whole item set."""
    started = time.perf_counter()
    cutoffs = sorted(set(ks or config.ks))
    ranks = user_ranks(params, dataset, split, config, user_positions)
    report = EvalReport(
        split=split,
        users=int(ranks.size),
        mean_rank=float(ranks.mean()) if ranks.size else 0.0,
        recall={k: recall_at_k(ranks, k) for k in cutoffs},
        ndcg={k: ndcg_at_k(ranks, k) for k in cutoffs},
        config=config.echo(),
        wall_clock_seconds=time.perf_counter() - started,
    )
    logger.debug("Evaluated %s split on %d users", split, report.users)
    return report

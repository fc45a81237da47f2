"""Full-catalog ranking metrics, evaluation reports and parameter counts."""

from pdmrec.evaluation.accounting import ParameterCount, count_parameters
from pdmrec.evaluation.metrics import (
    RankingContext,
    batch_ranks,
    evaluate,
    ndcg_at_k,
    rank_from_scores,
    rank_user,
    recall_at_k,
    user_ranks,
)
from pdmrec.evaluation.report import EvalReport

__all__ = [
    "EvalReport",
    "ParameterCount",
    "RankingContext",
    "batch_ranks",
    "count_parameters",
    "evaluate",
    "ndcg_at_k",
    "rank_from_scores",
    "rank_user",
    "recall_at_k",
    "user_ranks",
]

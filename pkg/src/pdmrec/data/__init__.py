"""Interaction log ingestion, filtering, sequence construction and splits."""

from pdmrec.data.io import (
    export_index_map,
    file_sha256,
    load_split,
    read_interaction_log,
    save_split,
    write_interaction_log,
)
from pdmrec.data.models import (
    DatasetStats,
    FilterRule,
    IndexMap,
    InteractionRecord,
    PositiveSequence,
    SplitDataset,
    UserSplit,
)
from pdmrec.data.pipeline import (
    build_sequences,
    dataset_statistics,
    filter_positive,
    k_core_prune,
    leave_one_out_split,
    sample_users,
    to_fixed_length,
)
from pdmrec.data.synthetic import SyntheticConfig, generate_synthetic, item_clusters

__all__ = [
    "DatasetStats",
    "FilterRule",
    "IndexMap",
    "InteractionRecord",
    "PositiveSequence",
    "SplitDataset",
    "SyntheticConfig",
    "UserSplit",
    "build_sequences",
    "dataset_statistics",
    "export_index_map",
    "file_sha256",
    "filter_positive",
    "generate_synthetic",
    "item_clusters",
    "k_core_prune",
    "leave_one_out_split",
    "load_split",
    "read_interaction_log",
    "sample_users",
    "save_split",
    "to_fixed_length",
    "write_interaction_log",
]

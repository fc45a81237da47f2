"""Pytest configuration and fixtures for pdmrec tests.

AIDEV-NOTE: Toy sizes follow the gradient-check instance (|V|=20, L=8,
d=8, hd=2, N=2). Model fixtures are float64 so finite differences are
meaningful, and dropout is off so forward passes are deterministic.
"""

from pathlib import Path

import numpy as np
import pytest

from pdmrec.config import TrainConfig
from pdmrec.data.models import InteractionRecord, SplitDataset
from pdmrec.data.pipeline import build_sequences, leave_one_out_split
from pdmrec.data.synthetic import SyntheticConfig, generate_synthetic
from pdmrec.model.params import ModelParams, ModelSpec


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test-local randomness."""
    return np.random.default_rng(1234)


@pytest.fixture
def toy_config() -> TrainConfig:
    """Small float64 training config with dropout disabled."""
    return TrainConfig(
        d=8,
        hd=2,
        n_blocks=2,
        max_len=8,
        dropout=0.0,
        batch_size=4,
        max_epochs=3,
        patience=15,
        dtype="float64",
        eval_ks="5,10",
        seed=7,
    )


@pytest.fixture
def toy_spec() -> ModelSpec:
    """Full-model architecture for 20 items."""
    return ModelSpec(
        num_items=20,
        d=8,
        hd=2,
        n_blocks=2,
        max_len=8,
        inner_dim=8,
        dropout=0.0,
    )


@pytest.fixture
def toy_params(toy_spec: ModelSpec) -> ModelParams:
    """Randomly initialized float64 parameters with a wide init."""
    return ModelParams.initialize(
        toy_spec, np.random.default_rng(0), std=0.3, dtype="float64"
    )


@pytest.fixture
def toy_batch_seqs() -> np.ndarray:
    """Four left-padded sequences of different lengths over items 1..20."""
    return np.array(
        [
            [0, 0, 0, 3, 7, 1, 9, 2],
            [0, 0, 0, 0, 0, 5, 6, 20],
            [4, 8, 15, 16, 11, 12, 13, 14],
            [0, 0, 0, 0, 0, 0, 10, 19],
        ],
        dtype=np.int64,
    )


@pytest.fixture
def synthetic_records() -> list[InteractionRecord]:
    """Cycle-ordered synthetic log: 8 users over 12 items."""
    return generate_synthetic(
        SyntheticConfig(
            n_users=8, n_items=12, n_clusters=2, min_len=5, max_len=8, order="cycle", seed=0
        )
    )


@pytest.fixture
def toy_dataset(synthetic_records: list[InteractionRecord]) -> SplitDataset:
    """Leave-one-out split of the synthetic log."""
    sequences, index_map = build_sequences(synthetic_records)
    return leave_one_out_split(sequences, index_map)


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    """A flat key = value config file."""
    path = tmp_path / "train.cfg"
    path.write_text(
        "# toy run\n"
        "d = 8\n"
        "hd = 2\n"
        "max_len = 8   # short sequences\n"
        "dropout = 0.0\n"
        "batch_size = 16\n"
        "max_epochs = 2\n"
        "eval_ks = 5,10\n",
        encoding="utf-8",
    )
    return path

"""Batched optimization of L_main + lambda * L_cl with early stopping.

AIDEV-NOTE: One example per user per epoch. The input is the user's
training sequence without its last item and the target is that last item,
predicted from h_L. Contrastive views are two augmentations of the same
input prefix. All randomness (init, shuffling, augmentation, dropout)
comes from one numpy Generator seeded by `config.seed`; validation user
subsampling uses its own Generator so it never shifts the training stream.
"""

import csv
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pdmrec.config import TrainConfig
from pdmrec.contrastive.augment import augment_pair
from pdmrec.contrastive.loss import contrastive_forward, reordering_sequence_loss
from pdmrec.data.models import SplitDataset, UserSplit
from pdmrec.data.pipeline import to_fixed_length
from pdmrec.errors import DataError
from pdmrec.evaluation.metrics import evaluate
from pdmrec.model.checkpoint import save_checkpoint
from pdmrec.model.encoder import encode, score_all
from pdmrec.model.params import ModelParams, ModelSpec
from pdmrec.numerics import ops
from pdmrec.numerics.autograd import Tensor, backward
from pdmrec.numerics.optim import AdamState, adam_step
from pdmrec.training.variants import ModelWiring, augmentation_ops, build_spec, variant_switch

logger = logging.getLogger(__name__)

STOPPING_K = 50
LOG_COLUMNS = ("epoch", "l_main", "l_cl", "l_total", "val_recall50", "elapsed_seconds")


@dataclass(frozen=True)
class TrainingBatch:
    """Fixed-length inputs, next-item targets and optional contrastive views."""

    inputs: NDArray[np.int64]
    targets: NDArray[np.int64]
    views: NDArray[np.int64] | None = None

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])


@dataclass(frozen=True)
class LossBreakdown:
    """Taped loss components of one batch; total = main + lambda_cl * cl."""

    main: Tensor
    cl: Tensor
    total: Tensor
    lambda_cl: float

    def values(self) -> tuple[float, float, float]:
        return self.main.item(), self.cl.item(), self.total.item()


@dataclass
class TrainState:
    """Mutable optimization state carried across epochs."""

    rng: np.random.Generator
    adam: AdamState
    epoch: int = 0
    best_recall: float = -1.0
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    best_params: ModelParams | None = None

    def record_validation(self, recall: float, params: ModelParams) -> bool:
        """Update the early-stopping counters; True on strict improvement."""
        if recall > self.best_recall:
            self.best_recall = recall
            self.best_epoch = self.epoch
            self.best_params = params.copy()
            self.epochs_since_improvement = 0
            return True
        self.epochs_since_improvement += 1
        return False

    def should_stop(self, patience: int) -> bool:
        return self.epochs_since_improvement > patience


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    l_main: float
    l_cl: float
    l_total: float
    val_recall50: float
    elapsed_seconds: float

    def row(self) -> list[str]:
        return [
            str(self.epoch),
            repr(self.l_main),
            repr(self.l_cl),
            repr(self.l_total),
            repr(self.val_recall50),
            f"{self.elapsed_seconds:.3f}",
        ]


@dataclass
class FitResult:
    """Best-epoch parameters plus the per-epoch log."""

    params: ModelParams
    wiring: ModelWiring
    best_epoch: int
    best_recall: float
    stopped_early: bool
    history: list[EpochRecord] = field(default_factory=list)

    @property
    def spec(self) -> ModelSpec:
        return self.params.spec


def training_example(user: UserSplit) -> tuple[list[int], int]:
    """(input prefix, target) for one user; the prefix may be empty."""
    return user.train[:-1], user.train[-1]


def make_batch(
    dataset: SplitDataset,
    user_positions: Sequence[int],
    config: TrainConfig,
    wiring: ModelWiring,
    rng: np.random.Generator,
) -> TrainingBatch:
    """Assemble one batch; views are rows 2k and 2k+1 for user k."""
    prefixes: list[list[int]] = []
    targets: list[int] = []
    for pos in user_positions:
        prefix, target = training_example(dataset.users[pos])
        prefixes.append(prefix)
        targets.append(target)

    inputs = np.stack([to_fixed_length(p, config.max_len, config.pad_left) for p in prefixes])
    views = None
    if wiring.contrastive:
        ops_ = augmentation_ops(config, wiring)
        mask_token = dataset.num_items + 1 if wiring.uses_mask_token else None
        rows: list[NDArray[np.int64]] = []
        for prefix in prefixes:
            first, second = augment_pair(prefix, ops_, rng, mask_token)
            rows.append(to_fixed_length(first, config.max_len, config.pad_left))
            rows.append(to_fixed_length(second, config.max_len, config.pad_left))
        views = np.stack(rows)
    return TrainingBatch(
        inputs=inputs, targets=np.asarray(targets, dtype=np.int64), views=views
    )


def main_loss(user_vector: Tensor, targets: ArrayLike, params: ModelParams) -> Tensor:
    """Full-softmax next-item negative log likelihood, averaged over users.

    Scores cover items 1..|V| only, so padding and the mask token never
    enter the normalizer.
    """
    tgt = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    if tgt.size and (tgt.min() < 1 or tgt.max() > params.spec.num_items):
        raise DataError(f"targets must lie in 1..{params.spec.num_items}")
    scores = score_all(user_vector, params)
    if scores.ndim == 1:
        scores = ops.reshape(scores, (1, scores.shape[0]))
    return ops.cross_entropy(scores, tgt - 1)


def compute_losses(
    params: ModelParams,
    batch: TrainingBatch,
    config: TrainConfig,
    wiring: ModelWiring,
    rng: np.random.Generator | None = None,
    training: bool = True,
) -> LossBreakdown:
    rep = encode(batch.inputs, params, training=training, rng=rng)
    l_main = main_loss(rep.user_vector, batch.targets, params)

    if wiring.contrastive and batch.views is not None:
        cl_batch = contrastive_forward(
            batch.views,
            params,
            training=training,
            rng=rng,
            representation=wiring.cl_representation,
        )
        l_cl = reordering_sequence_loss(cl_batch, symmetric=config.symmetric_cl)
        total = ops.add(l_main, ops.scale(l_cl, wiring.lambda_cl))
    else:
        l_cl = Tensor(np.zeros((), dtype=params.dtype))
        total = l_main
    return LossBreakdown(main=l_main, cl=l_cl, total=total, lambda_cl=wiring.lambda_cl)


def train_step(
    params: ModelParams,
    batch: TrainingBatch,
    state: TrainState,
    config: TrainConfig,
    wiring: ModelWiring,
) -> LossBreakdown:
    """One Adam update on d(L_main + lambda * L_cl)/d(params)."""
    params.zero_grad()
    losses = compute_losses(params, batch, config, wiring, state.rng, training=True)
    grads = backward(losses.total, params)
    adam_step(params, grads, state.adam)
    return losses


def run_epoch(
    params: ModelParams,
    dataset: SplitDataset,
    state: TrainState,
    config: TrainConfig,
    wiring: ModelWiring,
) -> tuple[float, float, float]:
    """Shuffle users, step through every batch, return user-weighted mean losses."""
    order = state.rng.permutation(dataset.num_users)
    sums = np.zeros(3, dtype=np.float64)
    for start in range(0, len(order), config.batch_size):
        chunk = order[start : start + config.batch_size].tolist()
        batch = make_batch(dataset, chunk, config, wiring, state.rng)
        losses = train_step(params, batch, state, config, wiring)
        sums += np.asarray(losses.values()) * batch.size
    means = sums / max(dataset.num_users, 1)
    return float(means[0]), float(means[1]), float(means[2])


def _validation_users(dataset: SplitDataset, config: TrainConfig) -> list[int] | None:
    if config.eval_user_sample == 0 or config.eval_user_sample >= dataset.num_users:
        return None
    picker = np.random.default_rng([config.seed, 1])
    chosen = picker.choice(dataset.num_users, size=config.eval_user_sample, replace=False)
    return sorted(int(i) for i in chosen)


def _write_log(path: Path, history: Sequence[EpochRecord]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(LOG_COLUMNS)
        writer.writerows(record.row() for record in history)


def fit(
    dataset: SplitDataset, config: TrainConfig, out_dir: str | Path | None = None
) -> FitResult:
    """Train until validation Recall@50 stalls for more than `patience` epochs.

    With `out_dir`, writes best.ckpt, last.ckpt and train_log.csv there.
    Returns the parameters of the best validation epoch.
    """
    if dataset.num_users == 0:
        raise DataError("cannot train on an empty dataset")

    wiring = variant_switch(config)
    spec = build_spec(config, dataset.num_items, wiring)
    rng = np.random.default_rng(config.seed)
    params = ModelParams.initialize(spec, rng, std=config.init_std, dtype=config.dtype)
    state = TrainState(
        rng=rng,
        adam=AdamState(
            lr=config.lr, beta1=config.adam_beta1, beta2=config.adam_beta2, eps=config.adam_eps
        ),
    )
    eval_users = _validation_users(dataset, config)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    logger.info(
        "Training variant %s on %d users / %d items (%d parameter tensors)",
        wiring.variant,
        dataset.num_users,
        dataset.num_items,
        len(params),
    )
    history: list[EpochRecord] = []
    started = time.perf_counter()
    stopped_early = False
    while state.epoch < config.max_epochs:
        state.epoch += 1
        l_main, l_cl, l_total = run_epoch(params, dataset, state, config, wiring)
        report = evaluate(
            params, dataset, "valid", config, ks=[STOPPING_K], user_positions=eval_users
        )
        recall = report.recall[STOPPING_K]
        improved = state.record_validation(recall, params)
        record = EpochRecord(
            epoch=state.epoch,
            l_main=l_main,
            l_cl=l_cl,
            l_total=l_total,
            val_recall50=recall,
            elapsed_seconds=time.perf_counter() - started,
        )
        history.append(record)
        logger.info(
            "Epoch %d: L_main=%.4f L_cl=%.4f L_total=%.4f val R@50=%.4f%s (%.1fs)",
            record.epoch,
            l_main,
            l_cl,
            l_total,
            recall,
            " *" if improved else "",
            record.elapsed_seconds,
        )

        if out is not None:
            extra = {"epoch": state.epoch, "val_recall50": recall, "variant": wiring.variant}
            save_checkpoint(out / "last.ckpt", params, config.echo(), extra)
            if improved:
                save_checkpoint(out / "best.ckpt", params, config.echo(), extra)
            _write_log(out / "train_log.csv", history)

        if state.should_stop(config.patience):
            stopped_early = True
            logger.info(
                "Early stopping after epoch %d; best epoch %d with R@50=%.4f",
                state.epoch,
                state.best_epoch,
                state.best_recall,
            )
            break

    assert state.best_params is not None
    return FitResult(
        params=state.best_params,
        wiring=wiring,
        best_epoch=state.best_epoch,
        best_recall=state.best_recall,
        stopped_early=stopped_early,
        history=history,
    )

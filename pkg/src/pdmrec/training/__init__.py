"""Variant switchboard, loss assembly and the early-stopping training loop."""

from pdmrec.training.trainer import (
    EpochRecord,
    FitResult,
    LossBreakdown,
    TrainingBatch,
    TrainState,
    compute_losses,
    fit,
    main_loss,
    make_batch,
    run_epoch,
    train_step,
)
from pdmrec.training.variants import (
    ModelWiring,
    augmentation_ops,
    build_spec,
    variant_switch,
)

__all__ = [
    "EpochRecord",
    "FitResult",
    "LossBreakdown",
    "ModelWiring",
    "TrainState",
    "TrainingBatch",
    "augmentation_ops",
    "build_spec",
    "compute_losses",
    "fit",
    "main_loss",
    "make_batch",
    "run_epoch",
    "train_step",
    "variant_switch",
]

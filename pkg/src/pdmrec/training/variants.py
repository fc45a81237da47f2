"""Ablation switchboard: variant tag -> model wiring.

AIDEV-NOTE: The variants differ from the full model in exactly one way:
- PDMRec1: no contrastive encoder (lambda forced to 0)
- PDMRec2: no positional encoder and no positional parameters
- PDMRec3: no positional branch; E + P is fed as the encoder input
- PDMRec4/5/6: mask / crop / all three augmentations instead of reorder
- PDMRec7: the last hidden vector is the contrastive representation
- PDMRec8: the post-aggregation output (with positions) is used instead
"""

from dataclasses import dataclass

from pdmrec.config import VARIANTS, TrainConfig
from pdmrec.contrastive.augment import AugmentationKind, AugmentationOp
from pdmrec.contrastive.loss import ClRepresentation
from pdmrec.errors import ConfigError
from pdmrec.model.params import ModelSpec, PositionalMode


@dataclass(frozen=True)
class ModelWiring:
    """How one variant assembles the encoder and the training objective."""

    variant: str
    positional_mode: PositionalMode
    contrastive: bool
    augmentations: tuple[AugmentationKind, ...]
    cl_representation: ClRepresentation
    lambda_cl: float

    @property
    def uses_mask_token(self) -> bool:
        return "mask" in self.augmentations


def variant_switch(config: TrainConfig) -> ModelWiring:
    variant = config.variant
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")

    mode: PositionalMode = "decoupled"
    contrastive = True
    augmentations: tuple[AugmentationKind, ...] = ("reorder",)
    representation: ClRepresentation = "concat"

    if variant == "PDMRec1":
        contrastive = False
    elif variant == "PDMRec2":
        mode = "none"
    elif variant == "PDMRec3":
        mode = "additive"
    elif variant == "PDMRec4":
        augmentations = ("mask",)
    elif variant == "PDMRec5":
        augmentations = ("crop",)
    elif variant == "PDMRec6":
        augmentations = ("reorder", "mask", "crop")
    elif variant == "PDMRec7":
        representation = "last"
    elif variant == "PDMRec8":
        representation = "post_aggregation"

    return ModelWiring(
        variant=variant,
        positional_mode=mode,
        contrastive=contrastive,
        augmentations=augmentations if contrastive else (),
        cl_representation=representation,
        lambda_cl=config.lambda_cl if contrastive else 0.0,
    )


def build_spec(config: TrainConfig, num_items: int, wiring: ModelWiring) -> ModelSpec:
    """Model architecture for `num_items` items under the given wiring."""
    return ModelSpec(
        num_items=num_items,
        d=config.d,
        hd=config.hd,
        n_blocks=config.n_blocks,
        max_len=config.max_len,
        inner_dim=config.inner_dim,
        activation=config.activation,
        dropout=config.dropout,
        layer_norm_eps=config.layer_norm_eps,
        causal_mask=config.causal_mask,
        positional_mode=wiring.positional_mode,
        separate_value_projection=config.separate_value_projection,
        residual_from_embeddings=config.residual_from_embeddings,
        mask_token=wiring.uses_mask_token,
    )


def augmentation_ops(config: TrainConfig, wiring: ModelWiring) -> tuple[AugmentationOp, ...]:
    proportions: dict[AugmentationKind, float] = {
        "reorder": config.alpha,
        "mask": config.gamma,
        "crop": config.eta,
    }
    return tuple(AugmentationOp(kind, proportions[kind]) for kind in wiring.augmentations)

"""Learnable parameter set of the encoder.

AIDEV-NOTE: `ModelSpec` fixes the architecture; `ModelParams` is a read-only
mapping from parameter name to Tensor laid out by that spec. The positional
mode encodes the variant wiring the encoder needs:
- "decoupled": positional table P plus per-head W^p_Q / W^p_K (full model)
- "additive":  P only, added to the item embeddings at the input
- "none":      no positional parameters at all
Blocks are numbered from 1.
"""

from collections.abc import Iterator, Mapping
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pdmrec.errors import CheckpointError
from pdmrec.numerics.autograd import Array, Tensor

PositionalMode = Literal["decoupled", "additive", "none"]

ITEM_EMBEDDINGS = "item_embeddings"
POSITIONAL_EMBEDDINGS = "positional_embeddings"


class ModelSpec(BaseModel):
    """Architecture hyperparameters; everything the forward pass depends on."""

    model_config = ConfigDict(frozen=True)

    num_items: Annotated[int, Field(ge=1)]
    d: Annotated[int, Field(ge=1)] = 64
    hd: Annotated[int, Field(ge=1)] = 2
    n_blocks: Annotated[int, Field(ge=1)] = 2
    max_len: Annotated[int, Field(ge=1)] = 50
    inner_dim: Annotated[int, Field(ge=1)] = 64
    activation: Literal["relu", "gelu"] = "relu"
    dropout: Annotated[float, Field(ge=0.0, lt=1.0)] = 0.5
    layer_norm_eps: float = 1e-12
    causal_mask: bool = True
    positional_mode: PositionalMode = "decoupled"
    separate_value_projection: bool = False
    residual_from_embeddings: bool = False
    mask_token: bool = False

    @property
    def head_dim(self) -> int:
        return self.d // self.hd

    @property
    def vocab_rows(self) -> int:
        """Rows of the item table: padding row 0, items 1..|V|, optional mask row."""
        return self.num_items + 1 + (1 if self.mask_token else 0)

    @property
    def mask_index(self) -> int:
        """Index of the reserved mask token (only valid with mask_token)."""
        return self.num_items + 1

    def head_names(self, block: int, head: int) -> dict[str, str]:
        prefix = f"blocks.{block}.heads.{head}"
        names = {k: f"{prefix}.{k}" for k in ("w_q", "w_k", "w_v")}
        if self.positional_mode == "decoupled":
            names.update({k: f"{prefix}.{k}" for k in ("wp_q", "wp_k")})
            if self.separate_value_projection:
                names["wp_v"] = f"{prefix}.wp_v"
        return names

    def shapes(self) -> dict[str, tuple[int, ...]]:
        """Name -> shape for every parameter, in a stable order."""
        shapes: dict[str, tuple[int, ...]] = {ITEM_EMBEDDINGS: (self.vocab_rows, self.d)}
        if self.positional_mode != "none":
            shapes[POSITIONAL_EMBEDDINGS] = (self.max_len, self.d)
        for n in range(1, self.n_blocks + 1):
            for h in range(1, self.hd + 1):
                for name in self.head_names(n, h).values():
                    shapes[name] = (self.d, self.head_dim)
            shapes[f"blocks.{n}.mlp.w1"] = (self.d, self.inner_dim)
            shapes[f"blocks.{n}.mlp.b1"] = (self.inner_dim,)
            shapes[f"blocks.{n}.mlp.w2"] = (self.inner_dim, self.d)
            shapes[f"blocks.{n}.mlp.b2"] = (self.d,)
            shapes[f"blocks.{n}.norm.gain"] = (self.d,)
            shapes[f"blocks.{n}.norm.bias"] = (self.d,)
        return shapes


class ModelParams(Mapping[str, Tensor]):
    """Named parameter tensors of one model."""

    def __init__(self, spec: ModelSpec, tensors: dict[str, Tensor]) -> None:
        expected = spec.shapes()
        if set(tensors) != set(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise CheckpointError(f"parameter names differ: missing={missing} extra={extra}")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise CheckpointError(
                    f"{name} has shape {tensors[name].shape}, expected {shape}"
                )
        self.spec = spec
        self._tensors = {name: tensors[name] for name in expected}

    @classmethod
    def initialize(
        cls,
        spec: ModelSpec,
        rng: np.random.Generator,
        std: float = 0.02,
        dtype: str = "float32",
    ) -> "ModelParams":
        """Normal(0, std) weights and embeddings; unit gain, zero biases."""
        tensors: dict[str, Tensor] = {}
        for name, shape in spec.shapes().items():
            if name.endswith(".norm.gain"):
                data: Array = np.ones(shape)
            elif name.endswith((".norm.bias", ".b1", ".b2")):
                data = np.zeros(shape)
            else:
                data = rng.normal(0.0, std, size=shape)
            tensors[name] = Tensor(data.astype(dtype), requires_grad=True, name=name)
        return cls(spec, tensors)

    @classmethod
    def from_arrays(cls, spec: ModelSpec, arrays: Mapping[str, Array]) -> "ModelParams":
        return cls(
            spec,
            {
                name: Tensor(np.array(a), requires_grad=True, name=name)
                for name, a in arrays.items()
            },
        )

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    @property
    def dtype(self) -> np.dtype[np.floating]:
        return self._tensors[ITEM_EMBEDDINGS].dtype

    @property
    def item_embeddings(self) -> Tensor:
        return self._tensors[ITEM_EMBEDDINGS]

    @property
    def positional_embeddings(self) -> Tensor | None:
        return self._tensors.get(POSITIONAL_EMBEDDINGS)

    def arrays(self) -> dict[str, Array]:
        return {name: t.data for name, t in self._tensors.items()}

    def copy(self) -> "ModelParams":
        """Deep copy of every tensor (used for best-epoch snapshots)."""
        return ModelParams.from_arrays(self.spec, self.arrays())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

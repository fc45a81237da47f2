"""Learnable parameter counts."""

from pydantic import BaseModel

from pdmrec.model.params import ITEM_EMBEDDINGS, POSITIONAL_EMBEDDINGS, ModelParams


class ParameterCount(BaseModel):
    """Per-tensor counts with the embedding tables broken out."""

    per_tensor: dict[str, int]
    total: int
    item_embeddings: int
    positional_embeddings: int

    @property
    def item_embedding_share(self) -> float:
        return self.item_embeddings / self.total if self.total else 0.0


def count_parameters(params: ModelParams) -> ParameterCount:
    per_tensor = {name: int(t.data.size) for name, t in params.items()}
    return ParameterCount(
        per_tensor=per_tensor,
        total=sum(per_tensor.values()),
        item_embeddings=per_tensor[ITEM_EMBEDDINGS],
        positional_embeddings=per_tensor.get(POSITIONAL_EMBEDDINGS, 0),
    )

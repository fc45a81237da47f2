"""Evaluation report model and its key = value text form.

AIDEV-NOTE: Field order in the text form is fixed (split, users, mean
rank, recall@K ascending, ndcg@K ascending, config echo in key order,
optional wall clock) so ablation reports diff cleanly. Values are written
with repr()/JSON so parsing restores them exactly.
"""

import json
from typing import Any, Literal

from pydantic import BaseModel, Field, model_validator

from pdmrec.errors import DataError


class EvalReport(BaseModel):
    """Top-K metrics of one evaluation pass."""

    split: Literal["valid", "test"]
    users: int = Field(..., ge=0)
    mean_rank: float = Field(..., ge=0.0)
    recall: dict[int, float] = Field(default_factory=dict)
    ndcg: dict[int, float] = Field(default_factory=dict)
    config: dict[str, Any] = Field(default_factory=dict)
    wall_clock_seconds: float | None = None

    @model_validator(mode="after")
    def validate_metrics(self) -> "EvalReport":
        """Recall and NDCG share cutoffs, lie in [0, 1], and ndcg <= recall."""
        if set(self.recall) != set(self.ndcg):
            raise ValueError("recall and ndcg must use the same cutoffs")
        for k, r in self.recall.items():
            n = self.ndcg[k]
            if not (0.0 <= n <= r + 1e-12 <= 1.0 + 1e-12):
                raise ValueError(f"metrics out of range at K={k}: recall={r}, ndcg={n}")
        return self

    @property
    def ks(self) -> list[int]:
        return sorted(self.recall)

    def without_timing(self) -> "EvalReport":
        return self.model_copy(update={"wall_clock_seconds": None})

    def to_text(self) -> str:
        lines = [
            f"split = {self.split}",
            f"users = {self.users}",
            f"mean_rank = {self.mean_rank!r}",
        ]
        lines += [f"recall@{k} = {self.recall[k]!r}" for k in self.ks]
        lines += [f"ndcg@{k} = {self.ndcg[k]!r}" for k in self.ks]
        lines += [
            f"config.{key} = {json.dumps(self.config[key])}" for key in sorted(self.config)
        ]
        if self.wall_clock_seconds is not None:
            lines.append(f"wall_clock_seconds = {self.wall_clock_seconds!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        fields: dict[str, Any] = {"recall": {}, "ndcg": {}, "config": {}}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip():
                continue
            key, sep, value = raw.partition(" = ")
            if not sep:
                raise DataError(f"report line {lineno}: expected 'key = value'")
            if key.startswith(("recall@", "ndcg@")):
                metric, _, k = key.partition("@")
                fields[metric][int(k)] = float(value)
            elif key.startswith("config."):
                fields["config"][key.removeprefix("config.")] = json.loads(value)
            elif key in ("users",):
                fields[key] = int(value)
            elif key in ("mean_rank", "wall_clock_seconds"):
                fields[key] = float(value)
            else:
                fields[key] = value
        return cls.model_validate(fields)

    def summary(self) -> str:
        """One console line, e.g. for the ablation table."""
        parts = [f"R@{k}={self.recall[k]:.4f}" for k in self.ks]
        parts += [f"N@{k}={self.ndcg[k]:.4f}" for k in self.ks]
        return f"{self.split}: " + " ".join(parts)

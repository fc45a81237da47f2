"""Pydantic models for interaction logs, sequences and splits."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pdmrec.errors import ConfigError

SPLIT_FORMAT_VERSION = 1


class InteractionRecord(BaseModel):
    """One raw (user, item, time, engagement) event."""

    model_config = ConfigDict(frozen=True)

    user_id: str = Field(..., description="Opaque user id")
    item_id: str = Field(..., description="Opaque item id")
    timestamp: int = Field(..., description="Interaction time, dataset-native units")
    watch_time: float | None = Field(default=None, description="Seconds watched")
    loop_times: float | None = Field(default=None, description="Plays / duration")
    flags: frozenset[str] = Field(
        default_factory=frozenset, description="Satisfaction flags (like, share, ...)"
    )


class FilterRule(BaseModel):
    """Positive-interaction predicate: flag clause OR loop clause OR watch clause.

    AIDEV-NOTE: Thresholds are strict ("greater than"). A missing optional
    field never satisfies its clause. `required_flags` empty means any flag
    counts as satisfaction.
    """

    model_config = ConfigDict(frozen=True)

    name: str = Field(default="custom")
    flag_clause: bool = Field(default=False, description="Enable the flag clause")
    required_flags: frozenset[str] = Field(default_factory=frozenset)
    loop_threshold: float | None = Field(default=None)
    watch_threshold: float | None = Field(default=None)

    @model_validator(mode="after")
    def validate_clauses(self) -> "FilterRule":
        """At least one clause must be enabled."""
        if not (
            self.flag_clause
            or self.loop_threshold is not None
            or self.watch_threshold is not None
        ):
            raise ValueError("filter rule enables no clause")
        return self

    def accepts(self, record: InteractionRecord) -> bool:
        if self.flag_clause and record.flags:
            if not self.required_flags or record.flags & self.required_flags:
                return True
        if (
            self.loop_threshold is not None
            and record.loop_times is not None
            and record.loop_times > self.loop_threshold
        ):
            return True
        return (
            self.watch_threshold is not None
            and record.watch_time is not None
            and record.watch_time > self.watch_threshold
        )

    @classmethod
    def preset(cls, name: str) -> "FilterRule":
        """Dataset presets: wechat, tiktok1, tiktok2."""
        presets = {
            "wechat": cls(
                name="wechat", flag_clause=True, loop_threshold=1.1, watch_threshold=45.0
            ),
            "tiktok1": cls(name="tiktok1", loop_threshold=1.0),
            "tiktok2": cls(
                name="tiktok2", flag_clause=True, required_flags=frozenset({"like"})
            ),
        }
        try:
            return presets[name]
        except KeyError:
            raise ConfigError(
                f"unknown filter preset {name!r}; choose from {sorted(presets)}"
            )


class PositiveSequence(BaseModel):
    """A user's positive items in ascending time order (1-based item indices)."""

    user_index: int = Field(..., ge=0)
    items: list[int] = Field(...)

    @field_validator("items")
    @classmethod
    def validate_items(cls, v: list[int]) -> list[int]:
        """Index 0 is reserved for padding."""
        if any(i <= 0 for i in v):
            raise ValueError("item indices must be >= 1 (0 is padding)")
        return v


class IndexMap(BaseModel):
    """Dense index <-> raw id bijections. Item i maps to item_ids[i - 1]."""

    item_ids: list[str] = Field(default_factory=list)
    user_ids: list[str] = Field(default_factory=list)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    def item_index(self) -> dict[str, int]:
        return {raw: i + 1 for i, raw in enumerate(self.item_ids)}


class UserSplit(BaseModel):
    """Leave-one-out partition of one user's sequence."""

    user_index: int = Field(..., ge=0)
    train: list[int] = Field(..., min_length=1)
    valid: int = Field(..., ge=1)
    test: int = Field(..., ge=1)

    def history(self, split: Literal["valid", "test"]) -> list[int]:
        """Items the model may read before predicting the `split` target."""
        return self.train if split == "valid" else [*self.train, self.valid]

    def target(self, split: Literal["valid", "test"]) -> int:
        return self.valid if split == "valid" else self.test


class SplitDataset(BaseModel):
    """Serialized train/validation/test split plus the index map."""

    format_version: Literal[1] = SPLIT_FORMAT_VERSION
    num_items: int = Field(..., ge=1)
    users: list[UserSplit] = Field(default_factory=list)
    index_map: IndexMap = Field(default_factory=IndexMap)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @model_validator(mode="after")
    def validate_indices(self) -> "SplitDataset":
        """Every stored item index must fall inside 1..num_items."""
        for user in self.users:
            top = max(max(user.train), user.valid, user.test)
            if top > self.num_items:
                raise ValueError(
                    f"user {user.user_index} references item {top} > {self.num_items}"
                )
        return self


class DatasetStats(BaseModel):
    """User, item and interaction counts of a split."""

    users: int
    items: int
    interactions: int
    density: float
    avg_sequence_length: float

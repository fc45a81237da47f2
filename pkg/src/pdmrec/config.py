"""Configuration management using pydantic-settings.

AIDEV-NOTE: Two settings classes live here. `Settings` holds process-level
knobs (logging) read from the environment. `TrainConfig` holds every model
and training hyperparameter; it can be filled from a flat `key = value`
file, from PDMREC_* environment variables, and from CLI overrides.
"""

from functools import lru_cache
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pdmrec.errors import ConfigError

Variant = Literal[
    "full",
    "PDMRec1",
    "PDMRec2",
    "PDMRec3",
    "PDMRec4",
    "PDMRec5",
    "PDMRec6",
    "PDMRec7",
    "PDMRec8",
]

VARIANTS: tuple[str, ...] = (
    "full",
    "PDMRec1",
    "PDMRec2",
    "PDMRec3",
    "PDMRec4",
    "PDMRec5",
    "PDMRec6",
    "PDMRec7",
    "PDMRec8",
)


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="PDMREC_",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO", description="Root logger level"
    )
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="logging.basicConfig format string",
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v: Any) -> Any:
        """Accept lower-case level names."""
        return v.strip().upper() if isinstance(v, str) else v


class TrainConfig(BaseSettings):
    """Model, augmentation and optimization hyperparameters.

    Defaults: d=64, two heads, two blocks, reorder proportion 0.2,
    contrastive weight 0.1, dropout 0.5, Adam with lr 0.001, batch 512,
    early stopping patience 15.
    """

    model_config = SettingsConfigDict(
        env_prefix="PDMREC_",
        case_sensitive=False,
        extra="forbid",
        validate_assignment=True,
    )

    # Encoder shape
    d: Annotated[int, Field(ge=1)] = Field(default=64, description="Embedding size")
    hd: Annotated[int, Field(ge=1)] = Field(default=2, description="Attention heads")
    n_blocks: Annotated[int, Field(ge=1)] = Field(
        default=2, description="Stacked context-aware blocks (N)"
    )
    max_len: Annotated[int, Field(ge=1)] = Field(
        default=50, description="Fixed sequence length L"
    )
    mlp_inner_dim: Annotated[int, Field(ge=0)] = Field(
        default=0, description="Aggregator MLP hidden width (0 = d)"
    )
    activation: Literal["relu", "gelu"] = Field(
        default="relu", description="Aggregator MLP nonlinearity"
    )
    dropout: Annotated[float, Field(ge=0.0, lt=1.0)] = Field(
        default=0.5, description="Dropout after the aggregator MLP"
    )
    layer_norm_eps: Annotated[float, Field(gt=0.0)] = Field(default=1e-12)
    init_std: Annotated[float, Field(gt=0.0)] = Field(
        default=0.02, description="Std of the normal initializer"
    )
    causal_mask: bool = Field(default=True, description="Lower-triangular attention")
    pad_left: bool = Field(
        default=True, description="Left padding keeps the latest item at slot L"
    )
    residual_from_embeddings: bool = Field(
        default=False,
        description="Use the raw embedding matrix as the residual at every block",
    )
    separate_value_projection: bool = Field(
        default=False, description="Give the positional branch its own W_V"
    )

    # Contrastive objective
    alpha: Annotated[float, Field(ge=0.0, le=1.0)] = Field(
        default=0.2, description="Reorder proportion"
    )
    gamma: Annotated[float, Field(ge=0.0, lt=1.0)] = Field(
        default=0.5, description="Mask proportion"
    )
    eta: Annotated[float, Field(ge=0.0, lt=1.0)] = Field(
        default=0.5, description="Crop proportion"
    )
    lambda_cl: Annotated[float, Field(ge=0.0)] = Field(
        default=0.1, description="Weight of the reordering sequence loss"
    )
    symmetric_cl: bool = Field(
        default=True, description="Average the loss over both anchor directions"
    )
    variant: Variant = Field(default="full", description="Ablation variant tag")

    # Optimization
    lr: Annotated[float, Field(gt=0.0)] = Field(default=0.001)
    adam_beta1: Annotated[float, Field(ge=0.0, lt=1.0)] = Field(default=0.9)
    adam_beta2: Annotated[float, Field(ge=0.0, lt=1.0)] = Field(default=0.999)
    adam_eps: Annotated[float, Field(gt=0.0)] = Field(default=1e-8)
    batch_size: Annotated[int, Field(ge=1)] = Field(default=512)
    patience: Annotated[int, Field(ge=0)] = Field(default=15)
    max_epochs: Annotated[int, Field(ge=1)] = Field(default=200)
    seed: int = Field(default=42)
    dtype: Literal["float32", "float64"] = Field(default="float32")

    # Evaluation
    eval_ks: str = Field(default="20,50,100", description="Comma-separated cutoffs")
    eval_user_sample: Annotated[int, Field(ge=0)] = Field(
        default=0, description="Validate on a user subsample per epoch (0 = all)"
    )

    @field_validator("eval_ks")
    @classmethod
    def validate_eval_ks(cls, v: str) -> str:
        """Cutoffs must be positive integers."""
        parts = [p.strip() for p in v.split(",") if p.strip()]
        if not parts or not all(p.isdigit() and int(p) >= 1 for p in parts):
            raise ValueError(f"eval_ks must list positive integers, got {v!r}")
        return ",".join(parts)

    @model_validator(mode="after")
    def validate_heads(self) -> "TrainConfig":
        """The embedding size has to split evenly across heads."""
        if self.d % self.hd != 0:
            raise ValueError(f"d={self.d} is not divisible by hd={self.hd}")
        return self

    @property
    def head_dim(self) -> int:
        """Per-head width dh = d / hd."""
        return self.d // self.hd

    @property
    def inner_dim(self) -> int:
        """Resolved aggregator MLP width."""
        return self.mlp_inner_dim or self.d

    @property
    def ks(self) -> list[int]:
        """Return evaluation cutoffs as a sorted list."""
        return sorted({int(p) for p in self.eval_ks.split(",")})

    def echo(self) -> dict[str, Any]:
        """Plain dict of every field, used in checkpoints and reports."""
        return self.model_dump(mode="json")


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat `key = value` text into a dict of raw strings.

    Blank lines and `#` comments are ignored. A line without `=` is an error.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def load_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> TrainConfig:
    """Build a TrainConfig from an optional file plus overrides.

    AIDEV-NOTE: Precedence is overrides > file > PDMREC_* env > defaults;
    pydantic-settings gives init kwargs priority over the environment, so
    both file values and overrides are passed as kwargs.
    """
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"{path} is not UTF-8 text: {exc.reason}") from exc
        values.update(parse_config_text(text))
    if overrides:
        values.update(overrides)
    try:
        return TrainConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance.

    AIDEV-NOTE: Cached to avoid re-parsing environment variables.
    For testing, create Settings instances directly.
    """
    return Settings()

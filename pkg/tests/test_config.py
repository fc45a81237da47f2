"""Tests for configuration management."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from pdmrec.config import (
    Settings,
    TrainConfig,
    get_settings,
    load_config,
    parse_config_text,
)
from pdmrec.errors import ConfigError


class TestSettings:
    """Tests for the process-level Settings class."""

    def test_default_values(self) -> None:
        """Test that default values are set correctly."""
        settings = Settings()
        assert settings.log_level in {"DEBUG", "INFO", "WARNING", "ERROR"}
        assert "%(levelname)s" in settings.log_format

    def test_log_level_is_normalized(self) -> None:
        """Lower-case level names are accepted."""
        assert Settings(log_level="debug").log_level == "DEBUG"

    def test_invalid_log_level(self) -> None:
        with pytest.raises(ValidationError):
            Settings(log_level="chatty")

    def test_get_settings_cached(self) -> None:
        """Test that get_settings returns cached instance."""
        get_settings.cache_clear()
        assert get_settings() is get_settings()


class TestTrainConfig:
    """Tests for TrainConfig defaults and validation."""

    def test_default_hyperparameters(self) -> None:
        config = TrainConfig()
        assert config.d == 64
        assert config.hd == 2
        assert config.n_blocks == 2
        assert config.alpha == 0.2
        assert config.lambda_cl == 0.1
        assert config.dropout == 0.5
        assert config.lr == 0.001
        assert config.batch_size == 512
        assert config.patience == 15
        assert config.max_epochs == 200
        assert config.variant == "full"
        assert config.causal_mask is True
        assert config.pad_left is True

    def test_head_dim_and_inner_dim(self) -> None:
        config = TrainConfig(d=12, hd=3)
        assert config.head_dim == 4
        assert config.inner_dim == 12
        assert TrainConfig(mlp_inner_dim=32).inner_dim == 32

    def test_d_must_divide_by_heads(self) -> None:
        with pytest.raises(ValidationError, match="not divisible"):
            TrainConfig(d=10, hd=3)

    @pytest.mark.parametrize(
        "field, value",
        [("dropout", 1.0), ("alpha", 1.5), ("gamma", 1.0), ("lr", 0.0), ("batch_size", 0)],
    )
    def test_out_of_range_values(self, field: str, value: float) -> None:
        with pytest.raises(ValidationError):
            TrainConfig(**{field: value})

    def test_ks_sorted_and_deduplicated(self) -> None:
        assert TrainConfig(eval_ks="100, 20,50,20").ks == [20, 50, 100]

    def test_bad_ks_rejected(self) -> None:
        with pytest.raises(ValidationError, match="eval_ks"):
            TrainConfig(eval_ks="0,a")

    def test_unknown_variant_rejected(self) -> None:
        with pytest.raises(ValidationError):
            TrainConfig(variant="PDMRec9")

    def test_echo_rebuilds_same_config(self) -> None:
        config = TrainConfig(d=16, variant="PDMRec3", symmetric_cl=False)
        assert TrainConfig(**config.echo()) == config


class TestConfigFiles:
    """Tests for the flat key = value format and load_config."""

    def test_parse_ignores_comments_and_blanks(self) -> None:
        values = parse_config_text("# header\n\nd = 16  # width\nvariant=PDMRec2\n")
        assert values == {"d": "16", "variant": "PDMRec2"}

    def test_parse_rejects_line_without_equals(self) -> None:
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("d = 16\njust words\n")

    def test_load_typed_values(self, config_file: Path) -> None:
        config = load_config(config_file)
        assert config.d == 8
        assert config.max_len == 8
        assert config.dropout == 0.0
        assert config.ks == [5, 10]

    def test_overrides_win_over_file(self, config_file: Path) -> None:
        config = load_config(config_file, {"d": "16", "causal_mask": "false"})
        assert config.d == 16
        assert config.causal_mask is False
        assert config.max_len == 8

    def test_unknown_key_is_config_error(self, config_file: Path) -> None:
        with pytest.raises(ConfigError):
            load_config(config_file, {"embedding_width": "8"})

    def test_invalid_value_is_config_error(self) -> None:
        with pytest.raises(ConfigError):
            load_config(None, {"variant": "PDMRec9"})

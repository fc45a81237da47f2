"""Exception hierarchy shared by every pdmrec module.

AIDEV-NOTE: Each error carries the process exit code the CLI maps it to.
ConfigError/DimensionError/DataError also subclass ValueError so callers
that only know about the builtin keep working.
"""


class PDMRecError(Exception):
    """Base class for all pdmrec errors."""

    exit_code = 1


class ConfigError(PDMRecError, ValueError):
    """Invalid configuration value or unknown option."""

    exit_code = 1


class DimensionError(PDMRecError, ValueError):
    """Operand shapes do not line up."""

    exit_code = 3


class DataError(PDMRecError, ValueError):
    """Malformed input data or an index outside the item vocabulary."""

    exit_code = 3


class CheckpointError(PDMRecError):
    """Checkpoint file is unreadable or does not match the configuration."""

    exit_code = 2

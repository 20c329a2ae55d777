"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(RuntimeError):
    """An operation was invoked outside its documented contract."""


class InputError(ValueError):
    """Malformed user-facing input (text, token sequence, prompt)."""


class ConfigError(ValueError):
    """Invalid or missing configuration value."""


class DataError(ValueError):
    """Dataset does not meet the requirements of the operation."""


class SizeError(ValueError):
    """Problem instance exceeds a documented enumeration bound."""


class CheckpointFormatError(ValueError):
    """Checkpoint file is structurally malformed."""


class CheckpointCorruptionError(CheckpointFormatError):
    """Checkpoint payload fails its integrity check."""


class CheckpointVersionError(CheckpointFormatError):
    """Checkpoint format version is not supported."""

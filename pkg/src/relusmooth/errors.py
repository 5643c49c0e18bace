"""Shared exception types."""


class InputShapeError(ValueError):
    """An input vector or matrix does not match the expected dimensions."""


class InvalidLabelError(ValueError):
    """A class label is outside the model's label range."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


class ModelParseError(ValueError):
    """A model file is malformed; the message carries line/field context."""


class ConfigError(ValueError):
    """An experiment config is malformed; the message carries the field path."""


class InvariantViolation(RuntimeError):
    """A runtime contract was broken (reserved for CLI exit code 2)."""

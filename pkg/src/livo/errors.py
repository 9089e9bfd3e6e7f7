"""Exception types shared across the package."""


class LivoError(Exception):
    """Base class for all package errors.

    `category` is a short machine-readable tag used by the CLI when
    reporting failures on stderr.
    """

    category = "internal"


class InvalidArgumentError(LivoError, ValueError):
    category = "invalid-argument"


class UndistortionError(LivoError):
    category = "undistortion-failure"


class EmptyMapError(LivoError):
    category = "empty-map"


class NotReadyError(LivoError):
    category = "not-ready"


class InitializationError(LivoError):
    category = "initialization"


class DatasetError(LivoError):
    """Malformed dataset file or directory layout."""

    category = "parse"


class EvaluationError(LivoError):
    category = "evaluation"

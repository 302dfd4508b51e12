"""Error hierarchy shared by the engine, services and command line.

Every error carries the process exit code the CLI returns for it.
"""


class CrvaeError(Exception):
    exit_code: int = 1


class ConfigError(CrvaeError):
    """Invalid or unknown configuration, missing inputs, mismatched checkpoints."""

    exit_code = 2


class FormatError(CrvaeError):
    """Unreadable or malformed files: WAV, manifest, checkpoint."""

    exit_code = 3


class NumericalError(CrvaeError):
    """Non-finite values, failed gradient checks and other numeric failures."""

    exit_code = 4


class ShapeError(NumericalError, ValueError):
    pass


class DegeneracyError(NumericalError):
    """Rank-deficient or singular inputs to a matrix routine."""


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a formula."""


class DegenerateInputError(DomainError):
    """Silent signal where signal energy is required."""


class AlignmentError(CrvaeError):
    """Reference and estimate sets do not line up."""

    exit_code = 5

    def __init__(self, message: str, missing: list[str] | None = None) -> None:
        super().__init__(message)
        self.missing = missing or []

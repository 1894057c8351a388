"""Exception hierarchy.

Every error family carries the process exit code the CLI uses for it.
"""


class AcousticPowerError(Exception):
    exit_code = 1


class ParseError(AcousticPowerError):
    exit_code = 3


class UnsupportedFormatError(AcousticPowerError):
    exit_code = 4


class EmptyInputError(AcousticPowerError):
    exit_code = 5


class AlignmentError(AcousticPowerError):
    exit_code = 6


class InvalidInputError(AcousticPowerError):
    exit_code = 7


class InvalidBandError(InvalidInputError):
    pass


class DegenerateBinError(InvalidInputError):
    pass


class DegenerateRangeError(InvalidInputError):
    pass


class DimensionError(AcousticPowerError):
    exit_code = 8


class DivergenceError(AcousticPowerError):
    exit_code = 9

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite loss) at epoch {epoch}")


class IncompatibleModelError(AcousticPowerError):
    exit_code = 10


class StratificationError(AcousticPowerError):
    exit_code = 11


class SynthesisError(AcousticPowerError):
    """Internal invariant violated while synthesizing audio (e.g. clipping)."""

    exit_code = 70

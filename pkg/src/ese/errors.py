"""Exception hierarchy.  Each class carries the CLI exit status for its class."""


class EseError(Exception):
    exit_code = 1


class ParameterError(EseError, ValueError):
    exit_code = 3


class LengthError(ParameterError):
    """A bit length does not fit the data or capacity supplied."""


class DegenerateKeyError(EseError, ValueError):
    """A zero key would expand to a zero pad."""

    exit_code = 4


class InsufficientKeyError(EseError):
    exit_code = 5

    def __init__(self, required_bits: int, available_bits: int):
        self.required_bits = required_bits
        self.available_bits = available_bits
        super().__init__(
            f"insufficient key material: {required_bits} bits required, "
            f"{available_bits} bits available"
        )


class InvalidEstimateError(EseError, ValueError):
    """Entropy estimate is inconsistent (t > n, ratio ordering, non-positive heuristic)."""

    exit_code = 6


class ContainerFormatError(EseError):
    exit_code = 7


class CompressorError(EseError):
    exit_code = 8


class ModulusSearchError(EseError):
    exit_code = 9

"""Exception types shared across the package."""


class MarkedCusumError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MarkedCusumError):
    """Non-finite or structurally invalid numeric input."""


class NoValidBandwidthError(MarkedCusumError):
    """Every candidate bandwidth produced an everywhere-degenerate fit."""


class DegenerateNormalizerError(MarkedCusumError):
    """The residual-variance normalizer is zero; distribution-free scaling undefined."""


class ContractError(MarkedCusumError):
    """A call violated an interface contract (length/kind mismatch, bad mode)."""


class IngestError(MarkedCusumError):
    """Input file could not be parsed into a numeric sample."""


class TooFewObservationsError(IngestError):
    """Fewer usable rows than the minimum the pipeline supports."""

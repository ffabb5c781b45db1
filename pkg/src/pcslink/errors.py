"""Exception types shared across the package."""


class PcslinkError(Exception):
    """Base class for all package errors."""


class InvalidRateError(PcslinkError):
    """Shaping rate outside the achievable range of the alphabet."""


class InfeasibleRateError(PcslinkError):
    """No codec of the requested block length can reach the requested rate."""


class NotACodewordError(PcslinkError):
    """Sequence is outside the codec's codebook."""


class ConfigError(PcslinkError):
    """Inconsistent or out-of-range configuration."""


class PayloadUnderflowError(PcslinkError):
    """Payload bit stream too short for the requested number of blocks."""


class AlignmentError(PcslinkError):
    """Received symbol stream does not line up with the transmitted frame."""


class IntegrationError(PcslinkError):
    """Split-step integration diverged; reduce the step size."""

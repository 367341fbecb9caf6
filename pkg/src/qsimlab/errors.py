"""Exception hierarchy shared by every qsimlab module."""


class QsimError(Exception):
    """Base class for all library errors."""


class DimensionError(QsimError, ValueError):
    """Operands disagree on qubit count or shape."""


class ResourceError(QsimError, MemoryError):
    """Requested size exceeds a dense-simulation cap."""


class InvalidGeneratorError(QsimError, ValueError):
    """Pauli exponential requested with a non-Hermitian generator."""


class EncodingError(QsimError, ValueError):
    """Fermionic mode index or expression is invalid for the encoding."""


class PlanError(QsimError, ValueError):
    """Trotter or LCU plan parameters are inconsistent."""


class ObservableError(QsimError, ValueError):
    """Observable is not Hermitian."""


class ChannelError(QsimError, ValueError):
    """Noise channel parameters out of range."""


class RoutingError(QsimError, ValueError):
    """Circuit cannot be embedded on the layout without SWAP insertion."""


class ConditioningError(QsimError, ValueError):
    """Confusion matrix is singular or too badly conditioned to invert."""


class SpectralRangeError(QsimError, ValueError):
    """Sampling grid would alias the spectrum."""

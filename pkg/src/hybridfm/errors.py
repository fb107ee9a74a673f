"""Exception types raised across the package."""


class HybridFMError(Exception):
    """Base class for all package errors."""


class ParseError(HybridFMError, ValueError):
    pass


class EmptyMeshError(HybridFMError, ValueError):
    pass


class DegenerateMeshError(HybridFMError, ValueError):
    pass


class IndexOutOfRange(HybridFMError, IndexError):
    pass


class DimensionMismatch(HybridFMError, ValueError):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class DimensionError(DimensionMismatch):
    """Problem size above a solver guard."""


class NumericalError(HybridFMError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    pass


class RankError(HybridFMError, ValueError):
    pass


class NotSPD(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class InsufficientSpectrum(HybridFMError, ValueError):
    pass


class EmptyEmbedding(HybridFMError, ValueError):
    pass


class ScheduleError(HybridFMError, ValueError):
    pass


class ChecksumError(HybridFMError, IOError):
    pass

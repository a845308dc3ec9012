"""Exception hierarchy.

ValidationError maps to CLI exit code 2, NumericalError (and subclasses)
to exit code 3.
"""


class TorusspecError(Exception):
    pass


class ValidationError(TorusspecError):
    """Bad configuration or precondition violation detectable up front."""


class NumericalError(TorusspecError):
    """A numerical procedure failed to meet its contract."""


class DivisorFloorError(NumericalError):
    """A Fourier divisor fell below the configured magnitude floor."""


class NonContractionError(NumericalError):
    """Fixed-point iteration stopped contracting."""


class UntrustedWindowError(NumericalError):
    """Quantization window failed the spectral trust check."""


class EigensolverError(NumericalError):
    """The dense eigensolver backend did not converge."""

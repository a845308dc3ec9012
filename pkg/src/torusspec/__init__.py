"""torusspec: spectra of weakly non-selfadjoint operators on the 2-torus.

Predicts all eigenvalues in a spectral rectangle for operators p + i*eps*q
with periodic unperturbed flow, via trajectory averaging, a small-divisor
eiconal solver, and a quantum Birkhoff normal form, and verifies the
predicted lattice against dense diagonalization of the Weyl-quantized
operator in a Floquet Fourier basis.
"""

from .symbols import (
    FourierTaylorSymbol,
    HSeries,
    KERNEL_BACKEND,
    multiply,
    poisson_bracket,
    star_bidifferential,
    taylor_reciprocal,
    moyal_conjugation_step,
    weight_conjugation,
    hseries_star,
)

__version__ = "0.1.0"

__all__ = [
    "FourierTaylorSymbol",
    "HSeries",
    "KERNEL_BACKEND",
    "multiply",
    "poisson_bracket",
    "star_bidifferential",
    "taylor_reciprocal",
    "moyal_conjugation_step",
    "weight_conjugation",
    "hseries_star",
    "__version__",
]

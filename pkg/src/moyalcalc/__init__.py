"""Numerical calculus on Moyal spaces: Weyl-quantised symbols, grid operators,
oscillator-basis matrices and singular-value diagnostics."""

__version__ = "0.1.0"

from .core_algebra import (  # noqa: E402
    QElement,
    Symbol,
    SymbolGrid,
    ThetaMatrix,
    derivative,
    dilate,
    l2_norm,
    lp_norm,
    mollifier,
    sobolev_seminorm,
    theta_canonical_form,
    trace,
    twisted_convolve,
)
from .errors import CapabilityError, MoyalError, NumericalError, SupportWarning, ValidationError  # noqa: E402
from .grid_operator import GridOperator, OperatorGrid, quantize  # noqa: E402
from .matrix_rep import OscillatorRep, represent  # noqa: E402
from .spectral import SingularProfile, decay_exponent, dixmier_estimate, singular_values, weak_quasinorm  # noqa: E402

__all__ = [
    "CapabilityError", "GridOperator", "MoyalError", "NumericalError", "OperatorGrid", "OscillatorRep",
    "QElement", "SingularProfile", "SupportWarning", "Symbol", "SymbolGrid", "ThetaMatrix", "ValidationError",
    "decay_exponent", "derivative", "dilate", "dixmier_estimate", "l2_norm", "lp_norm", "mollifier",
    "quantize", "represent", "singular_values", "sobolev_seminorm", "theta_canonical_form", "trace",
    "twisted_convolve", "weak_quasinorm",
]

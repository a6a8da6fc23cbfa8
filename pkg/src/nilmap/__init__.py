"""Exact construction, inversion and simulation of polynomial maps with
nilpotent Jacobian, and of the almost Hurwitz fields built from them."""

from .polycore import PolyMap, Polynomial, TermCapExceeded, get_term_cap, set_term_cap, to_rational
from .jacobian import (
    NilpotencyCertificate,
    PolyMatrix,
    char_poly,
    is_nilpotent,
    jacobian_of,
    mat_mul,
    mat_pow,
    rows_dependent_over_R,
)
from .inversion import InverseBundle, PreservationRecord, formal_inverse, jbar_series_check, preservation_check

__version__ = "0.1.0"

__all__ = [
    "PolyMap",
    "Polynomial",
    "TermCapExceeded",
    "get_term_cap",
    "set_term_cap",
    "to_rational",
    "NilpotencyCertificate",
    "PolyMatrix",
    "char_poly",
    "is_nilpotent",
    "jacobian_of",
    "mat_mul",
    "mat_pow",
    "rows_dependent_over_R",
    "InverseBundle",
    "PreservationRecord",
    "formal_inverse",
    "jbar_series_check",
    "preservation_check",
    "__version__",
]

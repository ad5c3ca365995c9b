"""Exact Darboux transformations of generalized Airy operators."""

from __future__ import annotations

from .airy import (
    ConstructionError,
    CuspDivisor,
    KbarResult,
    build_bordered_matrix,
    build_kbar,
    check_structure,
    structure_residuals,
    flat_kbar,
    flat_via_weyl,
    kbar_series_oracle,
)
from .arith import Poly, RatFunc, Rational, TriPoly, parse_rational
from .involution import (
    BetaResult,
    FormalEigenfunction,
    OutsideDomainError,
    compute_beta,
    eigenfunction_symmetry_check,
    gamma_from_wronskian,
    verify_involution,
)
from .operators import AiryVacuum, DiffOp, WeylOp, right_divide
from .report import ProblemError, ProblemSpec, RunReport, emit_report, parse_problem, run_pipeline
from .stabilizer import (
    BispectralRing,
    NotInStabilizerError,
    StabilizerBasis,
    build_ring,
    darboux_conjugate,
    stabilizer_closed,
    stabilizer_generic,
    truerank_witness,
)

__all__ = [
    "AiryVacuum",
    "BetaResult",
    "BispectralRing",
    "ConstructionError",
    "CuspDivisor",
    "DiffOp",
    "FormalEigenfunction",
    "KbarResult",
    "NotInStabilizerError",
    "OutsideDomainError",
    "Poly",
    "ProblemError",
    "ProblemSpec",
    "RatFunc",
    "Rational",
    "RunReport",
    "StabilizerBasis",
    "TriPoly",
    "WeylOp",
    "build_bordered_matrix",
    "build_kbar",
    "build_ring",
    "check_structure",
    "structure_residuals",
    "compute_beta",
    "darboux_conjugate",
    "eigenfunction_symmetry_check",
    "emit_report",
    "flat_kbar",
    "flat_via_weyl",
    "gamma_from_wronskian",
    "kbar_series_oracle",
    "parse_problem",
    "parse_rational",
    "right_divide",
    "run_pipeline",
    "stabilizer_closed",
    "stabilizer_generic",
    "truerank_witness",
    "verify_involution",
]

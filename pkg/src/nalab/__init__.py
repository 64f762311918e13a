"""Numerical laboratory for p-adic analysis, product measures and group-valued flows."""
from .padic import (Ball, ConvergenceError, DomainError, PAdic, PMatrix, additive_character,
                    j_b_norm, matrix_exp, matrix_log, padic_from_rational, padic_norm)

__version__ = "0.1.0"

__all__ = [
    "Ball", "ConvergenceError", "DomainError", "PAdic", "PMatrix", "additive_character",
    "j_b_norm", "matrix_exp", "matrix_log", "padic_from_rational", "padic_norm",
]

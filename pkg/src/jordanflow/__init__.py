"""Hodograph solutions of the multi-dimensional Jordan system and its reductions."""

from .expr import EvalError, Expr, ExprSyntaxError, diff, evaluate, parse, to_string
from .fields import FieldGrid, ResidualReport
from .hodograph import (
    AMatrix, FunSystem, PointDerivatives, SolveResult, assemble_A, blowup_first_time,
    field_derivatives, hodograph_residual, solve_hodograph, solve_hodograph_mixed,
)

__version__ = "0.1.0"

__all__ = [
    "EvalError", "Expr", "ExprSyntaxError", "diff", "evaluate", "parse", "to_string",
    "FieldGrid", "ResidualReport",
    "AMatrix", "FunSystem", "PointDerivatives", "SolveResult", "assemble_A",
    "blowup_first_time", "field_derivatives", "hodograph_residual", "solve_hodograph",
    "solve_hodograph_mixed",
]

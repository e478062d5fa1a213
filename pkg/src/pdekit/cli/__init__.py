"""Batch front end: problem files in, CSV tables and exit codes out."""

from .expr import Expr, ExpressionError, parse_expr
from .main import RunReport, main, run
from .problem import ProblemFile, ProblemFileError, load_problem, parse_problem

__all__ = ["Expr", "ExpressionError", "parse_expr", "RunReport", "main", "run", "ProblemFile",
           "ProblemFileError", "load_problem", "parse_problem"]

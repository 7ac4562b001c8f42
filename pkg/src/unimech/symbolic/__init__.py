"""Exact symbolic scalars, the DSL parser and the small linear-algebra layer."""
from . import symbols
from .chart import ChartSpec, NumericPoint
from .expr import ONE, ZERO, Expr, as_expr, as_symbol, parse_expr, sym
from .linalg import LinearSolution, determinant, solve_linear
from .parser import ParseError, ParseOptions, parse_expression, parse_lagrangian
from .zero import Sampler, ZeroVerdict, is_zero, nonzero_by_flags, zero_report


def differentiate(e: Expr, s) -> Expr:
    return e.diff(s)


def substitute(e: Expr, bindings: dict) -> Expr:
    return e.subs(bindings)


def evaluate(e: Expr, point) -> float:
    return e.eval(point)


__all__ = [
    "ChartSpec", "Expr", "as_expr", "as_symbol", "LinearSolution", "NumericPoint", "ONE", "ParseError", "ParseOptions",
    "Sampler", "ZERO", "ZeroVerdict", "determinant", "differentiate", "evaluate", "is_zero",
    "nonzero_by_flags", "parse_expr", "parse_expression", "parse_lagrangian", "solve_linear",
    "substitute", "sym", "symbols", "zero_report",
]

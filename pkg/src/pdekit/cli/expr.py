"""A small arithmetic grammar for coefficients in problem files.

Allowed: numbers, ``+ - * / ^`` (``**`` too), unary minus, parentheses,
``sin cos exp sqrt abs``, the constants ``pi`` and ``e`` and the variables
``t x y z u p``.  Expressions compile to numpy-vectorized callables and
can be differentiated exactly.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

import numpy as np
import sympy as sp

VARIABLES = ("t", "x", "y", "z", "u", "p")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}
CONSTANTS = {"pi": np.pi, "e": np.e}
_SYMPY = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt, "abs": sp.Abs,
          "pi": sp.pi, "e": sp.E, **{v: sp.Symbol(v) for v in VARIABLES}}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    """The text is not a valid expression of the grammar."""


def _check(node, allowed):
    if isinstance(node, ast.Expression):
        return _check(node.body, allowed)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        return _check(node.left, allowed) | _check(node.right, allowed)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY):
        return _check(node.operand, allowed)
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        return set()
    if isinstance(node, ast.Name):
        if node.id in allowed:
            return {node.id}
        if node.id in CONSTANTS:
            return set()
        raise ExpressionError(f"unknown name {node.id!r}; variables here: {', '.join(allowed)}")
    if isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS):
            raise ExpressionError(f"unknown function; allowed: {', '.join(FUNCTIONS)}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        return _check(node.args[0], allowed)
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:40]}")


@dataclass(frozen=True)
class Expr:
    """A parsed expression; call with keyword arrays, e.g. ``e(x=xs, t=0.5)``."""

    text: str
    variables: tuple
    sym: object

    def __post_init__(self):
        args = [sp.Symbol(v) for v in self.variables]
        object.__setattr__(self, "_fn", sp.lambdify(args, self.sym, modules="numpy"))

    def __call__(self, **values) -> np.ndarray:
        missing = set(self.variables) - set(values)
        if missing:
            raise ExpressionError(f"missing values for {sorted(missing)}")
        shape = np.broadcast_shapes(*(np.shape(v) for v in values.values()))
        with np.errstate(all="ignore"):
            out = self._fn(*(values[v] for v in self.variables))
        out = np.asarray(out, dtype=float)
        return out if out.shape == shape else np.broadcast_to(out, shape).copy()

    def diff(self, var: str) -> "Expr":
        d = sp.diff(self.sym, sp.Symbol(var))
        used = tuple(sorted(str(s) for s in d.free_symbols))
        return Expr(f"d({self.text})/d{var}", used, d)


def parse_expr(text: str, allowed=VARIABLES) -> Expr:
    """Parse ``text``; ``allowed`` restricts which variables may appear."""
    src = str(text).strip().replace("^", "**")
    if not src:
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    used = _check(tree, tuple(allowed))
    sym = sp.sympify(src, locals=_SYMPY)
    return Expr(str(text), tuple(sorted(used)), sym)

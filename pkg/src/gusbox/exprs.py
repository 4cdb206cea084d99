"""Arithmetic expression compiler for aggregate values and row ids.

Expressions are a restricted subset of Python syntax: column names,
numeric literals, ``+ - * /`` (``//`` and unary minus included), and
parentheses. They compile to a function of the row's value tuple.
"""

from __future__ import annotations

import ast
from typing import Callable, Sequence

from .errors import ExpressionError

_NUMERIC_TYPES = {"int64", "float64"}

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv)
_UNARYOPS = (ast.USub, ast.UAdd)


class _Rewriter(ast.NodeTransformer):
    def __init__(self, columns: Sequence[str], types: Sequence[str], what: str):
        self.columns = list(columns)
        self.types = list(types)
        self.what = what
        self.used: set[str] = set()

    def visit_Name(self, node: ast.Name):
        if node.id not in self.columns:
            raise ExpressionError(f"{self.what}: unknown column {node.id!r}")
        idx = self.columns.index(node.id)
        if self.types[idx] not in _NUMERIC_TYPES:
            raise ExpressionError(
                f"{self.what}: column {node.id!r} has type {self.types[idx]}, need a numeric column"
            )
        self.used.add(node.id)
        return ast.copy_location(
            ast.Subscript(
                value=ast.Name(id="v", ctx=ast.Load()),
                slice=ast.Constant(value=idx),
                ctx=ast.Load(),
            ),
            node,
        )

    def generic_visit(self, node):
        ok = (
            ast.Expression,
            ast.BinOp,
            ast.UnaryOp,
            ast.Constant,
            ast.Name,
            ast.Load,
            *_BINOPS,
            *_UNARYOPS,
        )
        if not isinstance(node, ok):
            raise ExpressionError(
                f"{self.what}: unsupported syntax {type(node).__name__!r}"
            )
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"{self.what}: literal {node.value!r} is not numeric")
        return super().generic_visit(node)


def compile_arith(text: str, columns: Sequence[str], types: Sequence[str],
                  what: str = "expression") -> Callable[[tuple], float]:
    """Compile ``text`` into a function mapping a value tuple to a number."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"{what}: cannot parse {text!r}: {exc.msg}") from None
    tree = _Rewriter(columns, types, what).visit(tree)
    ast.fix_missing_locations(tree)
    code = compile(tree, filename=f"<{what}>", mode="eval")
    return lambda v: eval(code, {"__builtins__": {}}, {"v": v})


def compile_int_arith(text: str, columns: Sequence[str], types: Sequence[str],
                      what: str = "id expression") -> Callable[[tuple], int]:
    """Like :func:`compile_arith` but every referenced column must be int64
    and the result is coerced through an integer check."""
    rewriter = _Rewriter(columns, types, what)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"{what}: cannot parse {text!r}: {exc.msg}") from None
    tree = rewriter.visit(tree)
    for name in rewriter.used:
        if types[list(columns).index(name)] != "int64":
            raise ExpressionError(f"{what}: column {name!r} must be int64")
    ast.fix_missing_locations(tree)
    code = compile(tree, filename=f"<{what}>", mode="eval")

    def evaluate(v: tuple) -> int:
        out = eval(code, {"__builtins__": {}}, {"v": v})
        if not isinstance(out, int):
            raise ExpressionError(f"{what}: produced non-integer {out!r}")
        return out

    return evaluate

"""Tokenizer and recursive-descent parser for the Lagrangian DSL.

Grammar (statements may share a line or be split over lines)::

    program   := stmt*
    stmt      := 'system' '(' 'dim' '=' INT ',' 'order' '=' INT ')'
               | 'params' '(' NAME (',' NAME)* ')'
               | 'nonzero' '(' NAME (',' NAME)* ')'
               | 'L' '=' expr                      # runs to end of line
    expr      := term (('+' | '-') term)*
    term      := unary (('*' | '/') unary)*
    unary     := ('+' | '-') unary | power
    power     := atom ('^' unary)?
    atom      := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

A newline inside parentheses continues the expression.  ``#`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import symbols as S
from .chart import ChartSpec
from .expr import Expr


class ParseError(ValueError):
    """Syntax or semantic error annotated with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0, kind: str = "syntax"):
        self.message = message
        self.line = line
        self.col = col
        self.kind = kind
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(f"{kind} error: {where}{message}")


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, NAME, OP, NL, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<comment>#[^\n]*)|(?P<nl>\n)"
    r"|(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),=])"
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    depth = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            if depth == 0:
                tokens.append(Token("NL", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "num":
            tokens.append(Token("NUM", s, line, col))
        elif kind == "name":
            tokens.append(Token("NAME", s, line, col))
        elif kind == "op":
            if s == "(":
                depth += 1
            elif s == ")":
                depth = max(0, depth - 1)
            tokens.append(Token("OP", s, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


_COORD_RE = re.compile(r"^([qpfFG])(\d+)(?:_(\d+))?$")


@dataclass
class ParseOptions:
    """Parser knobs; ``bindings`` assigns numeric values to parameters."""

    bindings: dict = field(default_factory=dict)
    require_declared_params: bool = False


class _Parser:
    def __init__(self, tokens, chart: ChartSpec | None = None, declared=None):
        self.toks = tokens
        self.i = 0
        self.chart = chart
        self.declared = declared

    # token helpers --------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.kind == "OP" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.tok
        if t.kind == "OP" and t.text == text:
            self.i += 1
            return t
        raise ParseError(f"expected {text!r}, found {_show(t)}", t.line, t.col)

    def expect_name(self) -> Token:
        t = self.tok
        if t.kind != "NAME":
            raise ParseError(f"expected a name, found {_show(t)}", t.line, t.col)
        self.i += 1
        return t

    def expect_int(self) -> int:
        t = self.tok
        if t.kind != "NUM" or "." in t.text:
            raise ParseError(f"expected an integer, found {_show(t)}", t.line, t.col)
        self.i += 1
        return int(t.text)

    # expressions ---------------------------------------------------------
    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance().text
            right = self.term()
            left = left + right if op == "+" else left - right
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            t = self.advance()
            right = self.unary()
            if t.text == "*":
                left = left * right
            else:
                if right.is_zero():
                    raise ParseError("division by zero", t.line, t.col, "semantic")
                left = left / right
        return left

    def unary(self) -> Expr:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "OP" and self.tok.text == "^":
            t = self.advance()
            exp = self.unary()
            val = exp.constant_value()
            if val is None or val.denominator not in (1, 2):
                raise ParseError("exponent must be an integer or half-integer constant",
                                 t.line, t.col, "semantic")
            try:
                return base ** (int(val) if val.denominator == 1 else val)
            except (ValueError, ZeroDivisionError) as exc:
                raise ParseError(str(exc), t.line, t.col, "semantic") from None
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "NUM":
            self.i += 1
            return Expr.const(Fraction(t.text))
        if t.kind == "OP" and t.text == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "NAME":
            self.i += 1
            if self.tok.kind == "OP" and self.tok.text == "(":
                return self.call(t)
            return self.name(t)
        raise ParseError(f"unexpected {_show(t)}", t.line, t.col)

    def call(self, fn: Token) -> Expr:
        self.expect("(")
        if fn.text == "sqrt":
            arg = self.expr()
            self.expect(")")
            try:
                return arg.sqrt()
            except ValueError as exc:
                raise ParseError(str(exc), fn.line, fn.col, "semantic") from None
        if fn.text == "dot":
            a = self.expect_name()
            self.expect(",")
            b = self.expect_name()
            self.expect(")")
            return self.dot(fn, a, b)
        raise ParseError(f"unknown function {fn.text!r}", fn.line, fn.col, "semantic")

    def dot(self, fn: Token, a: Token, b: Token) -> Expr:
        if self.chart is None:
            raise ParseError("dot() needs a declared system", fn.line, fn.col, "semantic")
        pair = []
        for t in (a, b):
            m = _COORD_RE.match(t.text)
            if not m or m.group(3) is not None:
                raise ParseError(f"dot() takes unsuffixed coordinate families, got {t.text!r}",
                                 t.line, t.col, "semantic")
            pair.append((m.group(1), int(m.group(2))))
        total = Expr({}, ())
        for idx in self.chart.indices:
            x = Expr.symbol(S.indexed(pair[0][0], pair[0][1], idx))
            y = Expr.symbol(S.indexed(pair[1][0], pair[1][1], idx))
            total = total + x * y
        return total

    def name(self, t: Token) -> Expr:
        m = _COORD_RE.match(t.text)
        if m:
            idx = m.group(3)
            if self.chart is not None:
                if self.chart.n > 1 and idx is None:
                    raise ParseError(f"{t.text!r} needs a component suffix in a dim={self.chart.n} system",
                                     t.line, t.col, "semantic")
                if idx is not None and not 1 <= int(idx) <= self.chart.n:
                    raise ParseError(f"component index of {t.text!r} is outside 1..{self.chart.n}",
                                     t.line, t.col, "semantic")
            return Expr.symbol(S.symbol_from_name(t.text))
        if t.text in ("sqrt", "dot"):
            raise ParseError(f"{t.text!r} must be called", t.line, t.col)
        if self.declared is not None and t.text not in self.declared:
            raise ParseError(f"undeclared parameter {t.text!r}", t.line, t.col, "semantic")
        return Expr.symbol(S.param(t.text))


def _show(t: Token) -> str:
    return {"EOF": "end of input", "NL": "end of line"}.get(t.kind, repr(t.text))


def parse_expression(text: str, chart: ChartSpec | None = None) -> Expr:
    """Parse a standalone expression (used for round-trips and CLI input)."""
    toks = [t for t in tokenize(text) if t.kind != "NL"]
    p = _Parser(toks, chart)
    e = p.expr()
    if p.tok.kind != "EOF":
        raise ParseError(f"trailing input {_show(p.tok)}", p.tok.line, p.tok.col)
    return e


def parse_lagrangian(source: str, options: ParseOptions | None = None):
    """Parse a DSL program into ``(ChartSpec, L)``."""
    options = options or ParseOptions()
    toks = tokenize(source)
    p = _Parser(toks)
    dims = None
    params: list[str] = []
    nonzero: list[str] = []
    lag = None
    lag_tok = None
    while p.tok.kind != "EOF":
        if p.tok.kind == "NL":
            p.advance()
            continue
        head = p.expect_name()
        if head.text == "system":
            if dims is not None:
                raise ParseError("system() declared twice", head.line, head.col, "semantic")
            p.expect("(")
            kw = {}
            while True:
                key = p.expect_name()
                p.expect("=")
                if key.text not in ("dim", "order"):
                    raise ParseError(f"unknown system() argument {key.text!r}", key.line, key.col)
                kw[key.text] = (p.expect_int(), key)
                if not p.accept(","):
                    break
            p.expect(")")
            for need in ("dim", "order"):
                if need not in kw:
                    raise ParseError(f"system() is missing {need}=", head.line, head.col)
                if kw[need][0] < 1:
                    t = kw[need][1]
                    raise ParseError(f"{need} must be positive", t.line, t.col, "semantic")
            dims = (kw["dim"][0], kw["order"][0])
        elif head.text in ("params", "nonzero"):
            p.expect("(")
            target = params if head.text == "params" else nonzero
            while True:
                t = p.expect_name()
                if _COORD_RE.match(t.text) or t.text in ("sqrt", "dot", "L"):
                    raise ParseError(f"{t.text!r} is reserved", t.line, t.col, "semantic")
                if head.text == "nonzero" and t.text not in params:
                    raise ParseError(f"nonzero() names undeclared parameter {t.text!r}",
                                     t.line, t.col, "semantic")
                if t.text not in target:
                    target.append(t.text)
                if not p.accept(","):
                    break
            p.expect(")")
        elif head.text == "L":
            if dims is None:
                raise ParseError("L must follow system()", head.line, head.col, "semantic")
            if lag is not None:
                raise ParseError("L defined twice", head.line, head.col, "semantic")
            p.expect("=")
            p.chart = ChartSpec(dims[0], dims[1], tuple(params), frozenset(nonzero))
            p.declared = set(params) if options.require_declared_params else None
            lag_tok = p.tok
            lag = p.expr()
            if p.tok.kind not in ("NL", "EOF"):
                raise ParseError(f"unexpected {_show(p.tok)} after expression", p.tok.line, p.tok.col)
        else:
            raise ParseError(f"unknown statement {head.text!r}", head.line, head.col)
    if dims is None:
        raise ParseError("missing system(dim=..., order=...)", 1, 1, "semantic")
    if lag is None:
        raise ParseError("missing Lagrangian definition 'L = ...'", p.tok.line, p.tok.col, "semantic")
    n, k = dims
    extra = []
    for s in sorted(lag.free_symbols()):
        if s.family == "q" and s.order > k:
            raise ParseError(f"{s.name} exceeds the declared order {k}",
                             lag_tok.line, lag_tok.col, "semantic")
        if s.family in ("p", "f", "F", "G"):
            raise ParseError(f"Lagrangian may not reference {s.name}",
                             lag_tok.line, lag_tok.col, "semantic")
        if s.family == "param" and s.name not in params:
            extra.append(s.name)
    chart = ChartSpec(n, k, tuple(params + extra), frozenset(nonzero))
    if options.bindings:
        chart = chart.with_bindings(options.bindings)
    return chart, lag


__all__ = ["ParseError", "ParseOptions", "parse_expression", "parse_lagrangian", "tokenize"]

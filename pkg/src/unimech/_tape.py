"""Lowering of expressions to a straight-line register program ("tape").

Registers ``0..n_inputs-1`` hold the inputs; every instruction appends one
register.  The tape is four flat arrays so the compiled kernel can run it
without touching Python objects.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symbolic import symbols as S

CONST, ADD, SUB, MUL, DIV, SQRT, NEG, POWI = range(8)


@dataclass
class Tape:
    ops: np.ndarray  # int32 opcode per instruction
    a: np.ndarray  # int32 first operand register (or power for POWI via b)
    b: np.ndarray  # int32 second operand register / integer exponent
    consts: np.ndarray  # float64 constant for CONST
    n_inputs: int
    outputs: np.ndarray  # int32 register of each output
    inputs: list  # Symbol per input slot

    @property
    def n_registers(self) -> int:
        return self.n_inputs + len(self.ops)


class _Builder:
    def __init__(self, inputs):
        self.inputs = list(inputs)
        self.slot = {s.sid: i for i, s in enumerate(self.inputs)}
        self.ops, self.a, self.b, self.c = [], [], [], []
        self.memo: dict = {}

    def emit(self, op, a=0, b=0, c=0.0, key=None):
        if key is not None and key in self.memo:
            return self.memo[key]
        self.ops.append(op)
        self.a.append(a)
        self.b.append(b)
        self.c.append(c)
        reg = len(self.inputs) + len(self.ops) - 1
        if key is not None:
            self.memo[key] = reg
        return reg

    def const(self, v: float) -> int:
        return self.emit(CONST, c=float(v), key=("c", float(v)))

    def power(self, sid: int, e: int) -> int:
        base = self.var(sid)
        if e == 1:
            return base
        return self.emit(POWI, base, e, key=("pow", sid, e))

    def var(self, sid: int) -> int:
        if sid in self.slot:
            return self.slot[sid]
        sym = S.by_sid(sid)
        if sym.family == "sqrt":
            inner = self.poly(sym.radicand)
            return self.emit(SQRT, inner, key=("sqrt", sid))
        raise KeyError(f"tape has no input for symbol {sym.name}")

    def poly(self, p: dict) -> int:
        key = ("poly", frozenset(p.items()))
        if key in self.memo:
            return self.memo[key]
        acc = None
        for m, coeff in sorted(p.items()):
            t = None
            for sid, e in S.decode(m):
                r = self.power(sid, e)
                t = r if t is None else self.emit(MUL, t, r)
            cf = float(coeff)
            if t is None:
                t = self.const(cf)
            elif cf == -1.0:
                t = self.emit(NEG, t)
            elif cf != 1.0:
                t = self.emit(MUL, self.const(cf), t)
            acc = t if acc is None else self.emit(ADD, acc, t)
        if acc is None:
            acc = self.const(0.0)
        self.memo[key] = acc
        return acc

    def expr(self, e) -> int:
        num = self.poly(e.num)
        if not e.den:
            return num
        den = None
        for atom, ex in e.den:
            r = self.poly(atom.poly)
            if ex != 1:
                r = self.emit(POWI, r, ex, key=("apow", id(atom), ex))
            den = r if den is None else self.emit(MUL, den, r)
        return self.emit(DIV, num, den)


def compile_tape(exprs, inputs) -> Tape:
    """Compile expressions over the ordered input symbols (coordinates and params)."""
    bld = _Builder(inputs)
    outs = [bld.expr(e) for e in exprs]
    return Tape(
        np.asarray(bld.ops, dtype=np.int32),
        np.asarray(bld.a, dtype=np.int32),
        np.asarray(bld.b, dtype=np.int32),
        np.asarray(bld.c, dtype=np.float64),
        len(bld.inputs),
        np.asarray(outs, dtype=np.int32),
        list(bld.inputs),
    )

"""Interned symbols and the packed-monomial layout shared by all polynomials.

Every symbol gets a slot index (``sid``) at creation.  A monomial is a Python
int holding one 16-bit exponent field per slot (15 exponent bits plus a guard
bit), so monomial multiplication is integer addition and integer comparison is
a lexicographic monomial order.  Symbols are interned: two requests for the
same coordinate return the same object, which makes identity comparison valid.
"""
from __future__ import annotations

import re
import threading

SLOT_BITS = 16
EXP_MASK = 0x7FFF

FAMILY_RANK = {"param": 0, "q": 1, "p": 2, "f": 3, "F": 4, "G": 5, "sqrt": 6}
INDEXED_FAMILIES = ("q", "p", "f", "F", "G")

_INDEXED_RE = re.compile(r"^([qpfFG])(\d+)(?:_(\d+))?$")

_lock = threading.Lock()
_by_key: dict[tuple, "Symbol"] = {}
_by_sid: list["Symbol"] = []
_radical_sids: list[int] = []
# bits 1..14 of every radical slot; nonzero overlap means an exponent >= 2
radical_high_mask = 0
guard_mask = 0


class Symbol:
    """A named scalar: coordinate, momentum, unknown coefficient, parameter or radical."""

    __slots__ = ("family", "order", "index", "name", "key", "sid", "unit", "radicand")

    def __init__(self, family, order, index, name, key, radicand=None):
        self.family = family
        self.order = order
        self.index = index
        self.name = name
        self.key = key
        self.radicand = radicand
        self.sid = -1
        self.unit = 0

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return self.name

    __str__ = __repr__

    def __reduce__(self):
        if self.family == "sqrt":
            return (_radical_from_text, (self.name,))
        return (symbol_from_name, (self.name,))

    @property
    def is_coordinate(self):
        return self.family in ("q", "p")

    @property
    def is_unknown(self):
        return self.family in ("f", "F", "G")


def _register(sym: Symbol) -> Symbol:
    global radical_high_mask, guard_mask
    with _lock:
        existing = _by_key.get(sym.key)
        if existing is not None:
            return existing
        sym.sid = len(_by_sid)
        sym.unit = 1 << (SLOT_BITS * sym.sid)
        _by_sid.append(sym)
        _by_key[sym.key] = sym
        guard_mask |= 1 << (SLOT_BITS * sym.sid + 15)
        if sym.family == "sqrt":
            _radical_sids.append(sym.sid)
            radical_high_mask |= 0x7FFE << (SLOT_BITS * sym.sid)
        return sym


def indexed(family: str, order: int, index: int = 0) -> Symbol:
    """Coordinate-like symbol; ``index`` 0 means a scalar chart (no suffix)."""
    key = (FAMILY_RANK[family], order, index)
    sym = _by_key.get(key)
    if sym is not None:
        return sym
    name = f"{family}{order}" if index == 0 else f"{family}{order}_{index}"
    return _register(Symbol(family, order, index, name, key))


def q(order: int, index: int = 0) -> Symbol:
    return indexed("q", order, index)


def p(order: int, index: int = 0) -> Symbol:
    return indexed("p", order, index)


def param(name: str) -> Symbol:
    if _INDEXED_RE.match(name) or name == "sqrt" or name == "dot":
        raise ValueError(f"parameter name {name!r} collides with a reserved name")
    key = (0, name)
    sym = _by_key.get(key)
    if sym is not None:
        return sym
    return _register(Symbol("param", 0, 0, name, key))


def radical(radicand: dict, key: tuple, text: str) -> Symbol:
    """Square-root generator for an integer-coefficient, radical-free polynomial."""
    k = (FAMILY_RANK["sqrt"], key)
    sym = _by_key.get(k)
    if sym is not None:
        return sym
    return _register(Symbol("sqrt", 0, 0, f"sqrt({text})", k, radicand=radicand))


def symbol_from_name(name: str) -> Symbol:
    m = _INDEXED_RE.match(name)
    if m:
        fam, order, idx = m.group(1), int(m.group(2)), m.group(3)
        return indexed(fam, order, int(idx) if idx is not None else 0)
    return param(name)


def _radical_from_text(text: str) -> Symbol:
    from .expr import parse_expr

    e = parse_expr(text)
    (sym,) = [s for s in e.radicals()]
    return sym


def by_sid(sid: int) -> Symbol:
    return _by_sid[sid]


def radical_sids() -> list[int]:
    return list(_radical_sids)


def decode(m: int) -> list[tuple[int, int]]:
    """Split a packed monomial into ``(sid, exponent)`` pairs."""
    out = []
    while m:
        low = (m & -m).bit_length() - 1
        slot = low >> 4
        shift = slot << 4
        e = (m >> shift) & EXP_MASK
        out.append((slot, e))
        m -= e << shift
    return out


def exponent(m: int, sym: Symbol) -> int:
    return (m >> (SLOT_BITS * sym.sid)) & EXP_MASK

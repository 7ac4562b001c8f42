"""Immutable symbolic scalars in canonical rational-function form.

An :class:`Expr` is ``num / prod(atom**e)`` where ``num`` is a polynomial over Q
in symbols and square-root generators (each generator appearing with exponent
at most one) and every atom is an irreducible, primitive, radical-free
polynomial with positive leading coefficient.  No atom divides ``num``.  With
these rules two expressions that are equal as elements of the field
Q(x)[s_1, ...]/(s_i**2 - g_i) have identical representations, provided no
radicand is a perfect square.
"""
from __future__ import annotations

import math
import threading
from fractions import Fraction

from gmpy2 import is_square, isqrt, mpq, mpz

from . import poly as P
from . import symbols as S


class Atom:
    """Irreducible denominator factor, interned by canonical key."""

    __slots__ = ("poly", "key", "text", "_powers")

    def __init__(self, poly, key, text):
        self.poly = poly
        self.key = key
        self.text = text
        self._powers = {1: poly}

    def power(self, e: int) -> dict:
        pw = self._powers.get(e)
        if pw is None:
            pw = P.power(self.poly, e)
            self._powers[e] = pw
        return pw

    def __repr__(self):
        return f"Atom({self.text})"


_atom_lock = threading.Lock()
_atoms: dict[tuple, Atom] = {}
_factor_cache: dict[tuple, tuple] = {}


def _atom_for(prim: dict) -> Atom:
    key = P.canonical_key(prim)
    a = _atoms.get(key)
    if a is None:
        with _atom_lock:
            a = _atoms.setdefault(key, Atom(prim, key, P.to_str(prim)))
    return a


def _factor(poly: dict):
    """``poly = c * prod(atom**e)``; radical-free, nonzero input."""
    if len(poly) == 1:
        ((m, c),) = poly.items()
        return c, [(_atom_for(P.var(S.by_sid(sid))), e) for sid, e in S.decode(m)]
    key = P.canonical_key(poly)
    hit = _factor_cache.get(key)
    if hit is not None:
        c0, facs, ref = hit
        # cached against a primitive representative; rescale
        c = P.leading_canonical(poly)[1] / P.leading_canonical(ref)[1] * c0
        return c, facs
    import sympy

    sids = sorted(P.symbols_of(poly))
    gens = [sympy.Symbol(f"x{sid}") for sid in sids]
    expr = sympy.Add(*[
        sympy.Rational(int(c.numerator), int(c.denominator))
        * sympy.Mul(*[gens[sids.index(sid)] ** e for sid, e in S.decode(m)])
        for m, c in poly.items()
    ])
    coeff, factors = sympy.factor_list(expr, *gens)
    c = mpq(int(sympy.fraction(coeff)[0]), int(sympy.fraction(coeff)[1]))
    facs = []
    for fexpr, e in factors:
        fp = {}
        for monom, fc in sympy.Poly(fexpr, *gens).terms():
            m = 0
            for sid, ex in zip(sids, monom):
                m += ex * S.by_sid(sid).unit
            num, den = sympy.fraction(fc)
            fp[m] = mpq(int(num), int(den))
        cont, prim = P.primitive(fp)
        c *= cont**e
        facs.append((_atom_for(prim), int(e)))
    facs.sort(key=lambda t: t[0].key)
    _factor_cache[key] = (c, facs, poly)
    return c, facs


def _den_poly(den: dict) -> dict:
    out = {0: P.ONE}
    for a, e in den.items():
        if e:
            out = P.mul(out, a.power(e))
    return out


def _make(num: dict, den: dict) -> "Expr":
    if not num:
        return ZERO
    den = {a: e for a, e in den.items() if e}
    for a in list(den):
        e = den[a]
        while e:
            qt = P.div_exact(num, a.poly)
            if qt is None:
                break
            num = qt
            e -= 1
        den[a] = e
    return Expr(num, tuple(sorted(((a, e) for a, e in den.items() if e), key=lambda t: t[0].key)))


def _raw_add(x, y):
    """Add ``(num, den-dict)`` pairs over their least common denominator."""
    nx, dx = x
    ny, dy = y
    if dx == dy:
        return P.add(nx, ny), dict(dx)
    lcd = dict(dx)
    for a, e in dy.items():
        if e > lcd.get(a, 0):
            lcd[a] = e
    fx = {a: e - dx.get(a, 0) for a, e in lcd.items()}
    fy = {a: e - dy.get(a, 0) for a, e in lcd.items()}
    return P.add(P.mul(nx, _den_poly(fx)), P.mul(ny, _den_poly(fy))), lcd


def _raw_mul(x, y):
    nx, dx = x
    ny, dy = y
    d = dict(dx)
    for a, e in dy.items():
        d[a] = d.get(a, 0) + e
    return P.mul(nx, ny), d


def as_expr(v) -> "Expr":
    if isinstance(v, Expr):
        return v
    if isinstance(v, S.Symbol):
        return Expr({v.unit: P.ONE}, ())
    if isinstance(v, (int, Fraction)) or type(v).__name__ in ("mpq", "mpz"):
        return Expr.const(v)
    if isinstance(v, float) and v.is_integer():
        return Expr.const(int(v))
    raise TypeError(f"cannot convert {type(v).__name__} to an exact expression")


class Expr:
    """Exact symbolic scalar; see the module docstring for the normal form."""

    __slots__ = ("num", "den", "_hash", "_str")

    def __init__(self, num: dict, den: tuple = ()):
        self.num = num
        self.den = den
        self._hash = None
        self._str = None

    # construction -------------------------------------------------------
    @staticmethod
    def const(c) -> "Expr":
        if isinstance(c, Fraction):
            c = mpq(c.numerator, c.denominator)
        return Expr(P.const(c), ())

    @staticmethod
    def symbol(sym: S.Symbol) -> "Expr":
        return Expr({sym.unit: P.ONE}, ())

    @staticmethod
    def from_poly(poly: dict) -> "Expr":
        return Expr(dict(poly), ())

    # structure ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return not self.den and P.is_const(self.num)

    def constant_value(self):
        """Exact value as ``Fraction`` when constant, else ``None``."""
        if not self.is_constant():
            return None
        c = self.num.get(0, P.ZERO)
        return Fraction(int(c.numerator), int(c.denominator))

    def free_symbols(self) -> set:
        """Non-radical symbols, including those hidden inside radicands and atoms."""
        sids = P.symbols_of(self.num)
        for a, _ in self.den:
            sids |= P.symbols_of(a.poly)
        out = set()
        for sid in sids:
            sym = S.by_sid(sid)
            if sym.family == "sqrt":
                out |= {S.by_sid(s) for s in P.symbols_of(sym.radicand)}
            else:
                out.add(sym)
        return out

    def radicals(self) -> list:
        return [S.by_sid(s) for s in P.symbols_of(self.num) if S.by_sid(s).family == "sqrt"]

    def depends_on(self, sym: S.Symbol) -> bool:
        return sym in self.free_symbols()

    def term_count(self) -> int:
        return len(self.num)

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        other = as_expr(other)
        if not other.num:
            return self
        if not self.num:
            return other
        n, d = _raw_add((self.num, dict(self.den)), (other.num, dict(other.den)))
        return _make(n, d)

    __radd__ = __add__

    def __neg__(self):
        return Expr(P.neg(self.num), self.den)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        other = as_expr(other)
        if not self.num or not other.num:
            return ZERO
        if not other.den and P.is_const(other.num):
            return Expr(P.scale(self.num, other.num[0]), self.den)
        if not self.den and P.is_const(self.num):
            return Expr(P.scale(other.num, self.num[0]), other.den)
        n, d = _raw_mul((self.num, dict(self.den)), (other.num, dict(other.den)))
        return _make(n, d)

    __rmul__ = __mul__

    def inverse(self) -> "Expr":
        if not self.num:
            raise ZeroDivisionError("division by the zero expression")
        if not self.den and P.is_const(self.num):
            return Expr({0: 1 / self.num[0]}, ())
        numer = _den_poly(dict(self.den))
        n = self.num
        for rad in self.radicals():
            u, v = P.split_radical(n, rad)
            if not v:
                continue
            conj = P.sub(u, P.mul(v, P.var(rad)))
            n = P.mul(n, conj)
            numer = P.mul(numer, conj)
        c, facs = _factor(n)
        return _make(P.scale(numer, 1 / c), dict(facs))

    def __truediv__(self, other):
        other = as_expr(other)
        if not other.den and P.is_const(other.num):
            if not other.num:
                raise ZeroDivisionError("division by the zero expression")
            return Expr(P.scale(self.num, 1 / other.num[0]), self.den)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return as_expr(other) * self.inverse()

    def __pow__(self, n):
        if isinstance(n, Fraction) and n.denominator == 2:
            root = self.sqrt()
            return root ** n.numerator
        if not isinstance(n, int):
            raise TypeError("only integer (or half-integer) exponents are supported")
        if n < 0:
            return self.inverse() ** (-n)
        if n == 0:
            return ONE
        if n == 1:
            return self
        num = P.power(self.num, n)
        den = {a: e * n for a, e in self.den}
        return _make(num, den)

    def sqrt(self) -> "Expr":
        if not self.num:
            return ZERO
        if self.radicals():
            raise ValueError("nested square roots are not supported")
        den = dict(self.den)
        odd = {a: e % 2 for a, e in den.items()}
        half = {a: (e + 1) // 2 for a, e in den.items()}
        radicand = P.mul(self.num, _den_poly(odd))
        outer = _make({0: P.ONE}, half)
        if P.is_const(radicand):
            c = radicand[0]
            if c < 0:
                raise ValueError("square root of a negative constant")
            r, rest = _split_square(c)
            if rest == 1:
                return outer * Expr.const(r)
            rad = S.radical({0: mpq(rest)}, P.canonical_key({0: mpq(rest)}), str(int(rest)))
            return outer * Expr.const(r) * Expr.symbol(rad)
        cont, prim = P.primitive(radicand)
        r, rest = _split_square(cont)
        inner = P.scale(prim, mpq(rest))
        rad = S.radical(inner, P.canonical_key(inner), P.to_str(inner))
        return outer * Expr.const(r) * Expr.symbol(rad)

    # calculus -----------------------------------------------------------
    def diff(self, sym) -> "Expr":
        """Exact partial derivative with respect to a non-radical symbol."""
        sym = as_symbol(sym)
        if not self.num:
            return ZERO
        if sym not in self.free_symbols():
            return ZERO
        den = dict(self.den)
        result = _make(P.deriv(self.num, sym), den)
        for rad in self.radicals():
            d_rad = P.deriv(rad.radicand, sym)
            if not d_rad:
                continue
            coeff = P.deriv(self.num, rad)
            # d sqrt(R) = R' * sqrt(R) / (2 R)
            term = _make(P.mul(P.mul(coeff, d_rad), P.var(rad)), den)
            result = result + term / (2 * Expr(dict(rad.radicand), ()))
        for a, e in self.den:
            da = P.deriv(a.poly, sym)
            if not da:
                continue
            d2 = dict(den)
            d2[a] = e + 1
            result = result - _make(P.scale(P.mul(self.num, da), e), d2)
        return result

    def subs(self, bindings: dict) -> "Expr":
        """Simultaneous substitution ``symbol -> Expr`` followed by normalization."""
        if not bindings or not self.num:
            return self
        bound = {}
        for k, v in bindings.items():
            bound[as_symbol(k).sid] = as_expr(v)
        touched = False
        num_sids = P.symbols_of(self.num)
        rad_values = {}
        for sid in num_sids:
            sym = S.by_sid(sid)
            if sym.family == "sqrt":
                if P.symbols_of(sym.radicand) & bound.keys():
                    rad_values[sid] = Expr(dict(sym.radicand), ()).subs(bindings).sqrt()
                    touched = True
            elif sid in bound:
                touched = True
        den_touched = any(P.symbols_of(a.poly) & bound.keys() for a, _ in self.den)
        if not touched and not den_touched:
            return self
        values = dict(bound)
        values.update(rad_values)
        num = _subs_poly(self.num, values) if touched else Expr(self.num, ())
        if not den_touched:
            return _make(num.num, {**dict(num.den), **{}}) if not self.den else _make_with_den(num, dict(self.den))
        den_expr = ONE
        for a, e in self.den:
            den_expr = den_expr * (_subs_poly(a.poly, values) ** e)
        return num / den_expr

    # numerics -----------------------------------------------------------
    def eval(self, point) -> float:
        """Float value at ``point`` (NumericPoint, or mapping keyed by Symbol or name)."""
        values = _numeric_values(self, point)
        out = P.evaluate(self.num, values)
        if self.den:
            d = 1.0
            for a, e in self.den:
                d *= P.evaluate(a.poly, values) ** e
            if d == 0.0:
                raise ZeroDivisionError(f"denominator vanishes while evaluating {self}")
            out /= d
        return out

    def eval_with_scale(self, point):
        """``(value, scale)`` where scale is the sum of absolute term sizes."""
        values = _numeric_values(self, point)
        val = P.evaluate(self.num, values)
        mag = P.abs_evaluate(self.num, values)
        d = 1.0
        for a, e in self.den:
            d *= P.evaluate(a.poly, values) ** e
        if d == 0.0:
            raise ZeroDivisionError(f"denominator vanishes while evaluating {self}")
        return val / d, mag / abs(d)

    # comparison / display -----------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Expr):
            try:
                other = as_expr(other)
            except TypeError:
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()), tuple((id(a), e) for a, e in self.den)))
        return self._hash

    def __bool__(self):
        return bool(self.num)

    def __str__(self):
        if self._str is None:
            self._str = _format(self)
        return self._str

    def __repr__(self):
        return f"Expr({str(self)!r})"

    def __reduce__(self):
        return (parse_expr, (str(self),))

    def canonical_key(self) -> tuple:
        return (P.canonical_key(self.num), tuple((a.key, e) for a, e in self.den))


def _make_with_den(num: "Expr", den: dict) -> "Expr":
    d = dict(num.den)
    for a, e in den.items():
        d[a] = d.get(a, 0) + e
    return _make(num.num, d)


def _subs_poly(poly: dict, values: dict) -> "Expr":
    """Evaluate ``poly`` with some sids replaced by expressions."""
    groups: dict = {}
    for m, c in poly.items():
        bound_part = 0
        for sid, e in S.decode(m):
            if sid in values:
                bound_part += e << (S.SLOT_BITS * sid)
        rest = m - bound_part
        g = groups.setdefault(bound_part, {})
        g[rest] = c
    cache: dict = {}

    def pw(sid, e):
        key = (sid, e)
        v = cache.get(key)
        if v is None:
            base = values[sid]
            v = (base.num, dict(base.den)) if e == 1 else _raw_mul(pw(sid, e - 1), pw(sid, 1))
            cache[key] = v
        return v

    acc = ({}, {})
    for bound_part, rest_poly in groups.items():
        raw = (P.mul(rest_poly, {0: P.ONE}), {})
        for sid, e in S.decode(bound_part):
            raw = _raw_mul(raw, pw(sid, e))
        acc = _raw_add(acc, raw) if acc[0] or acc[1] else raw
    return _make(acc[0], acc[1])


def _split_square(c):
    """``c = r**2 * rest`` with ``rest`` a square-free-ish integer; returns (r, rest)."""
    c = mpq(c)
    num = mpz(c.numerator) * mpz(c.denominator)
    sign = -1 if num < 0 else 1
    num = abs(num)
    if is_square(num):
        return mpq(isqrt(num), c.denominator), sign
    sq = mpz(1)
    rest = num
    pr = 2
    while pr * pr <= rest and pr < 10000:
        while rest % (pr * pr) == 0:
            rest //= pr * pr
            sq *= pr
        pr += 1
    if is_square(rest):
        sq *= isqrt(rest)
        rest = mpz(1)
    return mpq(sq, c.denominator), sign * rest


def _numeric_values(e: Expr, point) -> dict:
    from .chart import NumericPoint

    values = {}
    sids = P.symbols_of(e.num)
    for a, _ in e.den:
        sids |= P.symbols_of(a.poly)
    need = set()
    for sid in sids:
        sym = S.by_sid(sid)
        if sym.family == "sqrt":
            need |= P.symbols_of(sym.radicand)
        else:
            need.add(sid)
    for sid in need:
        sym = S.by_sid(sid)
        if isinstance(point, NumericPoint):
            v = point.lookup(sym)
        else:
            v = point.get(sym)
            if v is None:
                v = point.get(sym.name)
        if v is None:
            raise KeyError(f"missing value for symbol {sym.name}")
        values[sid] = float(v)
    for sid in sids:
        sym = S.by_sid(sid)
        if sym.family == "sqrt":
            r = P.evaluate(sym.radicand, values)
            if r < 0:
                raise ValueError(f"negative square-root argument in {sym.name}: {r}")
            values[sid] = math.sqrt(r)
    return values


def _format(e: Expr) -> str:
    num = P.to_str(e.num)
    if not e.den:
        return num
    parts = []
    for a, ex in e.den:
        body = a.text if len(a.poly) == 1 and ex == 1 else f"({a.text})" if len(a.poly) > 1 else a.text
        if len(a.poly) == 1 and ex > 1:
            body = f"{a.text}^{ex}"
        elif ex > 1:
            body = f"({a.text})^{ex}"
        parts.append(body)
    den = "*".join(parts)
    if len(e.den) > 1 or (len(e.den) == 1 and ("*" in den and not den.startswith("("))):
        den = f"({den})"
    if len(e.num) > 1:
        num = f"({num})"
    return f"{num}/{den}"


_coerce = as_expr

ZERO = Expr({}, ())
ONE = Expr({0: P.ONE}, ())


def as_symbol(s) -> S.Symbol:
    """Accept a Symbol, its name, or an Expr that is a single bare symbol."""
    if isinstance(s, S.Symbol):
        return s
    if isinstance(s, str):
        return S.symbol_from_name(s)
    if isinstance(s, Expr) and not s.den and len(s.num) == 1:
        (m, c), = s.num.items()
        dec = S.decode(m)
        if c == 1 and len(dec) == 1 and dec[0][1] == 1:
            return S.by_sid(dec[0][0])
    raise TypeError(f"expected a symbol, got {s!r}")


def sym(name_or_symbol) -> Expr:
    if isinstance(name_or_symbol, S.Symbol):
        return Expr.symbol(name_or_symbol)
    return Expr.symbol(S.symbol_from_name(name_or_symbol))


def parse_expr(text: str) -> Expr:
    from .parser import parse_expression

    return parse_expression(text)

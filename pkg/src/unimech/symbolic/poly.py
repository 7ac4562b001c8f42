"""Sparse multivariate polynomials over Q on packed monomials.

A polynomial is a plain ``dict`` mapping packed monomial ints to nonzero
``mpq`` coefficients.  Functions here never mutate their arguments.  Radical
symbols are ordinary variables except that :func:`mul` rewrites ``s**2`` to the
radicand of ``s``.
"""
from __future__ import annotations

from gmpy2 import mpq

from . import symbols as S

ONE = mpq(1)
ZERO = mpq(0)


def const(c) -> dict:
    c = mpq(c)
    return {0: c} if c else {}


def var(sym: S.Symbol) -> dict:
    return {sym.unit: ONE}


def add(a: dict, b: dict) -> dict:
    if len(a) < len(b):
        a, b = b, a
    r = dict(a)
    for m, c in b.items():
        v = r.get(m)
        if v is None:
            r[m] = c
        else:
            v = v + c
            if v:
                r[m] = v
            else:
                del r[m]
    return r


def neg(a: dict) -> dict:
    return {m: -c for m, c in a.items()}


def sub(a: dict, b: dict) -> dict:
    return add(a, neg(b))


def scale(a: dict, c) -> dict:
    if not c:
        return {}
    if c == 1:
        return a
    return {m: v * c for m, v in a.items()}


def shift(a: dict, mono: int) -> dict:
    """Multiply by a monomial (no radical reduction)."""
    return {m + mono: c for m, c in a.items()}


def mul(a: dict, b: dict) -> dict:
    if not a or not b:
        return {}
    if len(a) < len(b):
        a, b = b, a
    r: dict = {}
    get = r.get
    for m2, c2 in b.items():
        for m1, c1 in a.items():
            m = m1 + m2
            v = get(m)
            r[m] = c1 * c2 if v is None else v + c1 * c2
    r = {m: c for m, c in r.items() if c}
    hi = S.radical_high_mask
    if hi:
        for m in r:
            if m & hi:
                return reduce_radicals(r)
    return r


def reduce_radicals(a: dict) -> dict:
    """Rewrite every ``s**e`` with ``e >= 2`` using ``s**2 = radicand(s)``."""
    hi = S.radical_high_mask
    out: dict = {}
    plain: dict = {}
    for m, c in a.items():
        if not m & hi:
            plain[m] = c
            continue
        factor = {0: ONE}
        mm = m
        for sid in S.radical_sids():
            sh = S.SLOT_BITS * sid
            e = (mm >> sh) & S.EXP_MASK
            if e >= 2:
                half = e // 2
                mm -= (2 * half) << sh
                rad = S.by_sid(sid).radicand
                for _ in range(half):
                    factor = mul(factor, rad)
        out = add(out, scale(shift(factor, mm), c))
    return add(out, plain)


def power(a: dict, n: int) -> dict:
    result = {0: ONE}
    base = a
    while n:
        if n & 1:
            result = mul(result, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return result


def deriv(a: dict, sym: S.Symbol) -> dict:
    sh = S.SLOT_BITS * sym.sid
    u = sym.unit
    r = {}
    for m, c in a.items():
        e = (m >> sh) & S.EXP_MASK
        if e:
            r[m - u] = c * e
    return r


def div_exact(a: dict, f: dict):
    """Quotient ``a / f`` when ``f`` divides ``a`` exactly, else ``None``."""
    if not a:
        return {}
    lt_f = max(f)
    lc_f = f[lt_f]
    g = S.guard_mask
    r = dict(a)
    quo = {}
    while r:
        lt = max(r)
        if ((lt | g) - lt_f) & g != g:
            return None
        qm = lt - lt_f
        qc = r[lt] / lc_f
        quo[qm] = qc
        for m, c in f.items():
            mm = m + qm
            v = r.get(mm)
            v = -qc * c if v is None else v - qc * c
            if v:
                r[mm] = v
            else:
                r.pop(mm, None)
    return quo


def symbols_of(a: dict) -> set:
    """Sids appearing in any monomial."""
    acc = 0
    for m in a:
        acc |= m
    out = set()
    while acc:
        low = (acc & -acc).bit_length() - 1
        slot = low >> 4
        out.add(slot)
        acc &= ~(S.EXP_MASK << (slot << 4))
    return out


def has_radicals(a: dict) -> bool:
    for sid in S.radical_sids():
        mask = S.EXP_MASK << (S.SLOT_BITS * sid)
        for m in a:
            if m & mask:
                return True
    return False


def split_radical(a: dict, sym: S.Symbol):
    """Return ``(u, v)`` with ``a = u + v*sym`` (``a`` reduced, degree <= 1 in ``sym``)."""
    sh = S.SLOT_BITS * sym.sid
    u, v = {}, {}
    for m, c in a.items():
        e = (m >> sh) & S.EXP_MASK
        if e == 0:
            u[m] = c
        else:
            v[m - sym.unit] = c
    return u, v


def is_const(a: dict) -> bool:
    return not a or (len(a) == 1 and 0 in a)


def const_value(a: dict):
    return a.get(0, ZERO) if is_const(a) else None


def mono_key(m: int) -> tuple:
    return tuple(sorted((S.by_sid(sid).key, e) for sid, e in S.decode(m)))


def canonical_key(a: dict) -> tuple:
    return tuple(sorted((mono_key(m), (int(c.numerator), int(c.denominator))) for m, c in a.items()))


def leading_canonical(a: dict):
    """Term with the greatest canonical monomial key (process independent)."""
    return max(a.items(), key=lambda t: mono_key(t[0]))


def primitive(a: dict):
    """Split ``a = c * P`` with ``P`` integer, content 1, positive canonical leading coefficient."""
    from gmpy2 import gcd, lcm

    den = 1
    for c in a.values():
        den = lcm(den, c.denominator)
    ints = {m: c * den for m, c in a.items()}
    g = 0
    for c in ints.values():
        g = gcd(g, c.numerator)
    _, lc = leading_canonical(ints)
    if lc < 0:
        g = -g
    prim = {m: mpq(c.numerator // g) for m, c in ints.items()}
    return mpq(g, den), prim


def evaluate(a: dict, values: dict) -> float:
    """Float value; ``values`` maps sid -> float."""
    total = 0.0
    for m, c in a.items():
        t = float(c)
        for sid, e in S.decode(m):
            t *= values[sid] ** e
        total += t
    return total


def abs_evaluate(a: dict, values: dict) -> float:
    total = 0.0
    for m, c in a.items():
        t = abs(float(c))
        for sid, e in S.decode(m):
            t *= abs(values[sid]) ** e
        total += t
    return total


def fmt_coeff(c) -> str:
    if c.denominator == 1:
        return str(int(c.numerator))
    return f"{int(c.numerator)}/{int(c.denominator)}"


def _term_sort_key(item):
    factors = item[0]
    coords = tuple((s.key, e) for s, e in factors if s.family != "param")
    params = tuple((s.key, e) for s, e in factors if s.family == "param")
    return (not factors, coords, params)


def to_str(a: dict) -> str:
    if not a:
        return "0"
    items = []
    for m, c in a.items():
        factors = sorted(((S.by_sid(sid), e) for sid, e in S.decode(m)), key=lambda t: t[0].key)
        items.append((factors, c))
    items.sort(key=_term_sort_key)
    parts = []
    for factors, c in items:
        mono = "*".join(s.name if e == 1 else f"{s.name}^{e}" for s, e in factors)
        mag = abs(c)
        if not mono:
            body = fmt_coeff(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{fmt_coeff(mag)}*{mono}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append((" + " if c > 0 else " - ") + body)
    return "".join(parts)


def term_count(a: dict) -> int:
    return len(a)

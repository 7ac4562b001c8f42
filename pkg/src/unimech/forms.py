"""Coordinate differential forms, vector fields and pullbacks.

A form is a sparse map from strictly increasing tuples of basis symbols to
coefficients.  Basis covectors are ordered by symbol key, which puts every
``dq_i^A`` (ordered by ``(i, A)``) before every ``dp^i_A``.  Parameters and the
unknown coefficient families are constants for ``d``.
"""
from __future__ import annotations

from .symbolic import symbols as S
from .symbolic.expr import ZERO, Expr, as_expr


def _is_basis(sym: S.Symbol) -> bool:
    return sym.family in ("q", "p")


def _sort_sign(idx: tuple):
    """Sort a tuple of symbols; returns ``(sorted, sign)`` or ``(None, 0)`` on repeats."""
    lst = list(idx)
    sign = 1
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1].key > lst[j].key:
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(lst, lst[1:]):
        if a is b:
            return None, 0
    return tuple(lst), sign


class DifferentialForm:
    """Degree-``p`` form ``sum c_I dx_I``; immutable."""

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms: dict | None = None):
        self.degree = degree
        clean = {}
        for basis, c in (terms or {}).items():
            if len(basis) != degree:
                raise ValueError("basis length does not match degree")
            if not c.is_zero():
                clean[basis] = c
        self.terms = clean

    @staticmethod
    def function(f) -> "DifferentialForm":
        return DifferentialForm(0, {(): as_expr(f)})

    @staticmethod
    def basis(*syms) -> "DifferentialForm":
        idx, sign = _sort_sign(syms)
        if idx is None:
            return DifferentialForm(len(syms))
        return DifferentialForm(len(syms), {idx: Expr.const(sign)})

    def coefficient(self, *syms) -> Expr:
        idx, sign = _sort_sign(syms)
        if idx is None:
            return ZERO
        c = self.terms.get(idx, ZERO)
        return c if sign > 0 else -c

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out[k] + c if k in out else c
        return DifferentialForm(self.degree, out)

    def __neg__(self):
        return DifferentialForm(self.degree, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "DifferentialForm":
        f = as_expr(f)
        return DifferentialForm(self.degree, {k: c * f for k, c in self.terms.items()})

    def __mul__(self, f):
        return self.scale(f)

    __rmul__ = __mul__

    def map_coefficients(self, fn) -> "DifferentialForm":
        return DifferentialForm(self.degree, {k: fn(c) for k, c in self.terms.items()})

    def subs(self, bindings: dict) -> "DifferentialForm":
        """Substitute in coefficients only (not a pullback)."""
        return self.map_coefficients(lambda c: c.subs(bindings))

    def __eq__(self, other):
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        return self.degree == other.degree and self.terms == other.terms

    def __hash__(self):
        return hash((self.degree, frozenset(self.terms.items())))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: tuple(s.key for s in kv[0]))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for basis, c in self.sorted_terms():
            b = " ^ ".join(f"d{s.name}" for s in basis)
            parts.append(f"({c})" + (f"*{b}" if b else ""))
        return " + ".join(parts)

    __repr__ = __str__

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "terms": [{"basis": [s.name for s in basis], "coeff": str(c)}
                      for basis, c in self.sorted_terms()],
        }

    @staticmethod
    def from_json(obj: dict) -> "DifferentialForm":
        from .symbolic.expr import parse_expr

        terms = {}
        deg = obj["degree"]
        for t in obj["terms"]:
            f = DifferentialForm.basis(*[S.symbol_from_name(n) for n in t["basis"]])
            terms_f = f.scale(parse_expr(t["coeff"]))
            for k, c in terms_f.terms.items():
                terms[k] = terms[k] + c if k in terms else c
        return DifferentialForm(deg, terms)

    def matrix(self, coords) -> list:
        """Antisymmetric coefficient matrix of a 2-form in the given coordinate order."""
        if self.degree != 2:
            raise ValueError("matrix() needs a 2-form")
        return [[self.coefficient(a, b) if a is not b else ZERO for b in coords] for a in coords]


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    out: dict = {}
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            idx, sign = _sort_sign(ia + ib)
            if idx is None:
                continue
            c = ca * cb
            if sign < 0:
                c = -c
            out[idx] = out[idx] + c if idx in out else c
    return DifferentialForm(a.degree + b.degree, out)


def _d_function(f: Expr) -> DifferentialForm:
    terms = {}
    for s in sorted(f.free_symbols()):
        if _is_basis(s):
            c = f.diff(s)
            if not c.is_zero():
                terms[(s,)] = c
    return DifferentialForm(1, terms)


def exterior_derivative(w) -> DifferentialForm:
    """``d`` of an expression (0-form) or a form."""
    if not isinstance(w, DifferentialForm):
        return _d_function(as_expr(w))
    out = DifferentialForm(w.degree + 1)
    for basis, c in w.terms.items():
        out = out + wedge(_d_function(c), DifferentialForm(w.degree, {basis: Expr.const(1)}))
    return out


d = exterior_derivative


class VectorFieldExpr:
    """``sum X^s d/ds`` over coordinate symbols; immutable."""

    __slots__ = ("components",)

    def __init__(self, components: dict | None = None):
        self.components = {s: as_expr(c) for s, c in (components or {}).items() if not as_expr(c).is_zero()}

    def __getitem__(self, sym: S.Symbol) -> Expr:
        return self.components.get(sym, ZERO)

    def apply(self, f) -> Expr:
        """Directional derivative ``X(f)``."""
        f = as_expr(f)
        out = ZERO
        fs = f.free_symbols()
        for s, c in self.components.items():
            if s in fs:
                out = out + c * f.diff(s)
        return out

    def __add__(self, other):
        comp = dict(self.components)
        for s, c in other.components.items():
            comp[s] = comp[s] + c if s in comp else c
        return VectorFieldExpr(comp)

    def __sub__(self, other):
        return self + VectorFieldExpr({s: -c for s, c in other.components.items()})

    def map_coefficients(self, fn) -> "VectorFieldExpr":
        return VectorFieldExpr({s: fn(c) for s, c in self.components.items()})

    def subs(self, bindings: dict) -> "VectorFieldExpr":
        return self.map_coefficients(lambda c: c.subs(bindings))

    def restrict(self, syms) -> "VectorFieldExpr":
        keep = set(syms)
        return VectorFieldExpr({s: c for s, c in self.components.items() if s in keep})

    def __eq__(self, other):
        if not isinstance(other, VectorFieldExpr):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(frozenset(self.components.items()))

    def sorted_items(self):
        return sorted(self.components.items(), key=lambda kv: kv[0].key)

    def __str__(self):
        if not self.components:
            return "0"
        return " + ".join(f"({c})*d/d{s.name}" for s, c in self.sorted_items())

    __repr__ = __str__

    def to_json(self) -> dict:
        return {s.name: str(c) for s, c in self.sorted_items()}


def interior_product(x: VectorFieldExpr, w: DifferentialForm) -> DifferentialForm:
    if w.degree < 1:
        raise ValueError("interior product needs a form of degree >= 1")
    out: dict = {}
    for basis, c in w.terms.items():
        for j, s in enumerate(basis):
            xs = x[s]
            if xs.is_zero():
                continue
            rest = basis[:j] + basis[j + 1:]
            term = c * xs
            if j % 2:
                term = -term
            out[rest] = out[rest] + term if rest in out else term
    return DifferentialForm(w.degree - 1, out)


class CoordinateMap:
    """Coordinate expression of a smooth map: target symbol -> image expression."""

    def __init__(self, images: dict, target=None, name: str = ""):
        self.images = {s: as_expr(e) for s, e in images.items()}
        self.target = list(target) if target is not None else sorted(self.images)
        self.name = name
        missing = [s.name for s in self.target if s not in self.images]
        if missing:
            raise ValueError(f"target coordinates without image: {missing}")

    def _check(self, syms):
        for s in syms:
            if _is_basis(s) and s not in self.images:
                raise KeyError(f"unbound target symbol {s.name} in pullback along {self.name or 'map'}")

    def pull_function(self, f) -> Expr:
        f = as_expr(f)
        self._check(f.free_symbols())
        return f.subs(self.images)

    def pullback(self, w):
        if not isinstance(w, DifferentialForm):
            return self.pull_function(w)
        out = DifferentialForm(w.degree)
        diffs: dict = {}
        for basis, c in w.terms.items():
            self._check(basis)
            acc = DifferentialForm.function(self.pull_function(c))
            for s in basis:
                ds = diffs.get(s)
                if ds is None:
                    ds = diffs[s] = _d_function(self.images[s])
                acc = wedge(acc, ds)
            out = out + acc
        return out

    def compose(self, inner: "CoordinateMap") -> "CoordinateMap":
        """``self o inner``: images of ``self`` expressed in ``inner``'s source."""
        return CoordinateMap({s: inner.pull_function(e) for s, e in self.images.items()},
                             self.target, f"{self.name}o{inner.name}")

    def to_json(self) -> dict:
        return {s.name: str(self.images[s]) for s in self.target}


def identity_map(coords) -> CoordinateMap:
    return CoordinateMap({s: Expr.symbol(s) for s in coords}, coords, "id")


def pullback(phi: CoordinateMap, w):
    return phi.pullback(w)


def form_rank(w: DifferentialForm, coords, point) -> int:
    """Numeric rank of a 2-form's coefficient matrix at a point."""
    import numpy as np

    m = np.array([[c.eval(point) if not c.is_zero() else 0.0 for c in row] for row in w.matrix(coords)])
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > 1e-9 * max(1.0, sv[0])))

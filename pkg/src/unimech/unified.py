"""Skinner-Rusk data on W = T^{2k-1}Q x_{T^{k-1}Q} T*(T^{k-1}Q).

The dynamical equation ``i(X)Omega = dH`` is solved coefficient-wise for a
vector field ansatz

    X = f_i d/dq_i (i < k) + F_i d/dq_i (k <= i <= 2k-1) + G^i d/dp^i

whose coefficients are symbols of the ``f``, ``F`` and ``G`` families.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .forms import CoordinateMap, DifferentialForm, VectorFieldExpr, exterior_derivative, interior_product
from .jetcalc import LagrangianSystem, canonical_forms, semispray_type
from .symbolic import symbols as S
from .symbolic.expr import ZERO, Expr
from .symbolic.linalg import linear_coefficients, solve_linear
from .symbolic.zero import Sampler, is_zero


class SingularHessianError(ValueError):
    """Raised by :func:`solve_regular` for Lagrangians that are not regular."""


class NotInvertible(ValueError):
    """The Legendre map could not be inverted symbolically."""


@dataclass
class UnifiedSystem:
    lag: LagrangianSystem
    C: Expr
    H: Expr
    Omega: DifferentialForm
    primary: dict  # A -> p^{k-1}_A - dL/dq_k^A
    graph: dict  # (r, A) -> p^r_A - phat^r_A
    ansatz: VectorFieldExpr

    @property
    def chart(self):
        return self.lag.chart

    @property
    def k(self) -> int:
        return self.lag.chart.k

    def unknowns(self, family: str) -> list:
        c = self.chart
        rng = {"f": range(c.k), "F": range(c.k, 2 * c.k), "G": range(c.k)}[family]
        return [c.unknown(family, i, a) for i in rng for a in c.indices]

    def graph_substitution(self, orders=None) -> dict:
        """``p^r_A -> phat^r_A`` for the requested momentum orders (default all)."""
        orders = range(self.k) if orders is None else orders
        return {S.p(r, a): self.lag.momenta[(r, a)] for r in orders for a in self.chart.indices}


def build_unified(sys: LagrangianSystem) -> UnifiedSystem:
    chart = sys.chart
    k = chart.k
    C = ZERO
    for i in range(k):
        for a in chart.indices:
            C = C + Expr.symbol(S.p(i, a)) * Expr.symbol(S.q(i + 1, a))
    H = C - sys.L
    _, omega = canonical_forms(chart)
    primary = {a: Expr.symbol(S.p(k - 1, a)) - sys.partials[(k, a)] for a in chart.indices}
    graph = {(r, a): Expr.symbol(S.p(r, a)) - sys.momenta[(r, a)] for r in range(k) for a in chart.indices}
    comp = {}
    for i in range(2 * k):
        fam = "f" if i < k else "F"
        for a in chart.indices:
            comp[S.q(i, a)] = Expr.symbol(chart.unknown(fam, i, a))
    for i in range(k):
        for a in chart.indices:
            comp[S.p(i, a)] = Expr.symbol(chart.unknown("G", i, a))
    return UnifiedSystem(sys, C, H, omega, primary, graph, VectorFieldExpr(comp))


def dynamical_residual(U: UnifiedSystem, x: VectorFieldExpr) -> DifferentialForm:
    """The 1-form ``i(X)Omega - dH``."""
    return interior_product(x, U.Omega) - exterior_derivative(U.H)


@dataclass
class CoefficientSolution:
    identifications: dict  # unknown symbol -> Expr
    residual_unknowns: list
    constraints: list  # algebraic constraints, normalized as p^{k-1}_A - dL/dq_k^A
    field: VectorFieldExpr  # ansatz with identifications applied
    semispray_type: int | None

    def to_json(self) -> dict:
        return {
            "identifications": {s.name: str(e) for s, e in sorted(self.identifications.items(), key=lambda t: t[0].key)},
            "residual_unknowns": [s.name for s in self.residual_unknowns],
            "constraints": [str(c) for c in self.constraints],
            "semispray_type": self.semispray_type,
        }


def solve_coefficients(U: UnifiedSystem, sampler: Sampler | None = None) -> CoefficientSolution:
    sampler = sampler or U.lag.sampler
    res = dynamical_residual(U, U.ansatz)
    unknowns = U.unknowns("f") + U.unknowns("G")
    known = set(unknowns)
    eqs, algebraic = [], []
    for basis, c in res.sorted_terms():
        if c.free_symbols() & known:
            eqs.append(c)
        else:
            algebraic.append(c)
    sol = solve_linear(eqs, unknowns, sampler)
    if sol.free or sol.conditions:
        raise RuntimeError("coefficient system of the dynamical equation is not uniquely solvable")
    constraints = []
    for a in U.chart.indices:
        xi = U.primary[a]
        if xi.is_zero():
            continue
        constraints.append(xi)
    # the algebraic part of i(X)Omega - dH is exactly -xi_A (one per A)
    for c in algebraic:
        if not any((c + xi).is_zero() for xi in constraints):
            raise RuntimeError(f"unexpected algebraic condition {c}")
    x = U.ansatz.subs(sol.solved)
    stype = semispray_type(x.restrict(U.chart.lagrangian_coordinates()), U.chart)
    return CoefficientSolution(sol.solved, U.unknowns("F"), constraints, x, stype)


def graph_constraints(U: UnifiedSystem) -> dict:
    return dict(U.graph)


def tangency_system(U: UnifiedSystem, x: VectorFieldExpr) -> dict:
    """``(r, A) -> X(xi_r^A)`` restricted to the graph of FL."""
    sub = U.graph_substitution()
    return {key: x.apply(xi).subs(sub) for key, xi in U.graph.items()}


def solve_regular(U: UnifiedSystem, tangency: dict, sol: CoefficientSolution,
                  sampler: Sampler | None = None) -> VectorFieldExpr:
    """Unique solution of the tangency system for a regular Lagrangian."""
    if not U.lag.hessian.is_regular:
        raise SingularHessianError("Hessian is singular: run the constraint algorithm instead")
    sampler = sampler or U.lag.sampler
    unknowns = sol.residual_unknowns
    lin = solve_linear(list(tangency.values()), unknowns, sampler)
    if lin.free or lin.conditions:
        raise SingularHessianError("tangency system is not uniquely solvable")
    return sol.field.subs(lin.solved)


def recover_lagrangian_field(U: UnifiedSystem, x: VectorFieldExpr) -> VectorFieldExpr:
    """Drop the momentum directions and put ``p = phat`` in what remains."""
    sub = U.graph_substitution()
    return x.restrict(U.chart.lagrangian_coordinates()).subs(sub)


def invert_legendre(sys: LagrangianSystem) -> dict:
    """``q_{k+j}^A`` as functions on T*(T^{k-1}Q), solving ``p = phat`` stage by stage.

    Stage ``j`` solves ``p^{k-1-j} = phat^{k-1-j}`` for ``q_{k+j}``; each stage
    must be linear in its unknowns.
    """
    chart = sys.chart
    k = chart.k
    inv: dict = {}
    for j in range(k):
        r = k - 1 - j
        unknowns = chart.qs(k + j)
        eqs = [(Expr.symbol(S.p(r, a)) - sys.momenta[(r, a)]).subs(inv) for a in chart.indices]
        try:
            linear_coefficients(eqs, unknowns)
        except ValueError:
            raise NotInvertible(f"momentum relation of order {r} is not linear in q{k + j}") from None
        sol = solve_linear(eqs, unknowns, sys.sampler)
        if sol.free or sol.conditions:
            raise NotInvertible(f"momentum relation of order {r} is degenerate in q{k + j}")
        inv.update(sol.solved)
    return inv


def hamiltonian_function(sys: LagrangianSystem, inverse: dict | None = None) -> Expr:
    inverse = invert_legendre(sys) if inverse is None else inverse
    return sys.energy.subs(inverse)


def recover_hamiltonian_field(sys: LagrangianSystem, x_l: VectorFieldExpr,
                              inverse: dict | None = None) -> VectorFieldExpr:
    """Pushforward ``FL_* X_L`` written in (q_{<k}, p) coordinates."""
    inverse = invert_legendre(sys) if inverse is None else inverse
    chart = sys.chart
    comp = {}
    for s in chart.q_coordinates(chart.k - 1):
        comp[s] = x_l[s].subs(inverse)
    for (r, a), ph in sys.momenta.items():
        comp[S.p(r, a)] = x_l.apply(ph).subs(inverse)
    return VectorFieldExpr(comp)


def hamilton_residual(sys: LagrangianSystem, x_h: VectorFieldExpr, h: Expr) -> DifferentialForm:
    """``i(X_h)omega_{k-1} - dh``."""
    _, omega = canonical_forms(sys.chart)
    return interior_product(x_h, omega) - exterior_derivative(h)


def lagrangian_residual(sys: LagrangianSystem, x_l: VectorFieldExpr) -> DifferentialForm:
    """``i(X_L)omega_L - dE_L``."""
    return interior_product(x_l, sys.omega) - exterior_derivative(sys.energy)


def legendre_map(sys: LagrangianSystem) -> CoordinateMap:
    return sys.legendre_map()


@dataclass
class RegularAnalysis:
    unified: UnifiedSystem
    coefficients: CoefficientSolution
    tangency: dict
    field: VectorFieldExpr
    lagrangian_field: VectorFieldExpr
    hamiltonian: Expr | None = None
    hamiltonian_field: VectorFieldExpr | None = None
    notes: list = field(default_factory=list)


def analyze_regular(sys: LagrangianSystem) -> RegularAnalysis:
    U = build_unified(sys)
    sol = solve_coefficients(U)
    tan = tangency_system(U, sol.field)
    x = solve_regular(U, tan, sol)
    x_l = recover_lagrangian_field(U, x)
    out = RegularAnalysis(U, sol, tan, x, x_l)
    try:
        inv = invert_legendre(sys)
        out.hamiltonian = hamiltonian_function(sys, inv)
        out.hamiltonian_field = recover_hamiltonian_field(sys, x_l, inv)
    except NotInvertible as exc:
        out.notes.append(str(exc))
    return out


def residual_vanishes(form: DifferentialForm, sampler: Sampler | None = None, points=None) -> bool:
    return all(is_zero(c, sampler, points).vanishes for c in form.terms.values())

"""Higher-order jet calculus in natural coordinates of T^kQ.

Everything here works with the coordinate formulas: the total time derivative
``d_T``, the canonical vector fields ``Delta_r``, the vertical endomorphisms
``J_r``, the Jacobi-Ostrogradsky momenta, the energy and the Poincare-Cartan
forms of a Lagrangian.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .forms import CoordinateMap, DifferentialForm, VectorFieldExpr, exterior_derivative, wedge
from .symbolic import symbols as S
from .symbolic.chart import ChartSpec
from .symbolic.expr import ZERO, Expr, as_expr
from .symbolic.linalg import determinant
from .symbolic.zero import Sampler, ZeroVerdict, is_zero, nonzero_by_flags


def tulczyjew(f) -> Expr:
    """Total time derivative ``sum q_{i+1} df/dq_i`` (unknowns and params are constants)."""
    f = as_expr(f)
    out = ZERO
    for s in sorted(f.free_symbols()):
        if s.family == "p":
            raise ValueError(f"d_T is defined on T^kQ only; got momentum {s.name}")
        if s.family == "q":
            out = out + Expr.symbol(S.q(s.order + 1, s.index)) * f.diff(s)
    return out


def tulczyjew_power(f, times: int) -> Expr:
    f = as_expr(f)
    for _ in range(times):
        f = tulczyjew(f)
    return f


def canonical_field(chart: ChartSpec, r: int, top: int | None = None) -> VectorFieldExpr:
    """``Delta_r = sum (r+i)!/i! q_{i+1} d/dq_{r+i}`` on T^topQ (default top = 2k-1)."""
    top = 2 * chart.k - 1 if top is None else top
    comp = {}
    for i in range(0, top - r + 1):
        c = factorial(r + i) // factorial(i)
        for a in chart.indices:
            comp[S.q(r + i, a)] = c * Expr.symbol(S.q(i + 1, a))
    return VectorFieldExpr(comp)


def vertical_endomorphism(chart: ChartSpec, r: int, x: VectorFieldExpr, top: int | None = None) -> VectorFieldExpr:
    """``J_r(X)`` with ``J_r = sum (r+i)!/i! dq_i (x) d/dq_{r+i}``."""
    top = 2 * chart.k - 1 if top is None else top
    comp = {}
    for i in range(0, top - r + 1):
        c = factorial(r + i) // factorial(i)
        for a in chart.indices:
            xi = x[S.q(i, a)]
            if not xi.is_zero():
                comp[S.q(r + i, a)] = c * xi
    return VectorFieldExpr(comp)


def vertical_differential(f, r: int) -> DifferentialForm:
    """``d_{J_r} f = sum_{i>=r} i!/(i-r)! df/dq_i dq_{i-r}``."""
    f = as_expr(f)
    terms = {}
    for s in sorted(f.free_symbols()):
        if s.family == "q" and s.order >= r:
            c = (factorial(s.order) // factorial(s.order - r)) * f.diff(s)
            key = (S.q(s.order - r, s.index),)
            terms[key] = terms[key] + c if key in terms else c
    return DifferentialForm(1, terms)


def is_semispray_of_type(x: VectorFieldExpr, chart: ChartSpec, r: int) -> bool:
    return vertical_endomorphism(chart, r, x) == canonical_field(chart, r)


def semispray_type(x: VectorFieldExpr, chart: ChartSpec):
    """Smallest ``r`` in ``1..2k-1`` with ``J_r(X) = Delta_r``, else ``None``."""
    for r in range(1, 2 * chart.k):
        if is_semispray_of_type(x, chart, r):
            return r
    return None


class HessianVerdict(enum.Enum):
    REGULAR = "regular"
    SINGULAR = "singular"
    GENERICALLY_REGULAR = "generically-regular"


@dataclass
class HessianReport:
    matrix: list
    determinant: Expr | None
    verdict: HessianVerdict
    rank: int
    evidence: dict = field(default_factory=dict)

    @property
    def is_regular(self) -> bool:
        return self.verdict is not HessianVerdict.SINGULAR

    def to_json(self) -> dict:
        return {
            "matrix": [[str(c) for c in row] for row in self.matrix],
            "determinant": None if self.determinant is None else str(self.determinant),
            "verdict": self.verdict.value,
            "rank": self.rank,
            "evidence": self.evidence,
        }


def _numeric_rank(matrix, sampler: Sampler) -> tuple[int, int]:
    """Max numeric rank and number of usable samples."""
    syms = set()
    for row in matrix:
        for c in row:
            syms |= c.free_symbols()
    rng = sampler.rng(7)
    best, used, tries = 0, 0, 0
    while used < sampler.samples and tries < sampler.samples + sampler.retries:
        tries += 1
        pt = sampler.draw(syms, rng)
        try:
            m = np.array([[c.eval(pt) for c in row] for row in matrix], dtype=float)
        except (ZeroDivisionError, ValueError):
            continue
        if not np.all(np.isfinite(m)):
            continue
        used += 1
        sv = np.linalg.svd(m, compute_uv=False)
        if sv.size:
            best = max(best, int(np.sum(sv > sampler.tol * max(1.0, sv[0]))))
    return best, used


def hessian_report(matrix, chart: ChartSpec, sampler: Sampler | None = None) -> HessianReport:
    sampler = sampler or Sampler()
    n = len(matrix)
    rank, used = _numeric_rank(matrix, sampler)
    evidence = {"samples": used, "max_numeric_rank": rank}
    det = None
    if n <= 4:
        det = determinant(matrix, sampler)
        if det.is_zero():
            verdict = HessianVerdict.SINGULAR
        elif det.is_constant() or nonzero_by_flags(det, chart.nonzero):
            verdict = HessianVerdict.REGULAR
        else:
            v = is_zero(det, sampler)
            evidence["determinant_zero_test"] = v.value
            if v is ZeroVerdict.PROVEN_NONZERO:
                verdict = HessianVerdict.GENERICALLY_REGULAR
            else:
                verdict = HessianVerdict.SINGULAR
    else:
        verdict = HessianVerdict.GENERICALLY_REGULAR if rank == n else HessianVerdict.SINGULAR
    return HessianReport(matrix, det, verdict, rank, evidence)


class LagrangianSystem:
    """Lagrangian of order ``k`` with every derived quantity computed at construction."""

    def __init__(self, chart: ChartSpec, lagrangian, sampler: Sampler | None = None):
        self.chart = chart
        self.L = as_expr(lagrangian)
        self.sampler = sampler or Sampler()
        for s in self.L.free_symbols():
            if s.family == "q" and s.order > chart.k:
                raise ValueError(f"Lagrangian depends on {s.name}, beyond order {chart.k}")
            if s.family in ("p", "f", "F", "G"):
                raise ValueError(f"Lagrangian may not depend on {s.name}")
        k = chart.k
        self.partials = {(i, a): self.L.diff(S.q(i, a)) for i in range(k + 1) for a in chart.indices}
        self.momenta = self._momenta()
        self.energy = self._energy()
        self.theta, self.omega = self._forms()
        self.hessian_matrix = [[self.partials[(k, a)].diff(S.q(k, b)) for b in chart.indices]
                               for a in chart.indices]
        self.hessian = hessian_report(self.hessian_matrix, chart, self.sampler)
        self.euler_lagrange = self._euler_lagrange()

    def _momenta(self) -> dict:
        """``{(r, A): phat^r_A}`` for ``0 <= r <= k-1`` via the backward recursion."""
        k = self.chart.k
        out = {}
        for a in self.chart.indices:
            out[(k - 1, a)] = self.partials[(k, a)]
            for r in range(k - 1, 0, -1):
                out[(r - 1, a)] = self.partials[(r, a)] - tulczyjew(out[(r, a)])
        return out

    def momentum(self, r: int, a: int | None = None) -> Expr:
        return self.momenta[(r, self.chart._idx(a))]

    def _energy(self) -> Expr:
        total = ZERO
        for (r, a), ph in self.momenta.items():
            total = total + Expr.symbol(S.q(r + 1, a)) * ph
        return total - self.L

    def _forms(self):
        terms = {}
        for (r, a), ph in self.momenta.items():
            if not ph.is_zero():
                terms[(S.q(r, a),)] = ph
        theta = DifferentialForm(1, terms)
        return theta, -exterior_derivative(theta)

    def _euler_lagrange(self) -> dict:
        out = {}
        for a in self.chart.indices:
            total = ZERO
            for i in range(self.chart.k + 1):
                term = tulczyjew_power(self.partials[(i, a)], i)
                total = total + (term if i % 2 == 0 else -term)
            out[a] = total
        return out

    def legendre_map(self) -> CoordinateMap:
        """FL: T^{2k-1}Q -> T*(T^{k-1}Q) as images of the target coordinates."""
        images = {}
        for s in self.chart.q_coordinates(self.chart.k - 1):
            images[s] = Expr.symbol(s)
        for (r, a), ph in self.momenta.items():
            images[S.p(r, a)] = ph
        return CoordinateMap(images, self.chart.hamiltonian_coordinates(), "FL")

    def report(self) -> dict:
        return {
            "momenta": {S.p(r, a).name: str(e) for (r, a), e in sorted(self.momenta.items())},
            "energy": str(self.energy),
            "euler_lagrange": {str(a): str(e) for a, e in self.euler_lagrange.items()},
            "hessian": self.hessian.to_json(),
            "theta_L": self.theta.to_json(),
        }


def canonical_forms(chart: ChartSpec):
    """``theta_{k-1} = sum p^i dq_i`` and ``omega_{k-1} = sum dq_i ^ dp^i`` on T*(T^{k-1}Q)."""
    theta = DifferentialForm(1, {(S.q(i, a),): Expr.symbol(S.p(i, a))
                                 for i in range(chart.k) for a in chart.indices})
    omega = DifferentialForm(2)
    for i in range(chart.k):
        for a in chart.indices:
            omega = omega + wedge(DifferentialForm.basis(S.q(i, a)), DifferentialForm.basis(S.p(i, a)))
    return theta, omega


def momenta(sys: LagrangianSystem) -> dict:
    return sys.momenta


def energy(sys: LagrangianSystem) -> Expr:
    return sys.energy


def lagrangian_forms(sys: LagrangianSystem):
    return sys.theta, sys.omega


def euler_lagrange(sys: LagrangianSystem) -> dict:
    return sys.euler_lagrange

"""Presymplectic constraint algorithm on W.

The ledger starts with the graph constraints ``xi_r = p^r - phat^r`` and, for
singular Lagrangians, the primary constraints cutting out the image of the
top momentum map (found by numeric implicitization and verified exactly).

Secondary constraints are searched in the momentum-projectable layer: the
top momentum relation ``p^{k-1} = phat^{k-1}`` is substituted while lower
momenta stay free, and each tangency condition is rewritten, when possible,
as a function on T*(T^{k-1}Q).  Conditions without such a representative are
kept as constraints on W.  Once that layer stabilizes, the tangency of the
graph constraints (and of any constraint whose tangency involves the unknown
coefficients ``F``) is a linear system in ``F``; it is solved where possible,
and when it is incompatible on the current surface its compatibility
conditions, eliminated on that surface, become the next generation.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import implicit
from .forms import VectorFieldExpr
from .surface import SamplingFailure, SurfaceSampler, evaluate_on, jacobian_rank
from .symbolic import symbols as S
from .symbolic.expr import ZERO, Expr, _factor, as_expr
from .symbolic import poly as P
from .symbolic.linalg import solve_linear
from .symbolic.zero import Sampler, is_zero, nonzero_by_flags
from .unified import UnifiedSystem, solve_coefficients


class Provenance(str, enum.Enum):
    GRAPH = "graph-primary"
    IMAGE = "image-primary"

    @staticmethod
    def secondary(g: int) -> str:
        return f"secondary-gen-{g}"


class Status(str, enum.Enum):
    STABILIZED = "stabilized"
    INCONSISTENT = "inconsistent"
    BUDGET = "budget-exhausted"


class ReduceVerdict(str, enum.Enum):
    VANISHES = "vanishes"
    NEW = "new-constraint"
    FIXES = "fixes-unknowns"


@dataclass
class ConstraintEntry:
    label: str
    expr: Expr
    provenance: str
    generation: int
    source: str = ""  # label of the constraint whose tangency produced this one
    derivative: Expr | None = None  # restricted Lie derivative before projection

    def to_json(self) -> dict:
        out = {"label": self.label, "expr": str(self.expr), "provenance": getattr(self.provenance, "value", self.provenance)}
        if self.source:
            out["source"] = self.source
        if self.derivative is not None:
            out["lie_derivative"] = str(self.derivative)
        return out


@dataclass
class Policy:
    max_generations: int = 10
    semispray1: bool = False
    sampler: Sampler = field(default_factory=Sampler)
    implicit_degree: int = 4
    fit_degree: int = 3
    surface_samples: int = 16
    independence_samples: int = 8


@dataclass
class ConstraintLedger:
    generations: list = field(default_factory=list)  # list[list[ConstraintEntry]]
    status: Status = Status.STABILIZED
    fixed_unknowns: dict = field(default_factory=dict)
    free_unknowns: list = field(default_factory=list)
    tangency_equations: list = field(default_factory=list)
    compatibility: dict = field(default_factory=dict)
    hamiltonian_on_surface: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    context: "AlgorithmContext | None" = None

    def entries(self, include_graph: bool = True) -> list:
        out = []
        for gen in self.generations:
            for e in gen:
                if include_graph or e.provenance != Provenance.GRAPH:
                    out.append(e)
        return out

    def constraints(self) -> list:
        """Non-graph constraint entries (primary image constraints and secondaries)."""
        return self.entries(include_graph=False)

    def secondary_generations(self) -> int:
        return sum(1 for gen in self.generations[1:] if gen)

    def field(self) -> VectorFieldExpr | None:
        return None if self.context is None else self.context.field.subs(self.fixed_unknowns)

    def to_json(self) -> dict:
        return {
            "generations": [[e.to_json() for e in gen] for gen in self.generations],
            "status": self.status.value,
            "fixed_unknowns": {s.name: str(v) for s, v in sorted(self.fixed_unknowns.items(), key=lambda t: t[0].key)},
            "free_unknowns": [s.name for s in self.free_unknowns],
            "tangency_equations": [str(e) for e in self.tangency_equations],
            "compatibility": self.compatibility,
            "hamiltonian_on_surface": self.hamiltonian_on_surface,
            "notes": list(self.notes),
        }


def lie_apply(x: VectorFieldExpr, phi, restriction: dict | None = None) -> Expr:
    """``X(phi)``, optionally followed by a substitution that restricts to a submanifold."""
    out = x.apply(as_expr(phi))
    return out.subs(restriction) if restriction else out


def normalize_constraint(e: Expr) -> Expr:
    """Canonical representative up to a nonzero factor.

    Divides by the irreducible factors shared by every coefficient of the
    highest momentum-degree part, then scales the leading momentum term to 1.
    """
    if e.is_zero() or e.is_constant():
        return e
    groups = implicit.split_by_p(e)
    if len(groups) > 1 or 0 not in groups:
        top = max(sum(x for _, x in S.decode(m)) for m in groups)
        common = None
        for m, coeff in groups.items():
            if sum(x for _, x in S.decode(m)) != top:
                continue
            _, facs = _factor(coeff) if coeff else (None, [])
            fd = dict(facs)
            common = fd if common is None else {a: min(x, fd[a]) for a, x in common.items() if a in fd}
        if common:
            e = e / Expr(_den_of(common), ())
    _, lead_c = _leading_p_term(e)
    return e / Expr.const(lead_c)


def _den_of(atoms: dict) -> dict:
    out = {0: P.ONE}
    for a, x in atoms.items():
        out = P.mul(out, a.power(x))
    return out


def _leading_p_term(e: Expr):
    groups = implicit.split_by_p(e)
    keyed = []
    for pm, coeff in groups.items():
        for m, c in coeff.items():
            keyed.append(((pm != 0, P.mono_key(pm), P.mono_key(m)), c))
    keyed.sort(key=lambda t: t[0])
    key, c = keyed[-1]
    return key, c


def proportional(a: Expr, b: Expr) -> bool:
    """True when ``a = c * b`` for a nonzero rational ``c``."""
    if a.is_zero() or b.is_zero():
        return a.is_zero() and b.is_zero()
    return (a / b).is_constant()


@dataclass
class AlgorithmContext:
    unified: UnifiedSystem
    field: VectorFieldExpr
    policy: Policy
    top_sub: dict
    full_sub: dict
    variables: list  # coordinates moved by the projectable-layer sampler
    lag_variables: list


def _context(U: UnifiedSystem, policy: Policy, field_: VectorFieldExpr) -> AlgorithmContext:
    chart = U.chart
    k = chart.k
    top_sub = U.graph_substitution([k - 1])
    full_sub = U.graph_substitution()
    lag_vars = chart.lagrangian_coordinates()
    variables = lag_vars + [s for r in range(k - 1) for s in chart.ps(r)]
    return AlgorithmContext(U, field_, policy, top_sub, full_sub, variables, lag_vars)


def _surface(ctx: AlgorithmContext, constraints, full: bool = False) -> SurfaceSampler:
    sub = ctx.full_sub if full else ctx.top_sub
    eqs = [c.subs(sub) for c in constraints]
    variables = ctx.lag_variables if full else ctx.variables
    return SurfaceSampler(eqs, variables, ctx.policy.sampler, ctx.unified.chart.param_symbols())


def image_constraints(ctx: AlgorithmContext) -> list:
    """Polynomial relations satisfied by ``(q_{<k}, p^{k-1} = phat^{k-1})``."""
    U = ctx.unified
    chart = U.chart
    k = chart.k
    sampler = ctx.policy.sampler
    tops = {S.p(k - 1, a): U.lag.momenta[(k - 1, a)] for a in chart.indices}
    qvars = sorted({s for e in tops.values() for s in e.free_symbols() if s.family == "q" and s.order < k})
    params = sorted({s for e in tops.values() for s in e.free_symbols() if s.family == "param"})
    source = sorted({s for e in tops.values() for s in e.free_symbols()})
    variables = qvars + sorted(tops) + params
    n_monos = len(implicit.monomials(variables, ctx.policy.implicit_degree))
    pts = sampler.points(source, count=2 * n_monos + 20, salt=17)
    rows, good = [], []
    from . import kernels

    fn = kernels.CompiledFunctions([tops[p] for p in sorted(tops)], source)
    for pt in pts:
        vals = fn([pt.lookup(s) for s in source])
        if not np.all(np.isfinite(vals)):
            continue
        rows.append([pt.lookup(s) for s in qvars] + list(vals) + [pt.lookup(s) for s in params])
    data = np.array(rows)

    def verify(cand: Expr) -> bool:
        restricted = cand.subs(tops)
        if restricted.is_zero():
            return True
        return is_zero(restricted, sampler).vanishes

    gens = implicit.implicitize(tops, variables, data, verify, ctx.policy.implicit_degree)
    return [normalize_constraint(g) for g in gens]


def _projectable_rep(ctx: AlgorithmContext, d: Expr, surf: SurfaceSampler, points) -> Expr | None:
    """Function of (q_{<k}, p, params) equal to ``d`` on the sampled surface."""
    k = ctx.unified.chart.k
    free = d.free_symbols()
    if not any(s.family == "q" and s.order >= k for s in free):
        return d
    fit_vars = sorted({s for s in free if s.family == "p" or (s.family == "q" and s.order < k)}
                      | set(ctx.top_sub))
    fit_vars += sorted(s for s in free if s.family == "param")

    def check(cand: Expr) -> bool:
        diff = cand.subs(ctx.top_sub) - d
        return is_zero(diff, ctx.policy.sampler, points).vanishes

    for deg in range(0, ctx.policy.fit_degree + 1):
        need = 2 * len(implicit.monomials(fit_vars, deg)) + 10
        train = surf.points(need, salt=500 + deg)
        values = evaluate_on([ctx.top_sub.get(v, Expr.symbol(v)) for v in fit_vars], train)
        target = evaluate_on([d], train)[:, 0]
        rep = implicit.fit_polynomial(values, target, fit_vars, check, deg, min_degree=deg)
        if rep is not None:
            return rep
    return None


class _Runner:
    def __init__(self, U: UnifiedSystem, policy: Policy):
        self.U = U
        self.policy = policy
        sol = solve_coefficients(U, policy.sampler)
        x = sol.field
        fixed = {}
        k = U.chart.k
        if policy.semispray1:
            for i in range(k, 2 * k - 1):
                for a in U.chart.indices:
                    fixed[U.chart.unknown("F", i, a)] = Expr.symbol(S.q(i + 1, a))
        self.sol = sol
        self.ctx = _context(U, policy, x)
        self.ledger = ConstraintLedger(fixed_unknowns=dict(fixed), context=self.ctx)

    # ------------------------------------------------------------------
    def run(self) -> ConstraintLedger:
        U, led = self.U, self.ledger
        gen0 = [ConstraintEntry(f"xi_{r}" + (f"_{a}" if a else ""), xi, Provenance.GRAPH, 0)
                for (r, a), xi in sorted(U.graph.items())]
        projectable: list = []
        if not U.lag.hessian.is_regular:
            imgs = image_constraints(self.ctx)
            for j, c in enumerate(imgs, 1):
                gen0.append(ConstraintEntry(f"phi^(0)_{j}", c, Provenance.IMAGE, 0))
                projectable.append(c)
            if not imgs:
                led.notes.append("no polynomial image constraints found up to the configured degree")
        led.generations.append(gen0)
        # constraints whose tangency involves the unknown coefficients F
        self.linear_sources: list = []
        frontier = [e for e in gen0 if e.provenance == Provenance.IMAGE]
        while True:
            while frontier:
                g = len(led.generations)
                if g > self.policy.max_generations:
                    led.status = Status.BUDGET
                    return led
                found, status = self._secondary(projectable, frontier, g)
                if status is not None:
                    led.status = status
                    return led
                if not found:
                    break
                led.generations.append(found)
                projectable.extend(e.expr for e in found)
                frontier = found
            g = len(led.generations)
            found = self._graph_layer(projectable, g)
            if led.status is not Status.STABILIZED or not found:
                break
            if g > self.policy.max_generations:
                led.status = Status.BUDGET
                return led
            led.generations.append(found)
            projectable.extend(e.expr for e in found)
            frontier = found
        if led.status is Status.STABILIZED:
            self._hamiltonian(projectable)
        return led

    def _free_unknowns(self) -> list:
        return [u for u in self.sol.residual_unknowns if u not in self.ledger.fixed_unknowns]

    # ------------------------------------------------------------------
    def _secondary(self, projectable, frontier, g):
        ctx = self.ctx
        pol = self.policy
        x = ctx.field.subs(self.ledger.fixed_unknowns)
        unknowns = set(self._free_unknowns())
        try:
            surf = _surface(ctx, projectable)
            pts = surf.points(max(pol.surface_samples, 32), salt=g)
        except SamplingFailure as exc:
            self.ledger.notes.append(f"generation {g}: {exc}")
            return [], Status.BUDGET
        found: list = []
        for entry in frontier:
            phi, src = entry.expr, entry.label
            d = lie_apply(x, phi, ctx.top_sub)
            if d.is_zero():
                continue
            if d.free_symbols() & unknowns:
                # an equation for the coefficients, solved with the graph tangency system
                self.linear_sources.append(phi)
                continue
            if d.is_constant():
                self.ledger.notes.append(f"tangency of {src} gives the nonzero constant {d}")
                return found, Status.INCONSISTENT
            if is_zero(d, pol.sampler, pts).vanishes:
                continue
            rep = _projectable_rep(ctx, d, surf, pts)
            if rep is None:
                self.ledger.notes.append(f"tangency of {src} is not pr2-projectable up to degree "
                                         f"{pol.fit_degree}; recorded as a constraint on W")
                rep = d
            rep = normalize_constraint(rep)
            if rep.is_constant():
                self.ledger.notes.append(f"tangency of {src} gives the nonzero constant {rep}")
                return found, Status.INCONSISTENT
            if not self._independent(projectable + [e.expr for e in found], rep, pts):
                continue
            j = len(found) + 1
            found.append(ConstraintEntry(f"phi^({g})_{j}", rep, Provenance.secondary(g), g, src, d))
        return found, None

    def _independent(self, current, cand, pts, full: bool = False) -> bool:
        ctx = self.ctx
        sub = ctx.full_sub if full else ctx.top_sub
        variables = ctx.lag_variables if full else ctx.variables
        current = [c.subs(sub) for c in current]
        sub_pts = pts[: self.policy.independence_samples]
        r0 = jacobian_rank(current, variables, sub_pts)
        r1 = jacobian_rank(current + [cand.subs(sub)], variables, sub_pts)
        return r1 > r0

    # ------------------------------------------------------------------
    def _graph_layer(self, projectable, g):
        """Tangency of the graph constraints: a linear system in the ``F`` unknowns.

        Returns the compatibility conditions of that system on the current
        surface as a new generation (empty when it is compatible).
        """
        U, led, ctx, pol = self.U, self.ledger, self.ctx, self.policy
        x = ctx.field.subs(led.fixed_unknowns)
        unknowns = self._free_unknowns()
        eqs = []
        for phi in [xi for _, xi in sorted(U.graph.items())] + self.linear_sources:
            t = lie_apply(x, phi, ctx.full_sub)
            if not t.is_zero():
                eqs.append(t)
        led.tangency_equations = eqs
        if not eqs:
            led.free_unknowns = unknowns
            return []
        try:
            surf = _surface(ctx, projectable, full=True)
            pts = surf.points(pol.sampler.samples, salt=99)
        except SamplingFailure as exc:
            led.notes.append(f"graph layer: {exc}")
            led.status = Status.BUDGET
            return []
        amat = [[e.diff(u) for u in unknowns] for e in eqs]
        zero = {u: ZERO for u in unknowns}
        rhs = [-e.subs(zero) for e in eqs]
        flat = [c for row in amat for c in row] + rhs
        vals = evaluate_on(flat, pts) if flat else np.zeros((len(pts), 0))
        m, n = len(eqs), len(unknowns)
        ranks, aug_ranks, worst = [], [], 0.0
        # an unknown is determined when no null vector of the system moves it
        undetermined = np.zeros(n, dtype=bool)
        for row in vals:
            a = row[: m * n].reshape(m, n)
            b = row[m * n:]
            ra = _rank(a)
            if ra < n:
                null = np.linalg.svd(a)[2][ra:]
                undetermined |= np.any(np.abs(null) > 1e-8, axis=0)
            rab = _rank(np.column_stack([a, b]))
            ranks.append(ra)
            aug_ranks.append(rab)
            if n:
                sol, *_ = np.linalg.lstsq(a, b, rcond=None)
                worst = max(worst, float(np.max(np.abs(a @ sol - b)) / max(1.0, np.max(np.abs(b)))))
            else:
                worst = max(worst, float(np.max(np.abs(b))))
        compatible = all(r == s for r, s in zip(ranks, aug_ranks))
        rank = max(ranks) if ranks else 0
        led.compatibility = {
            "samples": len(pts),
            "unknowns": n,
            "equations": m,
            "rank": rank,
            "augmented_rank": max(aug_ranks) if aug_ranks else 0,
            "compatible": compatible,
            "max_relative_residual": worst,
        }
        if not compatible:
            return self._compatibility_conditions(projectable, eqs, unknowns, pts, g)
        if not n:
            led.free_unknowns = []
            return []
        # fix every unknown the system determines; the rest stay free and are
        # chosen pointwise (minimum norm) by the integrator
        determined = {}
        if not undetermined.all():
            lin = solve_linear(eqs, unknowns, pol.sampler, pts)
            free = set(lin.free)
            determined = {u: v for u, v in lin.solved.items() if not (v.free_symbols() & free)}
        led.fixed_unknowns.update(determined)
        led.free_unknowns = [u for u in unknowns if u not in determined]
        if led.free_unknowns:
            led.notes.append(f"tangency leaves {n - rank} of {n} unknown coefficients free")
        return []

    def _compatibility_conditions(self, projectable, eqs, unknowns, pts, g) -> list:
        """Conditions for the tangency system to be solvable, eliminated on the surface."""
        led, pol = self.ledger, self.policy
        lin = solve_linear(eqs, unknowns, pol.sampler, pts)
        found: list = []
        for cond in lin.conditions:
            rep = normalize_constraint(cond)
            if rep.is_constant():
                led.status = Status.INCONSISTENT
                led.notes.append(f"tangency system forces the nonzero constant {rep}")
                return []
            if not self._independent(projectable + [e.expr for e in found], rep, pts, full=True):
                continue
            j = len(found) + 1
            found.append(ConstraintEntry(f"phi^({g})_{j}", rep, Provenance.secondary(g), g,
                                         "tangency system", cond))
        if not found:
            led.status = Status.INCONSISTENT
            led.notes.append("graph tangency system is incompatible on the final constraint surface")
        return found

    def _hamiltonian(self, projectable):
        """Restriction of H to the final projectable surface."""
        ctx, led, pol = self.ctx, self.ledger, self.policy
        h = self.U.H.subs(ctx.top_sub)
        info = {"restricted": str(h)}
        comb = exact_combination(h, projectable, ctx, pol.sampler)
        if comb is not None:
            info["reduces_to_zero"] = True
            info["combination"] = {str(c): str(v) for c, v in comb}
        else:
            try:
                pts = _surface(ctx, projectable).points(pol.sampler.samples, salt=7)
                info["reduces_to_zero"] = is_zero(h, pol.sampler, pts).vanishes
                info["numeric_only"] = True
            except SamplingFailure:
                info["reduces_to_zero"] = None
        led.hamiltonian_on_surface = info


def _rank(m: np.ndarray, tol: float = 1e-8) -> int:
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > tol * max(1.0, sv[0])))


def exact_combination(target: Expr, constraints, ctx: AlgorithmContext, sampler: Sampler):
    """Rational ``c_j`` with ``target = sum c_j * phi_j`` exactly (after top substitution)."""
    if target.is_zero():
        return []
    phis = [c.subs(ctx.top_sub) for c in constraints]
    if not phis:
        return None
    syms = target.free_symbols()
    for p in phis:
        syms |= p.free_symbols()
    pts = sampler.points(syms, count=3 * len(phis) + 8, salt=5)
    vals = evaluate_on(phis + [target], pts)
    a, b = vals[:, :-1], vals[:, -1]
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    fr = implicit.rationalize(coef)
    acc = target
    for c, phi in zip(fr, phis):
        if c:
            acc = acc - Expr.const(c) * phi
    if not acc.is_zero():
        return None
    return [(constraints[i], Expr.const(c)) for i, c in enumerate(fr) if c]


def run_algorithm(U: UnifiedSystem, policy: Policy | None = None) -> ConstraintLedger:
    return _Runner(U, policy or Policy()).run()


def reduce_mod(phi, ledger: ConstraintLedger, sampler: Sampler | None = None):
    """Classify ``phi`` against the ledger's current surface.

    Returns ``(verdict, detail)`` where detail is the solved unknowns for
    ``fixes-unknowns`` and the normalized constraint for ``new-constraint``.
    """
    phi = as_expr(phi)
    ctx = ledger.context
    sampler = sampler or (ctx.policy.sampler if ctx else Sampler())
    if phi.is_zero():
        return ReduceVerdict.VANISHES, None
    unknowns = sorted(s for s in phi.free_symbols() if s.family == "F")
    chart = ctx.unified.chart if ctx else None
    for u in unknowns:
        coeff = phi.diff(u)
        if any(s.family == "F" for s in coeff.free_symbols()):
            continue
        flags = chart.nonzero if chart else frozenset()
        if coeff.is_constant() or nonzero_by_flags(coeff, flags):
            value = (Expr.symbol(u) * coeff - phi) / coeff
            return ReduceVerdict.FIXES, {u: value}
    if ctx is None:
        v = is_zero(phi, sampler)
        return (ReduceVerdict.VANISHES, None) if v.vanishes else (ReduceVerdict.NEW, phi)
    current = [e.expr for e in ledger.constraints()]
    restricted = phi.subs(ctx.top_sub)
    if restricted.is_zero():
        return ReduceVerdict.VANISHES, None
    pts = _surface(ctx, current).points(sampler.samples, salt=3)
    if is_zero(restricted, sampler, pts).vanishes:
        return ReduceVerdict.VANISHES, None
    return ReduceVerdict.NEW, normalize_constraint(phi)

"""Seeded generators shared by the property and acceptance tests."""
from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

from unimech.jetcalc import LagrangianSystem
from unimech.symbolic import ChartSpec, NumericPoint, parse_expression


def coordinate_names(n: int, top: int) -> list:
    if n == 1:
        return [f"q{i}" for i in range(top + 1)]
    return [f"q{i}_{a}" for i in range(top + 1) for a in range(1, n + 1)]


def random_polynomial(rng: np.random.Generator, names, degree: int, terms: int, min_degree: int = 1) -> str:
    """Sum of ``terms`` monomials with small integer coefficients."""
    parts = []
    for _ in range(terms):
        d = int(rng.integers(min_degree, degree + 1))
        mono = rng.choice(names, size=d) if d else []
        c = int(rng.integers(1, 4)) * (1 if rng.random() < 0.5 else -1)
        parts.append("*".join([str(c), *mono]))
    return " + ".join(parts) if parts else "0"


def random_lagrangian(rng: np.random.Generator, max_k: int = 3, max_n: int = 2, degree: int = 3):
    """Random polynomial Lagrangian of order ``k`` that really involves ``q_k``."""
    k = int(rng.integers(1, max_k + 1))
    n = int(rng.integers(1, max_n + 1))
    names = coordinate_names(n, k)
    top = [nm for nm in names if nm.startswith(f"q{k}")]
    text = random_polynomial(rng, names, degree, int(rng.integers(2, 6)))
    text += " + " + random_polynomial(rng, top, 1, 1) + "*" + str(rng.choice(names))
    chart = ChartSpec(n, k)
    return LagrangianSystem(chart, parse_expression(text, chart)), text


def random_regular_lagrangian(rng: np.random.Generator, max_k: int = 3, max_n: int = 2, degree: int = 3):
    """Quadratic in ``q_k`` with a constant, diagonally dominant Hessian."""
    k = int(rng.integers(1, max_k + 1))
    n = int(rng.integers(1, max_n + 1))
    names = coordinate_names(n, k)
    top = names[-n:]
    lower = names[:-n]
    quad = []
    for a, b in combinations_with_replacement(range(n), 2):
        if a == b:
            c = int(rng.integers(n + 1, n + 4))
        else:
            c = int(rng.integers(-1, 2))
        quad.append(f"{c}*{top[a]}*{top[b]}")
    lin = [f"({random_polynomial(rng, lower, 2, 2, 0)})*{v}" for v in top]
    rest = random_polynomial(rng, lower, degree, 3)
    chart = ChartSpec(n, k)
    text = " + ".join(quad + lin + [rest])
    return LagrangianSystem(chart, parse_expression(text, chart)), text


def random_point(rng: np.random.Generator, symbols, params: dict | None = None, low=-1.0, high=1.0) -> NumericPoint:
    return NumericPoint({s: float(rng.uniform(low, high)) for s in symbols}, dict(params or {}))


def on_surface_residual(ledger, samples: int = 32, salt: int = 0, perturb: float = 0.0) -> float:
    """Worst relative coefficient of ``i(X_L)omega_L - dE_L`` on the final surface.

    Free coefficients are fixed pointwise by the minimum-norm solution of the
    graph tangency equations, as the integrator does; ``perturb`` shifts them
    away from that solution (a negative control).
    """
    from unimech.constraints import _surface
    from unimech.dynamics import ConstrainedField
    from unimech.forms import exterior_derivative
    from unimech.unified import lagrangian_residual, recover_lagrangian_field

    ctx = ledger.context
    U = ctx.unified
    sys = U.lag
    x_l = recover_lagrangian_field(U, ledger.field())
    coords = U.chart.lagrangian_coordinates()
    params = U.chart.param_symbols()
    solver = ConstrainedField(x_l, ledger.free_unknowns, ledger.tangency_equations, coords, params)
    residual = lagrangian_residual(sys, x_l)
    scale = exterior_derivative(sys.energy)
    surf = _surface(ctx, [e.expr for e in ledger.constraints()], full=True)
    worst = 0.0
    for pt in surf.points(samples, salt=salt):
        y = np.array([pt.lookup(s) for s in coords + params])
        full = pt.with_coords(dict(zip(ledger.free_unknowns, solver.coefficients(y) + perturb)))
        ref = max([1.0] + [abs(c.eval(full)) for c in scale.terms.values()])
        for c in residual.terms.values():
            worst = max(worst, abs(c.eval(full)) / ref)
    return worst

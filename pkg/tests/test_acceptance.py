"""Acceptance criteria 1-8; each test records one PASS/FAIL line for the summary."""
from __future__ import annotations

import time

import numpy as np

from conftest import ACCEPTANCE_LINES, LAGRANGIANS, load_system
from helpers import on_surface_residual, random_lagrangian, random_polynomial, random_regular_lagrangian
from unimech.constraints import Policy, Status, proportional, run_algorithm
from unimech.dynamics import conserved, holonomy_residuals, integrate
from unimech.forms import VectorFieldExpr
from unimech.jetcalc import HessianVerdict, LagrangianSystem, canonical_forms, tulczyjew
from unimech.symbolic import ChartSpec, NumericPoint, parse_expression, parse_lagrangian
from unimech.symbolic import symbols as S
from unimech.unified import analyze_regular, build_unified, lagrangian_residual, solve_coefficients


def _record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


def _fresh(name: str) -> LagrangianSystem:
    chart, lag = parse_lagrangian((LAGRANGIANS / f"{name}.lag").read_text())
    return LagrangianSystem(chart, lag)


def _field(chart, text: dict) -> VectorFieldExpr:
    return VectorFieldExpr({S.symbol_from_name(k): parse_expression(v, chart) for k, v in text.items()})


def test_criterion_1_pais_uhlenbeck_reproduction():
    t0 = time.perf_counter()
    pu = _fresh("pais_uhlenbeck")
    ra = analyze_regular(pu)
    sol = solve_coefficients(ra.unified)
    elapsed = time.perf_counter() - t0
    ch = pu.chart

    def e(text):
        return parse_expression(text, ch)

    checks = {
        "momenta": [pu.momentum(0), pu.momentum(1)] == [e("q1 + g*q3"), e("-g*q2")],
        "coefficients": {s.name: v for s, v in sol.identifications.items()}
        == {"f0": e("q1"), "f1": e("q2"), "G0": e("-w^2*q0"), "G1": e("q1 - p0")},
        "primary": sol.constraints == [e("p1 + g*q2")],
        "tangency": set(ra.tangency.values()) == {e("g*(F2 - q3)"), e("-w^2*q0 - q2 - g*F3")},
        "X": ra.field == _field(ch, {"q0": "q1", "q1": "q2", "q2": "q3", "q3": "-(w^2*q0 + q2)/g",
                                     "p0": "-w^2*q0", "p1": "q1 - p0"}),
        "X_L": ra.lagrangian_field == _field(ch, {"q0": "q1", "q1": "q2", "q2": "q3", "q3": "-(w^2*q0 + q2)/g"}),
        "X_h": ra.hamiltonian_field == _field(ch, {"q0": "q1", "q1": "-p1/g", "p0": "-w^2*q0", "p1": "q1 - p0"}),
        "runtime": elapsed < 1.0,
    }
    bad = [k for k, v in checks.items() if not v]
    _record(1, not bad, f"runtime {elapsed:.3f}s" + (f"; failed {bad}" if bad else ""))
    assert not bad


def test_criterion_2_relativistic_constraint_chain():
    expected = [(0, "dot(p1, q1)"), (0, "dot(p1, p1) - a^2/dot(q1, q1)"), (1, "dot(p0, q1)"),
                (1, "dot(p0, p1)"), (2, "dot(p0, p0)")]
    t0 = time.perf_counter()
    rel = _fresh("relativistic_particle")
    led = run_algorithm(build_unified(rel), Policy(semispray1=True))
    elapsed = time.perf_counter() - t0
    got = [(c.generation, c.expr) for c in led.constraints()]
    same = len(got) == len(expected) and all(
        g == eg and proportional(ex, parse_expression(text, rel.chart))
        for (g, ex), (eg, text) in zip(got, expected))
    checks = {
        "n=3": rel.chart.n == 3,
        "constraints": same,
        "stabilized at 2": led.status is Status.STABILIZED and len(led.generations) - 1 == 2,
        "H -> 0": led.hamiltonian_on_surface.get("reduces_to_zero") is True,
        "runtime": elapsed < 30.0,
    }
    bad = [k for k, v in checks.items() if not v]
    _record(2, not bad, f"{len(got)} constraints, generations {[g for g, _ in got]}, runtime {elapsed:.2f}s"
            + (f"; failed {bad}" if bad else ""))
    assert not bad


def test_criterion_3_momentum_recursion():
    failures = []
    for seed in range(50):
        sys, text = random_lagrangian(np.random.default_rng(seed), max_k=3, max_n=2, degree=3)
        k = sys.chart.k
        for a in sys.chart.indices:
            for r in range(1, k + 1):
                upper = sys.momenta[(r, a)] if r < k else parse_expression("0")
                diff = sys.momenta[(r - 1, a)] - (sys.L.diff(S.q(r, a)) - tulczyjew(upper))
                if not diff.is_zero():
                    failures.append((seed, text, r, a))
    _record(3, not failures, f"50 random Lagrangians, {len(failures)} recursion failures")
    assert not failures


def test_criterion_4_pullbacks():
    bad = []
    for name in ("pais_uhlenbeck", "relativistic_particle", "free_particle"):
        sys = load_system(name)
        theta, omega = canonical_forms(sys.chart)
        fl = sys.legendre_map()
        if fl.pullback(theta) != sys.theta or fl.pullback(omega) != sys.omega:
            bad.append(name)
    _record(4, not bad, "FL*theta = theta_L and FL*omega = omega_L" + (f"; failed {bad}" if bad else ""))
    assert not bad


def test_criterion_5_unified_lagrangian_equivalence():
    pu = load_system("pais_uhlenbeck")
    pu_zero = lagrangian_residual(pu, analyze_regular(pu).lagrangian_field).is_zero()
    rel = run_algorithm(build_unified(load_system("relativistic_particle")), Policy(semispray1=True))
    worst = on_surface_residual(rel, samples=32)
    ok = pu_zero and worst < 1e-9
    _record(5, ok, f"PU residual exactly zero: {pu_zero}; relativistic on-surface max {worst:.2e} (tol 1e-9)")
    assert ok


def test_criterion_6_numeric_suite():
    t0 = time.perf_counter()
    pu = load_system("pais_uhlenbeck")
    ra = analyze_regular(pu)
    coords = pu.chart.lagrangian_coordinates()
    x0 = NumericPoint({S.q(0): 1.0, S.q(1): 0.0, S.q(2): 0.0, S.q(3): 0.0}, {"w": 1.0, "g": 1.0})
    h = 1e-3
    run = integrate(ra.lagrangian_field, x0, 10.0, h, coords)
    half = integrate(ra.lagrangian_field, x0, 10.0, h / 2, coords)
    drift = conserved(run, pu.energy).max_drift
    drift_half = conserved(half, pu.energy).max_drift
    ratio = drift / drift_half if drift_half else float("inf")
    hol = holonomy_residuals(run, pu.chart)
    hol_half = holonomy_residuals(half, pu.chart)
    hol_ratios = [hol[k] / hol_half[k] for k in hol]
    elapsed = time.perf_counter() - t0
    checks = {
        "drift": drift < 1e-8,
        "drift ratio": 12.0 <= ratio <= 20.0,
        "holonomy O(h^2)": all(3.5 < r < 4.5 for r in hol_ratios),
        "runtime": elapsed < 10.0,
    }
    bad = [k for k, v in checks.items() if not v]
    _record(6, not bad, f"drift {drift:.2e}, drift(h)/drift(h/2) = {ratio:.2f} (want [12, 20]), "
            f"holonomy ratios {[round(r, 2) for r in hol_ratios]}, runtime {elapsed:.2f}s"
            + (f"; failed {bad}" if bad else ""))
    assert not bad


def _gradient_case(rng, chart, names):
    num = random_polynomial(rng, names + ["a"], 3, 3, 0)
    den = random_polynomial(rng, names, 2, 2, 1)
    rad = random_polynomial(rng, names, 2, 2, 1)
    text = f"({num})/(2 + ({den})^2) + a*sqrt(1 + ({rad})^2)"
    return parse_expression(text, chart), text


def test_criterion_7_gradient_oracle():
    rng = np.random.default_rng(7)
    chart = ChartSpec(2, 2, ("a",))
    coords = chart.w_coordinates()
    names = [s.name for s in coords]
    failures, worst = [], 0.0
    for case in range(1000):
        e, text = _gradient_case(rng, chart, names)
        pt = NumericPoint({s: float(rng.uniform(-1, 1)) for s in coords}, {"a": float(rng.uniform(0.5, 2))})
        sym = coords[int(rng.integers(len(coords)))]
        exact = e.diff(sym).eval(pt)
        x = pt.lookup(sym)
        step = 1e-5 * max(1.0, abs(x))
        fd = (e.eval(pt.with_coords({sym: x + step})) - e.eval(pt.with_coords({sym: x - step}))) / (2 * step)
        err = abs(fd - exact) / max(1.0, abs(exact))
        worst = max(worst, err)
        if not err < 1e-6:
            failures.append((case, text, sym.name, err))
    _record(7, not failures, f"1000 checks, max relative error {worst:.2e}, {len(failures)} failures")
    assert not failures


def test_criterion_8_hessian_classification():
    pu = load_system("pais_uhlenbeck")
    rel = load_system("relativistic_particle")
    checks = {
        "PU regular": pu.hessian.verdict is HessianVerdict.REGULAR,
        "PU det": pu.hessian.determinant == parse_expression("-g", pu.chart),
        "relativistic singular": rel.hessian.determinant.is_zero()
        and rel.hessian.verdict is HessianVerdict.SINGULAR,
    }
    regular = sum(random_regular_lagrangian(np.random.default_rng(800 + s))[0].hessian.verdict
                  is HessianVerdict.REGULAR for s in range(20))
    checks["random regular"] = regular == 20
    bad = [k for k, v in checks.items() if not v]
    _record(8, not bad, f"PU det = {pu.hessian.determinant}, relativistic det = {rel.hessian.determinant}, "
            f"{regular}/20 random regular" + (f"; failed {bad}" if bad else ""))
    assert not bad

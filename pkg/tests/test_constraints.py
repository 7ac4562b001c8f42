from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from conftest import load_system, relativistic_ledger
from helpers import random_regular_lagrangian
from unimech.constraints import (
    Policy, Provenance, ReduceVerdict, Status, _surface, lie_apply, normalize_constraint,
    proportional, reduce_mod, run_algorithm,
)
from unimech.forms import VectorFieldExpr
from unimech.jetcalc import LagrangianSystem
from unimech.symbolic import ChartSpec, is_zero, parse_expression, parse_lagrangian
from unimech.unified import build_unified

EXPECTED = [
    (0, "dot(p1, q1)"),
    (0, "dot(p1, p1) - a^2/dot(q1, q1)"),
    (1, "dot(p0, q1)"),
    (1, "dot(p0, p1)"),
    (2, "dot(p0, p0)"),
]


def _ledger(src: str, **policy):
    chart, lag = parse_lagrangian(src)
    return run_algorithm(build_unified(LagrangianSystem(chart, lag)), Policy(**policy))


def _rel_expr(text: str):
    return parse_expression(text, load_system("relativistic_particle").chart)


@pytest.mark.parametrize("semispray1", [True, False])
def test_relativistic_chain(semispray1):
    led = relativistic_ledger(semispray1)
    assert led.status is Status.STABILIZED
    got = [(e.generation, e.expr) for e in led.constraints()]
    assert [g for g, _ in got] == [g for g, _ in EXPECTED]
    for (_, expr), (_, text) in zip(got, EXPECTED):
        assert proportional(expr, _rel_expr(text)), (expr, text)
    assert [e.label for e in led.constraints()] == [
        "phi^(0)_1", "phi^(0)_2", "phi^(1)_1", "phi^(1)_2", "phi^(2)_1"]
    assert led.hamiltonian_on_surface["reduces_to_zero"] is True
    assert led.compatibility["compatible"]


def test_relativistic_semispray_fixes_second_coefficients():
    led = relativistic_ledger(True)
    assert {s.name: str(v) for s, v in led.fixed_unknowns.items()} == {
        "F2_1": "q3_1", "F2_2": "q3_2", "F2_3": "q3_3"}
    assert [s.name for s in led.free_unknowns] == ["F3_1", "F3_2", "F3_3"]
    assert led.compatibility["rank"] == 1


def test_secondaries_are_projectable():
    k = 2
    for e in relativistic_ledger(True).constraints():
        syms = e.expr.free_symbols()
        assert not any(s.family == "q" and s.order >= k for s in syms)
        assert {s.family for s in syms} <= {"q", "p", "param"}


def test_stabilization_is_idempotent():
    led = relativistic_ledger(True)
    ctx = led.context
    x = ctx.field.subs(led.fixed_unknowns)
    pts = _surface(ctx, [e.expr for e in led.constraints()]).points(16, salt=41)
    for e in led.generations[-1]:
        d = lie_apply(x, e.expr, ctx.top_sub)
        assert is_zero(d, ctx.policy.sampler, pts).vanishes
    again = run_algorithm(ctx.unified, Policy(semispray1=True))
    assert again.to_json() == led.to_json()


def test_lie_derivatives_on_the_primary_surface():
    led = relativistic_ledger(True)
    ctx = led.context
    x = ctx.field.subs(led.fixed_unknowns)
    pts = _surface(ctx, [e.expr for e in led.generations[0] if e.provenance == Provenance.IMAGE]).points(16, salt=8)
    pairs = [("dot(p1, q1)", "-dot(p0, q1)"), ("dot(p1, p1) - a^2/dot(q1, q1)", "-2*dot(p0, p1)")]
    for phi, expect in pairs:
        d = lie_apply(x, _rel_expr(phi), ctx.top_sub) - _rel_expr(expect).subs(ctx.top_sub)
        assert is_zero(d, ctx.policy.sampler, pts).vanishes
    assert lie_apply(x, parse_expression("3")).is_zero()


def test_reduce_mod_verdicts(pu):
    led = run_algorithm(build_unified(pu))
    verdict, detail = reduce_mod(parse_expression("g*(F2 - q3)", pu.chart), led)
    assert verdict is ReduceVerdict.FIXES
    assert {s.name: str(v) for s, v in detail.items()} == {"F2": "q3"}
    assert reduce_mod(parse_expression("0"), led)[0] is ReduceVerdict.VANISHES

    rel = relativistic_ledger(True)
    gen0 = dataclasses.replace(rel, generations=rel.generations[:1])
    verdict, detail = reduce_mod(_rel_expr("-dot(p0, q1)"), gen0)
    assert verdict is ReduceVerdict.NEW and proportional(detail, _rel_expr("dot(p0, q1)"))
    assert reduce_mod(_rel_expr("dot(p0, q1)"), rel)[0] is ReduceVerdict.VANISHES


def test_pais_uhlenbeck_has_no_secondaries(pu):
    led = run_algorithm(build_unified(pu))
    assert led.status is Status.STABILIZED
    assert led.constraints() == [] and len(led.generations) == 1
    assert {s.name: v for s, v in led.fixed_unknowns.items()} == {
        "F2": parse_expression("q3"), "F3": parse_expression("-(w^2*q0 + q2)/g")}
    assert led.free_unknowns == []


def test_free_particle_stabilizes_immediately(free):
    led = run_algorithm(build_unified(free))
    assert led.status is Status.STABILIZED and led.constraints() == []


@pytest.mark.parametrize("seed", range(5))
def test_regular_systems_only_have_graph_constraints(seed):
    sys, _ = random_regular_lagrangian(np.random.default_rng(100 + seed), max_k=2)
    led = run_algorithm(build_unified(sys))
    assert led.status is Status.STABILIZED
    assert all(e.provenance == Provenance.GRAPH for e in led.entries())
    assert led.free_unknowns == [] and len(led.fixed_unknowns) == sys.chart.k * sys.chart.n


def test_inconsistent_system():
    led = _ledger("system(dim=1, order=1)\nL = q0\n")
    assert led.status is Status.INCONSISTENT
    assert "nonzero constant" in led.notes[0]


def test_budget_is_enforced():
    led = run_algorithm(relativistic_ledger(True).context.unified, Policy(semispray1=True, max_generations=1))
    assert led.status is Status.BUDGET


def test_constraints_beyond_the_projectable_layer():
    # Euler-Lagrange: q1_1 = 0 and q1_2 = -q0_1
    led = _ledger("system(dim=2, order=1)\nL = q1_1*q0_2 - q0_1^2/2\n")
    assert led.status is Status.STABILIZED
    chart = ChartSpec(2, 1)
    exprs = [e.expr for e in led.constraints() if e.generation == 1]
    assert len(exprs) == 2
    assert any(proportional(e, parse_expression("q1_1", chart)) for e in exprs)
    assert any(proportional(e, parse_expression("q1_2 + q0_1", chart)) for e in exprs)
    assert {s.name: str(v) for s, v in led.fixed_unknowns.items()} == {"F1_1": "0", "F1_2": "-q1_1"}


def test_trivial_dynamics_is_pinned_down():
    # L = d/dt(q1^2/2) - q0^2/2 forces q0 = 0 and, for holonomic fields, every derivative
    led = _ledger("system(dim=1, order=2)\nL = q1*q2 - q0^2/2\n", semispray1=True)
    assert led.status is Status.STABILIZED
    chart = ChartSpec(1, 2)
    exprs = [e.expr for e in led.constraints()]
    for name in ("q0", "q1", "q2", "q3", "p0"):
        assert any(proportional(e, parse_expression(name, chart)) for e in exprs), name


def test_normalize_and_proportional():
    chart = ChartSpec(1, 2, ("a",))
    e = parse_expression("2*a*q1*p0 + 2*a*q1^2*p1", chart)
    n = normalize_constraint(e)
    assert n == parse_expression("p0 + q1*p1", chart)
    assert e / n == parse_expression("2*a*q1", chart)
    assert not proportional(parse_expression("p0", chart), parse_expression("q0*p0", chart))
    assert proportional(parse_expression("0"), parse_expression("0"))


def test_ledger_json_shape():
    out = relativistic_ledger(True).to_json()
    assert out["status"] == "stabilized"
    provs = [e["provenance"] for gen in out["generations"] for e in gen]
    assert provs.count("graph-primary") == 6
    assert provs.count("image-primary") == 2
    assert provs.count("secondary-gen-1") == 2 and provs.count("secondary-gen-2") == 1


def test_field_of_ledger_is_a_vector_field():
    x = relativistic_ledger(True).field()
    assert isinstance(x, VectorFieldExpr)
    assert {s.name for s in x.components} >= {"q0_1", "q3_3", "p1_2"}

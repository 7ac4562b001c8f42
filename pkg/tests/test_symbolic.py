from __future__ import annotations

import pickle
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from unimech.symbolic import (
    ChartSpec, Expr, NumericPoint, ParseError, ParseOptions, Sampler, ZeroVerdict, as_symbol,
    determinant, is_zero, parse_expr, parse_expression, parse_lagrangian, solve_linear, sym,
)
from unimech.symbolic.linalg import linear_coefficients

NAMES = ["q0", "q1", "q2", "w"]


def _expr_text(draw, depth, radicals=True):
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        if draw(st.booleans()):
            return draw(st.sampled_from(NAMES))
        n = draw(st.integers(-5, 5))
        d = draw(st.integers(1, 4))
        return f"({n}/{d})"
    op = draw(st.sampled_from(["+", "-", "*", "/", "^"] + (["sqrt"] if radicals else [])))
    # nested radicals are outside the supported language
    a = _expr_text(draw, depth - 1, radicals and op != "sqrt")
    if op == "sqrt":
        return f"sqrt(1 + ({a})^2)"
    if op == "^":
        return f"({a})^{draw(st.integers(0, 3))}"
    b = _expr_text(draw, depth - 1, radicals)
    if op == "/":
        return f"({a})/(2 + ({b})^2)"
    return f"({a}) {op} ({b})"


expr_texts = st.composite(lambda draw: _expr_text(draw, 3))()


def _sympy(text: str):
    return sympy.sympify(text.replace("^", "**"), locals={n: sympy.Symbol(n) for n in NAMES})


POINT = {"q0": 0.7, "q1": -1.3, "q2": 0.45, "w": 1.9}


def _point():
    return NumericPoint.from_names({k: v for k, v in POINT.items() if k != "w"}, {"w": POINT["w"]})


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expr_texts)
def test_print_parse_round_trip(text):
    e = parse_expression(text)
    assert parse_expr(str(e)) == e
    assert pickle.loads(pickle.dumps(e)) == e


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expr_texts)
def test_value_matches_sympy(text):
    e = parse_expression(text)
    ref = float(_sympy(text).subs({sympy.Symbol(k): v for k, v in POINT.items()}))
    assert e.eval(_point()) == pytest.approx(ref, rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expr_texts, st.sampled_from(NAMES))
def test_derivative_matches_sympy(text, var):
    e = parse_expression(text)
    ref = sympy.diff(_sympy(text), sympy.Symbol(var))
    val = float(ref.subs({sympy.Symbol(k): v for k, v in POINT.items()}))
    assert e.diff(var).eval(_point()) == pytest.approx(val, rel=1e-8, abs=1e-8)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(expr_texts, expr_texts)
def test_ring_axioms_and_product_rule(ta, tb):
    a, b = parse_expression(ta), parse_expression(tb)
    assert a + b == b + a
    assert a * b == b * a
    assert (a - a).is_zero()
    x = as_symbol("q0")
    assert (a * b).diff(x) == a.diff(x) * b + a * b.diff(x)
    assert (a + b).diff(x) == a.diff(x) + b.diff(x)


def test_canonical_form_is_unique():
    a = parse_expr("(q0^2 - q1^2)/(q0 - q1)")
    assert a == parse_expr("q0 + q1")
    assert parse_expr("sqrt(q0)^2") == parse_expr("q0")
    assert parse_expr("1/2*q1 + q1/2") == parse_expr("q1")
    assert parse_expr("(q0 + 1)/(q0 + 1)") == parse_expr("1")


def test_sqrt_rationalization():
    e = parse_expr("1/(1 + sqrt(q0))")
    assert (e * (1 + parse_expr("sqrt(q0)"))) == parse_expr("1")
    assert str(parse_expr("sqrt(4*q0^2)")) == "2*sqrt(q0^2)"


def test_nested_radicals_are_rejected():
    with pytest.raises(ParseError, match="nested square roots"):
        parse_expr("sqrt(1 + (sqrt(2) + q0)^2)")


def test_half_integer_powers():
    assert parse_expr("q0^(3/2)") == parse_expr("q0*sqrt(q0)")
    assert parse_expr("q0^(-1/2)") * parse_expr("sqrt(q0)") == parse_expr("1")
    with pytest.raises(ParseError):
        parse_expr("q0^(1/3)")


def test_substitution_is_simultaneous():
    e = parse_expr("q0 + 2*q1")
    out = e.subs({sym("q0"): sym("q1"), sym("q1"): sym("q0")})
    assert out == parse_expr("q1 + 2*q0")


def test_parse_errors_carry_positions():
    with pytest.raises(ParseError) as exc:
        parse_expression("q0 +* 1")
    assert (exc.value.line, exc.value.col) == (1, 5)
    src = "system(dim=1, order=2)\nL = q3^2\n"
    with pytest.raises(ParseError) as exc:
        parse_lagrangian(src)
    assert exc.value.kind == "semantic" and exc.value.line == 2
    with pytest.raises(ParseError):
        parse_lagrangian("system(dim=2, order=1)\nL = q1^2\n")
    with pytest.raises(ParseError):
        parse_lagrangian("system(dim=1, order=1)\nL = p0*q1\n")
    with pytest.raises(ParseError):
        parse_lagrangian("system(dim=1, order=1)\nparams(a)\nnonzero(b)\nL = a*q1^2\n")


def test_lagrangian_program_and_dot():
    chart, lag = parse_lagrangian(
        "# comment\nsystem(dim=2, order=1)\nparams(m)\nnonzero(m)\nL = m/2*dot(q1, q1)\n",
        ParseOptions(bindings={"m": 2.0}))
    assert chart == ChartSpec(2, 1, ("m",), frozenset({"m"}), (("m", 2.0),))
    assert lag == parse_expr("m/2*(q1_1^2 + q1_2^2)")


def test_zero_test_verdicts():
    assert is_zero(parse_expr("0")) is ZeroVerdict.PROVEN_ZERO
    assert is_zero(parse_expr("q0 - q1")) is ZeroVerdict.PROVEN_NONZERO
    # sqrt(q0^2) - q0 vanishes only on half of the sample space
    assert is_zero(parse_expr("sqrt(q0^2)^2 - q0^2")) is ZeroVerdict.PROVEN_ZERO


def test_sampler_is_deterministic():
    s = Sampler(seed=5)
    syms = [as_symbol("q0"), as_symbol("q1")]
    a = s.points(syms, 4)
    b = s.points(syms, 4)
    assert [p.coords for p in a] == [p.coords for p in b]


def _numeric_det(rows, pt):
    return np.linalg.det(np.array([[c.eval(pt) for c in r] for r in rows]))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_bareiss_determinant_oracle(n, seed):
    rng = np.random.default_rng(seed)
    names = ["q0", "q1", "w"]
    rows = []
    for _ in range(n):
        row = []
        for _ in range(n):
            a, b = rng.integers(-3, 4, 2)
            row.append(parse_expr(f"{a}*{rng.choice(names)} + {b}"))
        rows.append(row)
    det = determinant(rows)
    pt = NumericPoint.from_names({"q0": 0.3, "q1": -1.1}, {"w": 0.8})
    assert det.eval(pt) == pytest.approx(_numeric_det(rows, pt), rel=1e-9, abs=1e-9)


def test_solve_linear_exact():
    x, y = as_symbol("f0"), as_symbol("f1")
    eqs = [parse_expr("f0 + f1 - q0"), parse_expr("f0 - f1 - q1")]
    sol = solve_linear(eqs, [x, y])
    assert sol.solved[x] == parse_expr("(q0 + q1)/2")
    assert sol.solved[y] == parse_expr("(q0 - q1)/2")
    assert sol.rank == 2 and not sol.free and sol.consistent


def test_solve_linear_reports_conditions_and_free():
    x, y = as_symbol("f0"), as_symbol("f1")
    sol = solve_linear([parse_expr("f0 + f1 - q0"), parse_expr("2*f0 + 2*f1 - q1")], [x, y])
    assert sol.rank == 1
    assert sol.free == [y]
    assert len(sol.conditions) == 1 and not sol.conditions[0].is_zero()


def test_linear_coefficients_rejects_nonlinear():
    with pytest.raises(ValueError):
        linear_coefficients([parse_expr("f0^2 - q0")], [as_symbol("f0")])


def test_constant_folding():
    assert parse_expr("2^10 - 1000").constant_value() == Fraction(24)
    assert Expr.const(Fraction(1, 3)) * 3 == parse_expr("1")

from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from helpers import random_polynomial
from unimech import kernels
from unimech.symbolic import ChartSpec, NumericPoint, parse_expression
from unimech.unified import analyze_regular, build_unified

CHART = ChartSpec(1, 2, ("a",))
INPUTS = CHART.w_coordinates() + CHART.param_symbols()
NAMES = [s.name for s in CHART.w_coordinates()]

try:
    kernels.backend_module("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="compiled extension not built")
hyp = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _exprs(rng):
    out = []
    for _ in range(4):
        num = random_polynomial(rng, NAMES + ["a"], 3, 3, 0)
        den = random_polynomial(rng, NAMES, 2, 2, 0)
        out.append(parse_expression(f"({num})/(3 + ({den})^2) + sqrt(1 + q0^2)", CHART))
    return out


def test_python_backend_matches_the_interpreter():
    rng = np.random.default_rng(0)
    exprs = _exprs(rng)
    fn = kernels.CompiledFunctions(exprs, INPUTS)
    for _ in range(20):
        x = rng.uniform(-1, 1, len(INPUTS))
        pt = NumericPoint(dict(zip(INPUTS[:-1], x[:-1])), {"a": x[-1]})
        want = [e.eval(pt) for e in exprs]
        np.testing.assert_allclose(kernels.evaluate(fn.tape, x, "python"), want, rtol=1e-12, atol=1e-12)


@needs_cython
@hyp
@given(st.integers(0, 2**32 - 1))
def test_backends_agree_on_evaluation(seed):
    rng = np.random.default_rng(seed)
    tape = kernels.compile_tape(_exprs(rng), INPUTS)
    xs = rng.uniform(-1, 1, (16, len(INPUTS)))
    py = kernels.evaluate_batch(tape, xs, "python")
    cy = kernels.evaluate_batch(tape, xs, "cython")
    np.testing.assert_allclose(cy, py, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(kernels.evaluate(tape, xs[0], "cython"), py[0], rtol=1e-13, atol=1e-13)


@needs_cython
def test_backends_agree_on_rk4(pu):
    x = analyze_regular(pu).lagrangian_field
    coords = pu.chart.lagrangian_coordinates()
    params = pu.chart.param_symbols()
    tape = kernels.compile_tape([x[c] for c in coords], coords + params)
    x0 = np.array([1.0, 0.0, 0.0, 0.0] + [1.0] * len(params))
    a, na = kernels.rk4(tape, x0, 4, 1e-3, 2000, backend="python")
    b, nb = kernels.rk4(tape, x0, 4, 1e-3, 2000, backend="cython")
    assert na == nb == 2000
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_cython)])
def test_rk4_guard(backend):
    tape = kernels.compile_tape([parse_expression("q0^2")], [CHART.w_coordinates()[0]])
    states, done = kernels.rk4(tape, np.array([1.0]), 1, 1e-2, 200, 1e6, backend)
    assert done < 200 and np.all(np.isfinite(states[: done + 1]))


def test_graph_constraints_batch(rel):
    U = build_unified(rel)
    exprs = list(U.graph.values())
    inputs = rel.chart.w_coordinates() + rel.chart.param_symbols()
    fn = kernels.CompiledFunctions(exprs, inputs)
    xs = np.random.default_rng(1).uniform(0.5, 1.5, (8, len(inputs)))
    rows = fn.batch(xs)
    assert rows.shape == (8, len(exprs))
    np.testing.assert_allclose(rows[3], fn(xs[3]), rtol=1e-14)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.backend_module("fortran")


def test_environment_forces_the_fallback():
    env = dict(os.environ, UNIMECH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from unimech import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    if HAVE_CYTHON:
        env["UNIMECH_PURE_PYTHON"] = "0"
        out = subprocess.run([sys.executable, "-c", "from unimech import kernels; print(kernels.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "cython"

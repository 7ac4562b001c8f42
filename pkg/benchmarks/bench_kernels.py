"""Compare the compiled and pure-Python tape kernels.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Times batch evaluation of the relativistic-particle graph constraints and an
RK4 run of the Pais-Uhlenbeck Lagrangian field on both backends, and checks
that the two agree.
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

import numpy as np

from unimech import kernels
from unimech.jetcalc import LagrangianSystem
from unimech.symbolic.parser import parse_lagrangian
from unimech.unified import analyze_regular, build_unified

ROOT = Path(__file__).resolve().parent.parent / "lagrangians"


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_eval(backends, repeat, rows=2000):
    chart, lag = parse_lagrangian((ROOT / "relativistic_particle.lag").read_text())
    U = build_unified(LagrangianSystem(chart, lag))
    exprs = list(U.graph.values())
    inputs = chart.w_coordinates() + chart.param_symbols()
    tape = kernels.compile_tape(exprs, inputs)
    xs = np.random.default_rng(0).uniform(0.5, 1.5, (rows, len(inputs)))
    res = {}
    for b in backends:
        res[b] = _best(lambda: kernels.evaluate_batch(tape, xs, backend=b), repeat)
    return {"instructions": int(len(tape.ops)), "rows": rows}, res


def bench_rk4(backends, repeat, steps):
    chart, lag = parse_lagrangian((ROOT / "pais_uhlenbeck.lag").read_text())
    xl = analyze_regular(LagrangianSystem(chart, lag)).lagrangian_field
    coords = chart.lagrangian_coordinates()
    inputs = coords + chart.param_symbols()
    tape = kernels.compile_tape([xl[c] for c in coords], inputs)
    x0 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 1.0])
    res = {}
    for b in backends:
        res[b] = _best(lambda: kernels.rk4(tape, x0, len(coords), 1e-3, steps, backend=b), repeat)
    return {"instructions": int(len(tape.ops)), "steps": steps}, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["python"]
    try:
        kernels.backend_module("cython")
        backends.append("cython")
    except ImportError:
        print("compiled kernel not built; timing the pure-Python backend only")
    report = {}
    for name, (meta, res) in (("eval_batch", bench_eval(backends, args.repeat)),
                              ("rk4", bench_rk4(backends, args.repeat, args.steps))):
        entry = dict(meta)
        for b, (t, _) in res.items():
            entry[f"{b}_seconds"] = round(t, 6)
        if len(res) == 2:
            a = np.asarray(res["python"][1][0] if name == "rk4" else res["python"][1])
            c = np.asarray(res["cython"][1][0] if name == "rk4" else res["cython"][1])
            entry["max_abs_difference"] = float(np.max(np.abs(a - c)))
            entry["speedup"] = round(entry["python_seconds"] / entry["cython_seconds"], 1)
        report[name] = entry
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()

"""Backend selection for the tape kernels.

The compiled extension is used when it imports; setting ``UNIMECH_PURE_PYTHON=1``
forces the pure-Python fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from ._tape import Tape, compile_tape

if os.environ.get("UNIMECH_PURE_PYTHON", "") not in ("", "0"):
    _backend = _kernels_py
else:
    try:
        from . import _kernels as _backend  # type: ignore[attr-defined]
    except ImportError:
        _backend = _kernels_py

BACKEND = _backend.BACKEND


def backend_module(name: str | None = None):
    if name is None:
        return _backend
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def _args(t: Tape):
    return t.ops, t.a, t.b, t.consts, t.n_inputs, t.outputs


def evaluate(t: Tape, x, backend=None) -> np.ndarray:
    return backend_module(backend).eval_tape(*_args(t), np.asarray(x, dtype=float))


def evaluate_batch(t: Tape, xs, backend=None) -> np.ndarray:
    return backend_module(backend).eval_tape_batch(*_args(t), np.asarray(xs, dtype=float))


def rk4(t: Tape, x0, n_state: int, h: float, n_steps: int, guard: float = 1e12, backend=None):
    return backend_module(backend).rk4(*_args(t), np.asarray(x0, dtype=float), n_state,
                                       float(h), int(n_steps), float(guard))


class CompiledFunctions:
    """Expressions compiled over a fixed input ordering."""

    def __init__(self, exprs, inputs):
        self.inputs = list(inputs)
        self.tape = compile_tape(list(exprs), self.inputs)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.tape, x)

    def batch(self, xs) -> np.ndarray:
        return evaluate_batch(self.tape, xs)


__all__ = ["BACKEND", "CompiledFunctions", "Tape", "compile_tape", "evaluate", "evaluate_batch", "rk4"]

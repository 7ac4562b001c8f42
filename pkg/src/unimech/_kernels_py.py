"""Pure-Python reference implementation of the tape kernels."""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def _run(ops, a, b, c, n_inputs, x, regs):
    for i in range(n_inputs):
        regs[i] = x[i]
    r = n_inputs
    for k in range(len(ops)):
        op = ops[k]
        if op == 0:
            v = c[k]
        elif op == 1:
            v = regs[a[k]] + regs[b[k]]
        elif op == 2:
            v = regs[a[k]] - regs[b[k]]
        elif op == 3:
            v = regs[a[k]] * regs[b[k]]
        elif op == 4:
            d = regs[b[k]]
            v = regs[a[k]] / d if d != 0.0 else math.inf
        elif op == 5:
            arg = regs[a[k]]
            v = math.sqrt(arg) if arg >= 0.0 else math.nan
        elif op == 6:
            v = -regs[a[k]]
        else:
            v = regs[a[k]] ** b[k]
        regs[r] = v
        r += 1


def eval_tape(ops, a, b, c, n_inputs, outputs, x):
    """Evaluate the tape at input vector ``x``; returns the output values."""
    ops, a, b, c = ops.tolist(), a.tolist(), b.tolist(), c.tolist()
    regs = [0.0] * (n_inputs + len(ops))
    try:
        _run(ops, a, b, c, n_inputs, list(map(float, x)), regs)
    except OverflowError:
        return np.full(len(outputs), np.inf)
    return np.array([regs[o] for o in outputs.tolist()], dtype=float)


def rk4(ops, a, b, c, n_inputs, outputs, x0, n_state, h, n_steps, guard):
    """Classic RK4 on the first ``n_state`` inputs; the rest stay fixed.

    Returns ``(states, steps_done)`` where ``states`` has ``n_steps + 1`` rows;
    rows past ``steps_done`` are left as NaN when the overflow guard trips.
    """
    ops_l, a_l, b_l, c_l = ops.tolist(), a.tolist(), b.tolist(), c.tolist()
    outs = outputs.tolist()
    regs = [0.0] * (n_inputs + len(ops_l))
    x = [float(v) for v in x0]
    out = np.full((n_steps + 1, n_state), np.nan)
    out[0] = x[:n_state]

    def f(y):
        _run(ops_l, a_l, b_l, c_l, n_inputs, y, regs)
        return [regs[o] for o in outs]

    done = 0
    try:
        for step in range(n_steps):
            k1 = f(x)
            y = x[:]
            for i in range(n_state):
                y[i] = x[i] + 0.5 * h * k1[i]
            k2 = f(y)
            for i in range(n_state):
                y[i] = x[i] + 0.5 * h * k2[i]
            k3 = f(y)
            for i in range(n_state):
                y[i] = x[i] + h * k3[i]
            k4 = f(y)
            bad = False
            for i in range(n_state):
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not abs(x[i]) <= guard:
                    bad = True
            if bad:
                break
            out[step + 1] = x[:n_state]
            done = step + 1
    except (OverflowError, ZeroDivisionError):
        pass
    return out, done


def eval_tape_batch(ops, a, b, c, n_inputs, outputs, xs):
    """Row-wise :func:`eval_tape` over a 2-d array of inputs."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty((xs.shape[0], len(outputs)))
    for i in range(xs.shape[0]):
        out[i] = eval_tape(ops, a, b, c, n_inputs, outputs, xs[i])
    return out

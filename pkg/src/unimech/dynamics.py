"""Fixed-step RK4 integration of solved vector fields and trajectory monitors.

Fields whose coefficients are plain expressions run on the compiled tape
kernel.  Fields that still carry free coefficients (an underdetermined
tangency system) are wrapped in :class:`ConstrainedField`, which picks the
minimum-norm solution at every evaluation and runs on a NumPy loop.
"""
from __future__ import annotations

import csv
import io
import json
import math
import dataclasses
from dataclasses import dataclass

import numpy as np

from . import kernels
from .forms import CoordinateMap, VectorFieldExpr
from .surface import SamplingFailure, SurfaceSampler
from .symbolic import symbols as S
from .symbolic.chart import NumericPoint
from .symbolic.expr import Expr, as_expr
from .symbolic.zero import Sampler

DEFAULT_GUARD = 1e12


class IntegrationError(ValueError):
    """Invalid integrator settings or a field that cannot be evaluated."""


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # one row per time, columns in ``coordinates`` order
    coordinates: list
    params: dict
    space: str = "lagrangian"
    field: str = ""
    settings: dict = dataclasses.field(default_factory=dict)
    diagnostics: list = dataclasses.field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return any(d.startswith("truncated") for d in self.diagnostics)

    @property
    def h(self) -> float:
        return float(self.settings.get("h", self.times[1] - self.times[0] if len(self.times) > 1 else 0.0))

    def __len__(self) -> int:
        return len(self.times)

    def point(self, i: int) -> NumericPoint:
        return NumericPoint(dict(zip(self.coordinates, map(float, self.states[i]))), dict(self.params))

    @property
    def points(self) -> list:
        return [self.point(i) for i in range(len(self))]

    def column(self, sym) -> np.ndarray:
        if isinstance(sym, str):
            sym = S.symbol_from_name(sym)
        return self.states[:, self.coordinates.index(sym)]

    def values(self, exprs) -> np.ndarray:
        """Expressions evaluated along the trajectory, one row per time."""
        exprs = [as_expr(e) for e in exprs]
        fn = kernels.CompiledFunctions(exprs, self.coordinates + [S.param(n) for n in sorted(self.params)])
        pv = [self.params[n] for n in sorted(self.params)]
        xs = np.column_stack([self.states, np.tile(pv, (len(self), 1))]) if pv else self.states
        _check_inputs(exprs, fn.inputs)
        return fn.batch(xs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [s.name for s in self.coordinates])
        for t, row in zip(self.times, self.states):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "field": self.field,
            "settings": dict(self.settings),
            "params": dict(sorted(self.params.items())),
            "coordinates": [s.name for s in self.coordinates],
            "times": [float(t) for t in self.times],
            "states": [[float(v) for v in row] for row in self.states],
            "diagnostics": list(self.diagnostics),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _fmt(v: float) -> str:
    return repr(float(v))


def _check_inputs(exprs, inputs) -> None:
    allowed = set(inputs)
    for e in exprs:
        missing = {s for s in e.free_symbols() if s.family != "sqrt"} - allowed
        if missing:
            raise IntegrationError(f"field depends on unbound symbols {sorted(missing)}")


def _grid(t_end: float, h: float) -> int:
    if not (h > 0 and math.isfinite(h)):
        raise IntegrationError("step h must be positive")
    if t_end < 0:
        raise IntegrationError("t_end must be non-negative")
    n = int(round(t_end / h))
    if abs(n * h - t_end) > 1e-9 * max(1.0, t_end):
        raise IntegrationError(f"t_end={t_end} is not a multiple of h={h}")
    return n


def field_coordinates(x: VectorFieldExpr) -> list:
    """Coordinates moved by ``x`` or read by its coefficients, in chart order."""
    syms = {s for s in x.components if s.is_coordinate}
    for c in x.components.values():
        syms |= {s for s in c.free_symbols() if s.is_coordinate}
    return sorted(syms)


class ConstrainedField:
    """Vector field with free coefficients fixed by least squares at each point.

    ``equations`` are linear in ``unknowns``; at every evaluation the
    minimum-norm solution is substituted into ``base``.
    """

    def __init__(self, base: VectorFieldExpr, unknowns, equations, coordinates, params=()):
        self.base = base
        self.unknowns = list(unknowns)
        self.coordinates = list(coordinates)
        self.param_symbols = sorted(params)
        inputs = self.coordinates + self.param_symbols
        zero = {u: Expr.const(0) for u in self.unknowns}
        eqs = list(equations)
        amat = [e.diff(u) for e in eqs for u in self.unknowns]
        rhs = [-e.subs(zero) for e in eqs]
        _check_inputs(amat + rhs, inputs)
        self._m, self._n = len(eqs), len(self.unknowns)
        self._sys = kernels.CompiledFunctions(amat + rhs, inputs)
        comps = [base[c] for c in self.coordinates]
        _check_inputs(comps, inputs + self.unknowns)
        self._rhs = kernels.CompiledFunctions(comps, inputs + self.unknowns)

    def coefficients(self, y: np.ndarray) -> np.ndarray:
        if not self._n:
            return np.zeros(0)
        v = self._sys(y)
        a = v[: self._m * self._n].reshape(self._m, self._n)
        b = v[self._m * self._n:]
        return np.linalg.lstsq(a, b, rcond=None)[0]

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self._rhs(np.concatenate([y, self.coefficients(y)]))

    def __str__(self) -> str:
        free = ", ".join(u.name for u in self.unknowns)
        return f"{self.base} [least-squares: {free}]"


def _rk4_callable(f, y0: np.ndarray, n_state: int, h: float, n_steps: int, guard: float):
    out = np.full((n_steps + 1, n_state), np.nan)
    y = np.array(y0, dtype=float)
    out[0] = y[:n_state]
    fixed = y[n_state:]

    def rhs(z):
        return f(np.concatenate([z, fixed]))

    x = y[:n_state].copy()
    done = 0
    with np.errstate(all="ignore"):
        for step in range(n_steps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h * k1)
            k3 = rhs(x + 0.5 * h * k2)
            k4 = rhs(x + h * k3)
            x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.abs(x) <= guard):
                break
            out[step + 1] = x
            done = step + 1
    return out, done


def integrate(x, x0: NumericPoint, t_end: float, h: float, coordinates=None,
              space: str = "lagrangian", guard: float = DEFAULT_GUARD, backend: str | None = None) -> Trajectory:
    """Classic RK4 from ``x0`` on ``[0, t_end]`` with step ``h``.

    ``x`` is a :class:`VectorFieldExpr` or a :class:`ConstrainedField`.
    Coordinates missing from the field have zero velocity.  When a state
    component exceeds ``guard`` in magnitude the trajectory is truncated and a
    diagnostic is recorded.
    """
    n_steps = _grid(t_end, h)
    if isinstance(x, ConstrainedField):
        coords = list(coordinates or x.coordinates)
        if coords != x.coordinates:
            raise IntegrationError("coordinates must match the constrained field's ordering")
        params = x.param_symbols
    else:
        coords = list(coordinates or field_coordinates(x))
        params = sorted({s for c in x.components.values() for s in c.free_symbols() if s.family == "param"})
    missing = [c for c in coords if x0.lookup(c) is None]
    if missing:
        raise IntegrationError(f"initial point lacks {', '.join(s.name for s in missing)}")
    unbound = [p.name for p in params if x0.lookup(p) is None]
    if unbound:
        raise IntegrationError(f"parameters without numeric values: {', '.join(unbound)}")
    y0 = np.array([x0.lookup(c) for c in coords] + [x0.lookup(p) for p in params], dtype=float)
    settings = {"method": "rk4", "h": float(h), "t_end": float(t_end), "steps": n_steps, "guard": guard}
    if isinstance(x, ConstrainedField):
        states, done = _rk4_callable(x, y0, len(coords), h, n_steps, guard)
        settings["backend"] = "numpy"
    else:
        exprs = [x[c] for c in coords]
        _check_inputs(exprs, coords + params)
        tape = kernels.compile_tape(exprs, coords + params)
        states, done = kernels.rk4(tape, y0, len(coords), h, n_steps, guard, backend)
        settings["backend"] = kernels.backend_module(backend).BACKEND
    diagnostics = []
    if done < n_steps:
        diagnostics.append(f"truncated at step {done} of {n_steps} (t={done * h:.6g}): "
                           f"state left the guard |x| <= {guard:g} or became non-finite")
    times = np.arange(done + 1) * h
    pvals = {p.name: float(x0.lookup(p)) for p in params}
    for name, v in x0.params.items():
        pvals.setdefault(name, float(v))
    return Trajectory(times, states[: done + 1], coords, pvals, space, str(x), settings, diagnostics)


@dataclass
class DriftReport:
    expression: str
    max_drift: float
    series: np.ndarray

    def to_json(self) -> dict:
        return {"expression": self.expression, "max_drift": self.max_drift}


def conserved(traj: Trajectory, f) -> DriftReport:
    """``max_t |f(x_t) - f(x_0)|`` with the per-step series."""
    f = as_expr(f)
    vals = traj.values([f])[:, 0]
    series = np.abs(vals - vals[0])
    return DriftReport(str(f), float(np.max(series)) if len(series) else 0.0, series)


def project_trajectory(traj: Trajectory, fl: CoordinateMap, space: str = "hamiltonian") -> Trajectory:
    """Pointwise image of a trajectory under a coordinate map such as FL."""
    targets = list(fl.target) if fl.target else sorted(fl.images)
    vals = traj.values([fl.images[t] for t in targets])
    return Trajectory(traj.times.copy(), vals, targets, dict(traj.params), space,
                      f"{fl.name or 'map'}({traj.field})", dict(traj.settings), list(traj.diagnostics))


def central_difference(traj: Trajectory, sym) -> np.ndarray:
    """Central difference of one coordinate at the interior grid points."""
    col = traj.column(sym)
    return (col[2:] - col[:-2]) / (2.0 * traj.h)


def holonomy_residuals(traj: Trajectory, chart) -> dict:
    """``max |q_{i+1} - dq_i/dt|`` (central differences) for ``0 <= i <= 2k-2``."""
    out = {}
    present = set(traj.coordinates)
    for i in range(2 * chart.k - 1):
        for a in chart.indices:
            lo, hi = S.q(i, a), S.q(i + 1, a)
            if lo in present and hi in present:
                diff = central_difference(traj, lo) - traj.column(hi)[1:-1]
                out[lo.name] = float(np.max(np.abs(diff))) if diff.size else 0.0
    return out


def field_residual(traj: Trajectory, x: VectorFieldExpr) -> float:
    """Max difference between central differences of the trajectory and ``x``."""
    coords = [c for c in traj.coordinates if c in x.components]
    vals = traj.values([x[c] for c in coords])[1:-1]
    worst = 0.0
    for j, c in enumerate(coords):
        fd = central_difference(traj, c)
        worst = max(worst, float(np.max(np.abs(fd - vals[:, j]))) if fd.size else 0.0)
    return worst


def on_surface_initial(equations, seed: NumericPoint, variables, sampler: Sampler | None = None,
                       max_iter: int = 200, tol: float = 1e-12) -> NumericPoint:
    """Damped Newton projection of ``seed`` onto the common zero set of ``equations``.

    Only ``variables`` move; parameters keep the seed's values.
    """
    variables = list(variables)
    eqs = [as_expr(e) for e in equations]
    sampler = sampler or Sampler()
    params = sorted({s for e in eqs for s in e.free_symbols() if s.family == "param"})
    missing = [s.name for s in variables + params if seed.lookup(s) is None]
    if missing:
        raise IntegrationError(f"seed lacks values for {', '.join(missing)}")
    surf = SurfaceSampler(eqs, variables, sampler, params, max_iter=max_iter, tol=tol)
    x0 = np.array([seed.lookup(s) for s in variables], dtype=float)
    pv = np.array([seed.lookup(p) for p in surf.params], dtype=float)
    x = surf.project(x0, pv)
    if x is None:
        raise SamplingFailure("damped Newton did not reach the constraint surface from the seed")
    return seed.with_coords({s: float(v) for s, v in zip(variables, x)})


def ledger_field(ledger, coordinates=None):
    """Integrable field from a constraint ledger (least squares over free unknowns)."""
    x = ledger.field()
    if x is None:
        raise IntegrationError("ledger has no solved field")
    chart = ledger.context.unified.chart
    coords = list(coordinates or chart.w_coordinates())
    if not ledger.free_unknowns:
        return x
    free = set(ledger.free_unknowns)
    eqs = [e.subs(ledger.fixed_unknowns) for e in ledger.tangency_equations]
    eqs = [e for e in eqs if e.free_symbols() & free]
    return ConstrainedField(x, ledger.free_unknowns, eqs, coords, chart.param_symbols())


__all__ = [
    "ConstrainedField", "DriftReport", "IntegrationError", "Trajectory", "central_difference",
    "conserved", "field_coordinates", "field_residual", "holonomy_residuals", "integrate",
    "ledger_field", "on_surface_initial", "project_trajectory",
]

"""Seeded sampling of points on the zero set of a family of expressions.

Points are produced by Gauss-Newton (least-squares steps with backtracking)
from random starts, which also converges on rank-deficient systems such as a
vector equation of rank one.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .symbolic import symbols as S
from .symbolic.chart import NumericPoint
from .symbolic.expr import Expr
from .symbolic.zero import Sampler


class SamplingFailure(RuntimeError):
    """No valid on-surface sample could be produced within the retry budget."""


def split_sum_of_squares(e: Expr) -> list:
    """``x1^2 + ... + xm^2`` (positive weights) -> ``[x1, ..., xm]``; else ``[e]``.

    Over the reals such a constraint is equivalent to every ``x_i = 0``; the
    split keeps Newton's method quadratically convergent.
    """
    if e.den or len(e.num) < 1:
        return [e]
    parts = []
    for m, c in e.num.items():
        dec = S.decode(m)
        if c <= 0 or len(dec) != 1 or dec[0][1] != 2:
            return [e]
        parts.append(Expr.symbol(S.by_sid(dec[0][0])))
    return parts


class SurfaceSampler:
    """Points where every equation vanishes.

    ``variables`` are the coordinates moved by Newton; parameters (symbols of
    the ``param`` family) are drawn once per point and then held fixed, or
    taken from ``sampler.fixed`` when bound.
    """

    def __init__(self, equations, variables, sampler: Sampler | None = None, params=(),
                 max_iter: int = 200, tol: float = 1e-11):
        self.sampler = sampler or Sampler()
        eqs = []
        for e in equations:
            if not e.is_zero():
                eqs.extend(split_sum_of_squares(e))
        self.equations = eqs
        self.variables = list(variables)
        syms = set(params)
        for e in eqs:
            syms |= {s for s in e.free_symbols() if s.family == "param"}
        self.params = sorted(syms)
        for e in eqs:
            missing = {s for s in e.free_symbols() if s.family != "param"} - set(self.variables)
            if missing:
                raise ValueError(f"equation uses symbols outside the sampled variables: {sorted(missing)}")
        self.max_iter = max_iter
        self.tol = tol
        inputs = self.variables + self.params
        n = len(self.variables)
        jac = [e.diff(v) for e in eqs for v in self.variables]
        self._fn = kernels.CompiledFunctions(eqs + jac, inputs) if eqs else None
        self._n = n

    def _eval(self, x):
        out = self._fn(x)
        m = len(self.equations)
        return out[:m], out[m:].reshape(m, self._n)

    def project(self, x0: np.ndarray, pvals: np.ndarray):
        """Newton projection; returns the point or ``None`` when it fails."""
        if self._fn is None:
            return x0
        n = self._n
        x = np.concatenate([x0, pvals])
        r, jmat = self._eval(x)
        if not np.all(np.isfinite(r)):
            return None
        norm = np.linalg.norm(r)
        for _ in range(self.max_iter):
            if not np.all(np.isfinite(jmat)):
                return None
            step = np.linalg.lstsq(jmat, -r, rcond=None)[0]
            # trust region: near-singular Jacobians otherwise throw the iterate far away
            cap = max(1.0, np.linalg.norm(x[:n]))
            size = np.linalg.norm(step)
            if size > cap:
                step *= cap / size
            t = 1.0
            for _ in range(30):
                xt = x.copy()
                xt[:n] += t * step
                rt, jt = self._eval(xt)
                nt = np.linalg.norm(rt) if np.all(np.isfinite(rt)) else np.inf
                if nt < norm or nt <= self.tol:
                    break
                t *= 0.5
            else:
                break
            x, r, jmat, norm = xt, rt, jt, nt
            if norm <= self.tol and np.linalg.norm(t * step) < 1e-14 * max(1.0, np.linalg.norm(x[:n])):
                break
            if norm == 0.0:
                break
        if norm > 10 * self.tol or np.max(np.abs(x[:n])) > 1e6:
            return None
        return x[:n]

    def points(self, count: int | None = None, salt: int = 0) -> list:
        count = count or self.sampler.samples
        rng = self.sampler.rng(1000 + salt)
        fixed = dict(self.sampler.fixed)
        out, tries = [], 0
        while len(out) < count:
            tries += 1
            if tries > count + self.sampler.retries * 4:
                raise SamplingFailure(f"only {len(out)} of {count} on-surface samples found")
            x0 = self._draw(rng, len(self.variables))
            pvals = np.array([fixed.get(p.name, self._draw(rng, 1)[0]) for p in self.params])
            x = self.project(x0, pvals)
            if x is None:
                continue
            coords = {v: float(val) for v, val in zip(self.variables, x)}
            params = {p.name: float(val) for p, val in zip(self.params, pvals)}
            for name, val in fixed.items():
                params.setdefault(name, float(val))
            out.append(NumericPoint(coords, params))
        return out

    def _draw(self, rng, n):
        mag = rng.uniform(self.sampler.low, self.sampler.high, n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return mag * sign


def jacobian_rank(exprs, variables, points, tol: float = 1e-8) -> int:
    """Max numeric rank of ``d(exprs)/d(variables)`` over the points."""
    if not exprs:
        return 0
    jac = [e.diff(v) for e in exprs for v in variables]
    syms = set(variables)
    params = set()
    for e in exprs:
        params |= {s for s in e.free_symbols() if s.family == "param"}
        syms |= {s for s in e.free_symbols() if s.family != "param"}
    inputs = sorted(syms) + sorted(params)
    fn = kernels.CompiledFunctions(jac, inputs)
    best = 0
    for pt in points:
        x = [pt.lookup(s) for s in inputs]
        if any(v is None for v in x):
            raise KeyError("point does not cover the Jacobian's symbols")
        m = fn(x).reshape(len(exprs), len(variables))
        if not np.all(np.isfinite(m)):
            continue
        sv = np.linalg.svd(m, compute_uv=False)
        if sv.size and sv[0] > 0:
            best = max(best, int(np.sum(sv > tol * sv[0])))
    return best


def evaluate_on(exprs, points) -> np.ndarray:
    """Matrix of values, one row per point."""
    syms = set()
    for e in exprs:
        syms |= e.free_symbols()
    inputs = sorted(syms)
    fn = kernels.CompiledFunctions(exprs, inputs)
    rows = []
    for pt in points:
        rows.append(fn([pt.lookup(s) for s in inputs]))
    return np.array(rows)

"""Numeric implicitization and sparse polynomial fitting with exact verification.

Both routines search a monomial ansatz numerically, pick an L1-minimal
representative with a linear program, snap its coefficients to small
rationals and then check the candidate exactly (or on fresh samples) before
returning it.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
from scipy.optimize import linprog

from .symbolic import symbols as S
from .symbolic.expr import ONE, ZERO, Expr


def monomials(variables, degree: int, min_degree: int = 0) -> list:
    """Exponent tuples (as sorted index tuples) of total degree in [min_degree, degree]."""
    out = []
    for d in range(min_degree, degree + 1):
        out.extend(combinations_with_replacement(range(len(variables)), d))
    return out


def monomial_expr(variables, mono) -> Expr:
    e = ONE
    for i in mono:
        e = e * Expr.symbol(variables[i])
    return e


def monomial_matrix(values: np.ndarray, monos) -> np.ndarray:
    """Columns are the monomials evaluated at the rows of ``values``."""
    cols = []
    for mono in monos:
        col = np.ones(values.shape[0])
        for i in mono:
            col = col * values[:, i]
        cols.append(col)
    return np.column_stack(cols) if cols else np.zeros((values.shape[0], 0))


def null_space(mat: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    if mat.shape[1] == 0:
        return np.zeros((0, 0))
    _, sv, vt = np.linalg.svd(mat, full_matrices=True)
    top = sv[0] if sv.size else 1.0
    rank = int(np.sum(sv > rtol * max(top, 1e-300)))
    return vt[rank:].T


def l1_minimal(base: np.ndarray, basis: np.ndarray, fix: tuple | None = None):
    """Minimize ``||base + basis @ y||_1`` (optionally with one entry fixed to a value)."""
    n, m = basis.shape if basis.size else (len(base), 0)
    if m == 0:
        return base.copy()
    # variables: y (free), t (>= |c|)
    c_obj = np.concatenate([np.zeros(m), np.ones(n)])
    a_ub = np.block([[basis, -np.eye(n)], [-basis, -np.eye(n)]])
    b_ub = np.concatenate([-base, base])
    a_eq = b_eq = None
    if fix is not None:
        j, val = fix
        a_eq = np.concatenate([basis[j], np.zeros(n)])[None, :]
        b_eq = np.array([val - base[j]])
    bounds = [(None, None)] * m + [(0, None)] * n
    res = linprog(c_obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        return None
    return base + basis @ res.x[:m]


def rationalize(vec: np.ndarray, max_den: int = 1000, zero_tol: float = 1e-7):
    out = []
    for v in vec:
        if abs(v) < zero_tol:
            out.append(Fraction(0))
        else:
            out.append(Fraction(float(v)).limit_denominator(max_den))
    return out


def poly_from_coeffs(variables, monos, coeffs) -> Expr:
    e = ZERO
    for mono, c in zip(monos, coeffs):
        if c:
            e = e + Expr.const(c) * monomial_expr(variables, mono)
    return e


def _scale_columns(mat):
    norms = np.linalg.norm(mat, axis=0)
    norms[norms == 0] = 1.0
    return mat / norms, norms


def implicitize(targets: dict, variables, sample_values, verify, max_degree: int = 4,
                rtol: float = 1e-9) -> list:
    """Generators of polynomial relations among ``variables`` on sampled data.

    ``sample_values`` is an array with one row per sample and one column per
    variable.  ``verify(expr)`` returns True when a candidate relation holds
    exactly.  Generators are returned degree by degree; a candidate is kept
    only when it is not already a combination of multiples of earlier ones.
    """
    variables = list(variables)
    gens: list = []  # (Expr, coefficient dict over monomial tuples)
    for d in range(1, max_degree + 1):
        monos = monomials(variables, d)
        index = {m: i for i, m in enumerate(monos)}
        vmat, norms = _scale_columns(monomial_matrix(sample_values, monos))
        nsp = null_space(vmat, rtol)
        if nsp.shape[1] == 0:
            continue
        nsp = nsp / norms[:, None]
        known = _multiples(gens, variables, monos, index, d)
        base_rank = np.linalg.matrix_rank(known) if known.size else 0
        target = nsp.shape[1]
        if base_rank >= target:
            continue
        # candidate normalizations: monomials with the most weight outside the known span
        resid = nsp - (known @ np.linalg.lstsq(known, nsp, rcond=None)[0] if known.size else 0)
        weight = np.linalg.norm(resid, axis=1)
        order = sorted(range(len(monos)), key=lambda j: (-round(weight[j], 6), -len(monos[j]), j))
        for j in order:
            if base_rank >= target or weight[j] < 1e-6:
                break
            vec = l1_minimal(np.zeros(len(monos)), nsp, (j, 1.0))
            if vec is None:
                continue
            coeffs = rationalize(vec)
            cand = poly_from_coeffs(variables, monos, coeffs)
            if cand.is_zero() or cand.is_constant() or not verify(cand):
                continue
            col = np.array([float(c) for c in coeffs])[:, None]
            trial = np.hstack([known, col]) if known.size else col
            r = np.linalg.matrix_rank(trial)
            if r > base_rank:
                gens.append((cand, dict(zip(monos, coeffs))))
                known = _multiples(gens, variables, monos, index, d)
                base_rank = np.linalg.matrix_rank(known)
    return [g for g, _ in gens]


def _multiples(gens, variables, monos, index, d) -> np.ndarray:
    cols = []
    for _, coeffs in gens:
        gdeg = max(len(m) for m, c in coeffs.items() if c)
        for shift in monomials(variables, d - gdeg):
            col = np.zeros(len(monos))
            for m, c in coeffs.items():
                if c:
                    col[index[tuple(sorted(m + shift))]] += float(c)
            cols.append(col)
    return np.column_stack(cols) if cols else np.zeros((len(monos), 0))


def fit_polynomial(sample_values: np.ndarray, target: np.ndarray, variables, check,
                   max_degree: int = 3, rtol: float = 1e-9, min_degree: int = 0):
    """Sparsest small-rational polynomial in ``variables`` matching ``target`` on the samples.

    ``check(expr)`` must confirm the candidate (for example on fresh samples);
    returns ``None`` when no degree up to ``max_degree`` works.
    """
    scale = max(1.0, float(np.max(np.abs(target))))
    for d in range(min_degree, max_degree + 1):
        monos = monomials(variables, d)
        vmat, norms = _scale_columns(monomial_matrix(sample_values, monos))
        sol, *_ = np.linalg.lstsq(vmat, target, rcond=None)
        if np.max(np.abs(vmat @ sol - target)) > 1e-7 * scale:
            continue
        nsp = null_space(vmat, rtol)
        sol = sol / norms
        nsp = nsp / norms[:, None] if nsp.size else nsp
        vec = l1_minimal(sol, nsp) if nsp.size else sol
        if vec is None:
            continue
        cand = poly_from_coeffs(variables, monos, rationalize(vec))
        if check(cand):
            return cand
    return None


def p_symbols(e: Expr) -> list:
    return sorted(s for s in e.free_symbols() if s.family == "p")


def split_by_p(e: Expr) -> dict:
    """Numerator grouped by momentum monomial: ``{p-monomial int: poly}``."""
    psids = {s.sid for s in p_symbols(e)}
    groups: dict = {}
    for m, c in e.num.items():
        pm = 0
        for sid, ex in S.decode(m):
            if sid in psids:
                pm += ex << (S.SLOT_BITS * sid)
        groups.setdefault(pm, {})[m - pm] = c
    return groups

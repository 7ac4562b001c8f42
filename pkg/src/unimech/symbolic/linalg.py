"""Fraction-free (Bareiss) elimination over expressions."""
from __future__ import annotations

from dataclasses import dataclass, field

from .expr import ONE, ZERO, Expr
from .zero import Sampler, is_zero


@dataclass
class LinearSolution:
    """Result of :func:`solve_linear`.

    ``solved`` maps pivot unknowns to expressions (possibly involving ``free``
    unknowns); ``conditions`` are right-hand sides that must vanish for the
    system to be consistent; ``pivots`` are the divisors used.
    """

    solved: dict = field(default_factory=dict)
    free: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    rank: int = 0
    pivots: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.conditions


def linear_coefficients(equations, unknowns):
    """Split each ``eq`` (affine in ``unknowns``) into a row of coefficients and ``-eq|0``."""
    zero = {u: ZERO for u in unknowns}
    rows, rhs = [], []
    for eq in equations:
        row = [eq.diff(u) for u in unknowns]
        for c in row:
            if any(s in zero for s in c.free_symbols()):
                raise ValueError(f"equation is not linear in the unknowns: {eq}")
        rows.append(row)
        rhs.append(-eq.subs(zero) if unknowns else -eq)
    return rows, rhs


def _nonzero(e: Expr, sampler, points=None) -> bool:
    if e.is_zero():
        return False
    return not is_zero(e, sampler, points).vanishes


def bareiss(matrix, sampler: Sampler | None = None, ncols: int | None = None, points=None):
    """Row-echelon form in place-free style; returns ``(rows, pivot_cols, sign)``.

    Only the first ``ncols`` columns are eligible as pivots (the rest ride along,
    as in an augmented matrix).  With ``points`` a pivot must be nonzero at
    those points, which keeps the elimination valid on a sampled submanifold.
    """
    sampler = sampler or Sampler()
    a = [list(r) for r in matrix]
    m = len(a)
    ncols = len(a[0]) if (a and ncols is None) else (ncols or 0)
    width = len(a[0]) if a else 0
    prev = ONE
    pivots = []
    sign = 1
    r = 0
    for c in range(ncols):
        if r >= m:
            break
        piv = next((i for i in range(r, m) if _nonzero(a[i][c], sampler, points)), None)
        if piv is None:
            for i in range(r, m):
                a[i][c] = ZERO
            continue
        if piv != r:
            a[r], a[piv] = a[piv], a[r]
            sign = -sign
        p = a[r][c]
        for i in range(r + 1, m):
            f = a[i][c]
            for j in range(c + 1, width):
                a[i][j] = (p * a[i][j] - f * a[r][j]) / prev
            a[i][c] = ZERO
        prev = p
        pivots.append(c)
        r += 1
    return a, pivots, sign


def determinant(matrix, sampler: Sampler | None = None) -> Expr:
    n = len(matrix)
    if n == 0:
        return ONE
    a, pivots, sign = bareiss(matrix, sampler)
    if len(pivots) < n:
        return ZERO
    return a[n - 1][n - 1] if sign > 0 else -a[n - 1][n - 1]


def solve_linear(equations, unknowns, sampler: Sampler | None = None, points=None) -> LinearSolution:
    """Solve an affine system ``equations == 0`` for ``unknowns``.

    ``points`` restricts pivot and consistency decisions to those samples.
    """
    sampler = sampler or Sampler()
    unknowns = list(unknowns)
    rows, rhs = linear_coefficients(equations, unknowns)
    aug = [row + [b] for row, b in zip(rows, rhs)]
    n = len(unknowns)
    if not aug:
        return LinearSolution(free=unknowns)
    a, pcols, _ = bareiss(aug, sampler, ncols=n, points=points)
    rank = len(pcols)
    conditions = [a[i][n] for i in range(rank, len(a)) if _nonzero(a[i][n], sampler, points)]
    free = [u for j, u in enumerate(unknowns) if j not in pcols]
    solved = {}
    for i in range(rank - 1, -1, -1):
        c = pcols[i]
        acc = a[i][n]
        for j in range(c + 1, n):
            coeff = a[i][j]
            if coeff.is_zero():
                continue
            u = unknowns[j]
            acc = acc - coeff * (solved[u] if u in solved else Expr.symbol(u))
        solved[unknowns[c]] = acc / a[i][c]
    pivots = [a[i][pcols[i]] for i in range(rank)]
    return LinearSolution(solved, free, conditions, rank, pivots)

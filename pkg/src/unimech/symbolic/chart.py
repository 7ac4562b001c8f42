"""Coordinate universe of a higher-order system and numeric points on it."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import symbols as S


@dataclass(frozen=True)
class ChartSpec:
    """Chart on W for configuration dimension ``n`` and Lagrangian order ``k``.

    Scalar charts (``n == 1``) use unsuffixed names (``q1``); vector charts use
    ``q1_A`` with ``A`` running from 1 to ``n``.
    """

    n: int
    k: int
    params: tuple = ()
    nonzero: frozenset = frozenset()
    bindings: tuple = ()

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("dim and order must be positive integers")
        unknown = set(self.nonzero) - set(self.params)
        if unknown:
            raise ValueError(f"nonzero() names undeclared parameters: {sorted(unknown)}")
        for name in self.params:
            S.param(name)
        # register the whole chart in canonical order so monomial packing, and
        # with it every floating-point summation order, never depends on the
        # order in which a computation first touches a symbol
        for i in range(2 * self.k + 1):
            for a in self.indices:
                S.q(i, a)
        for fam, lo, hi in (("p", 0, self.k), ("f", 0, self.k), ("F", self.k, 2 * self.k), ("G", 0, self.k)):
            for i in range(lo, hi):
                for a in self.indices:
                    S.indexed(fam, i, a)

    # indices ------------------------------------------------------------
    @property
    def indices(self) -> range:
        return range(0, 1) if self.n == 1 else range(1, self.n + 1)

    def q(self, i: int, a: int | None = None) -> S.Symbol:
        return S.q(i, self._idx(a))

    def p(self, i: int, a: int | None = None) -> S.Symbol:
        return S.p(i, self._idx(a))

    def unknown(self, family: str, i: int, a: int | None = None) -> S.Symbol:
        return S.indexed(family, i, self._idx(a))

    def _idx(self, a):
        if a is None:
            if self.n != 1:
                raise ValueError("vector chart needs a configuration index")
            return 0
        return a

    def qs(self, i: int) -> list:
        return [S.q(i, a) for a in self.indices]

    def ps(self, i: int) -> list:
        return [S.p(i, a) for a in self.indices]

    def param_symbols(self) -> list:
        return [S.param(name) for name in self.params]

    # coordinate lists -----------------------------------------------------
    def q_coordinates(self, top: int) -> list:
        """``q_0..q_top`` in chart order."""
        return [s for i in range(top + 1) for s in self.qs(i)]

    def p_coordinates(self) -> list:
        return [s for i in range(self.k) for s in self.ps(i)]

    def lagrangian_coordinates(self) -> list:
        """Coordinates of T^{2k-1}Q."""
        return self.q_coordinates(2 * self.k - 1)

    def hamiltonian_coordinates(self) -> list:
        """Coordinates of T*(T^{k-1}Q)."""
        return self.q_coordinates(self.k - 1) + self.p_coordinates()

    def w_coordinates(self) -> list:
        return self.lagrangian_coordinates() + self.p_coordinates()

    @property
    def w_dimension(self) -> int:
        return 3 * self.k * self.n

    def is_nonzero(self, name: str) -> bool:
        return name in self.nonzero

    def binding_map(self) -> dict:
        return dict(self.bindings)

    def with_bindings(self, values: dict) -> "ChartSpec":
        merged = dict(self.bindings)
        for name, v in values.items():
            if name not in self.params:
                raise ValueError(f"unknown parameter {name!r}")
            merged[name] = float(v)
        return ChartSpec(self.n, self.k, self.params, self.nonzero, tuple(sorted(merged.items())))

    def to_json(self) -> dict:
        return {
            "dim": self.n,
            "order": self.k,
            "params": list(self.params),
            "nonzero": sorted(self.nonzero),
            "bindings": dict(self.bindings),
        }


@dataclass
class NumericPoint:
    """Float values for coordinates (by symbol) and parameters (by name)."""

    coords: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def lookup(self, sym: S.Symbol):
        if sym.family == "param":
            return self.params.get(sym.name)
        return self.coords.get(sym)

    def with_coords(self, values: dict) -> "NumericPoint":
        c = dict(self.coords)
        c.update(values)
        return NumericPoint(c, dict(self.params))

    def vector(self, symbols: list) -> list:
        return [self.coords[s] for s in symbols]

    @staticmethod
    def from_names(values: dict, params: dict | None = None) -> "NumericPoint":
        return NumericPoint({S.symbol_from_name(k): float(v) for k, v in values.items()},
                            dict(params or {}))

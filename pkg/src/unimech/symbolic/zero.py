"""Zero testing: exact normal-form check backed by seeded numeric sampling."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import symbols as S
from .chart import NumericPoint
from .expr import Expr

DEFAULT_SEED = 0xC0FFEE


class ZeroVerdict(enum.Enum):
    PROVEN_ZERO = "proven-zero"
    PROVEN_NONZERO = "proven-nonzero"
    NUMERICALLY_ZERO = "numerically-zero"
    UNKNOWN = "unknown"

    @property
    def vanishes(self) -> bool:
        return self in (ZeroVerdict.PROVEN_ZERO, ZeroVerdict.NUMERICALLY_ZERO)


@dataclass(frozen=True)
class Sampler:
    """Seeded sampling policy; values are drawn from [-high,-low] U [low,high]."""

    seed: int = DEFAULT_SEED
    samples: int = 32
    low: float = 0.1
    high: float = 2.0
    tol: float = 1e-9
    retries: int = 64
    fixed: tuple = ()  # (name, value) pairs held constant, e.g. parameter bindings

    def rng(self, salt: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def draw(self, symbols, rng: np.random.Generator) -> NumericPoint:
        fixed = dict(self.fixed)
        coords, params = {}, {}
        for s in sorted(symbols):
            if s.name in fixed:
                v = fixed[s.name]
            else:
                v = rng.uniform(self.low, self.high) * (1.0 if rng.random() < 0.5 else -1.0)
            if s.family == "param":
                params[s.name] = float(v)
            else:
                coords[s] = float(v)
        return NumericPoint(coords, params)

    def points(self, symbols, count: int | None = None, salt: int = 0) -> list:
        rng = self.rng(salt)
        return [self.draw(symbols, rng) for _ in range(count or self.samples)]


@dataclass
class ZeroReport:
    verdict: ZeroVerdict
    evaluated: int = 0
    max_ratio: float = 0.0
    failures: int = 0
    witness: dict = field(default_factory=dict)


def zero_report(e: Expr, sampler: Sampler | None = None, points=None) -> ZeroReport:
    """Full report; ``points`` (NumericPoints) replaces random sampling when given."""
    sampler = sampler or Sampler()
    if e.is_zero():
        return ZeroReport(ZeroVerdict.PROVEN_ZERO)
    if e.is_constant():
        return ZeroReport(ZeroVerdict.PROVEN_NONZERO)
    syms = e.free_symbols()
    rng = sampler.rng(len(syms))
    evaluated = failures = 0
    worst = 0.0
    source = iter(points) if points is not None else None
    while evaluated < sampler.samples:
        if source is not None:
            pt = next(source, None)
            if pt is None:
                break
        else:
            if failures > sampler.retries:
                break
            pt = sampler.draw(syms, rng)
        try:
            val, scale = e.eval_with_scale(pt)
        except (ZeroDivisionError, ValueError, OverflowError):
            failures += 1
            continue
        if not np.isfinite(val) or not np.isfinite(scale):
            failures += 1
            continue
        evaluated += 1
        ratio = abs(val) / max(1.0, scale)
        worst = max(worst, ratio)
        if ratio > sampler.tol:
            wit = {s.name: v for s, v in pt.coords.items()}
            wit.update(pt.params)
            return ZeroReport(ZeroVerdict.PROVEN_NONZERO, evaluated, ratio, failures, wit)
    if evaluated == 0 or (source is None and evaluated < sampler.samples):
        return ZeroReport(ZeroVerdict.UNKNOWN, evaluated, worst, failures)
    return ZeroReport(ZeroVerdict.NUMERICALLY_ZERO, evaluated, worst, failures)


def is_zero(e: Expr, sampler: Sampler | None = None, points=None) -> ZeroVerdict:
    return zero_report(e, sampler, points).verdict


def nonzero_by_flags(e: Expr, nonzero_params) -> bool:
    """True when ``e`` is a nonzero constant times a product of flagged parameters."""
    if e.is_zero() or e.den:
        return False
    if len(e.num) != 1:
        return False
    ((m, _),) = e.num.items()
    for sid, _ in S.decode(m):
        sym = S.by_sid(sid)
        if sym.family != "param" or sym.name not in nonzero_params:
            return False
    return True

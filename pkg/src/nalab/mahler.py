"""Mahler expansions on Z_p and the difference-quotient calculus.

Functions are plain callables ``PAdic -> PAdic``; :class:`GridFunction`
wraps a finite table of samples so it can be used the same way.
Quotients are evaluated at a lifted working precision so that dividing
by small ``zeta`` does not eat into the requested digits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .padic import Ball, DomainError, PAdic

PFunc = Callable[[PAdic], PAdic]


@dataclass(frozen=True)
class MahlerExpansion:
    """f(x) = sum_m a_m * binom(x, m) on Z_p."""

    coefficients: tuple
    p: int
    prec: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: PAdic) -> PAdic:
        return mahler_evaluate(self, x)


def _as_padic(v, p, prec) -> PAdic:
    return v if isinstance(v, PAdic) else PAdic.from_value(v, p, prec)


def mahler_coefficients(samples: Sequence, p: int, prec: int | None = None) -> MahlerExpansion:
    """a_m = sum_k (-1)^(m-k) C(m,k) f(k) from the samples f(0), ..., f(M)."""
    if not samples:
        raise DomainError("need at least one sample")
    if prec is None:
        prec = min((s.prec for s in samples if isinstance(s, PAdic)), default=20)
    vals = [_as_padic(s, p, prec) for s in samples]
    coeffs = []
    for m in range(len(vals)):
        acc = PAdic.zero(p, prec)
        for k in range(m + 1):
            c = math.comb(m, k) * (-1 if (m - k) % 2 else 1)
            acc = acc + vals[k] * c
        coeffs.append(acc)
    return MahlerExpansion(tuple(coeffs), p, prec)


def binomial(x: PAdic, m: int) -> PAdic:
    """binom(x, m) for x in Z_p, from the integer representative of x."""
    if x.ord < 0:
        raise DomainError("binomial polynomials are evaluated on Z_p only")
    return PAdic.from_int(math.comb(x.integer_rep(), m), x.p, x.prec)


def mahler_evaluate(expansion: MahlerExpansion, x: PAdic) -> PAdic:
    if x.p != expansion.p:
        raise DomainError("prime mismatch")
    if x.ord < 0:
        raise DomainError("Mahler expansions are evaluated on Z_p only")
    prec = min(x.prec, expansion.prec)
    x = x.with_prec(prec)
    r = x.integer_rep()
    acc = PAdic.zero(x.p, prec)
    for m, a in enumerate(expansion.coefficients):
        b = math.comb(r, m)
        if b:
            acc = acc + a * b
    return acc


@dataclass
class GridFunction:
    """Finite sample table F: U -> Q_p over points of a ball ``domain``."""

    domain: Ball
    samples: Mapping[PAdic, PAdic] = field(default_factory=dict)
    resolution: int = 0

    def __post_init__(self):
        # samples are keyed by their class mod p^resolution inside the ball
        table = {}
        for x, y in self.samples.items():
            if not self.domain.contains(x):
                raise DomainError(f"sample point {x!r} lies outside {self.domain!r}")
            table[self._key(x)] = y
        self._table = table

    def _key(self, x: PAdic) -> int:
        # class of x - center in p^{-r} Z_p / p^resolution Z_p
        r = self.domain.radius_exp
        y = (x - self.domain.center) * self.domain.p ** r if r >= 0 else \
            (x - self.domain.center) / self.domain.p ** (-r)
        return y.residue(r + self.resolution) if not y.is_zero else 0

    def __call__(self, x: PAdic) -> PAdic:
        if not self.domain.contains(x):
            raise DomainError(f"{x!r} lies outside {self.domain!r}")
        try:
            return self._table[self._key(x)]
        except KeyError:
            raise DomainError(f"no sample for the class of {x!r}") from None


# ---------------------------------------------------------------------------
# difference quotients


def _work_prec(base: int, zetas: Iterable[PAdic], guard: int = 2) -> int:
    return base + sum(max(int(z.ord), 0) for z in zetas) + guard


def difference_quotient_1(f: PFunc, x: PAdic, h: PAdic, zeta: PAdic) -> PAdic:
    """{F(x + zeta h) - F(x)} / zeta."""
    return difference_quotient_n(f, x, [h], [zeta])


def _phi(f, x, hs, zetas):
    if not hs:
        return f(x)
    n = len(hs)
    upper = _phi(f, x + zetas[n - 1] * hs[n - 1], hs[:-1], zetas[:-1])
    lower = _phi(f, x, hs[:-1], zetas[:-1])
    return (upper - lower) / zetas[n - 1]


def difference_quotient_n(f: PFunc, x: PAdic, hs: Sequence[PAdic], zetas: Sequence[PAdic],
                          prec: int | None = None) -> PAdic:
    """Order-n partial difference quotient, defined recursively in the last direction."""
    if len(hs) != len(zetas):
        raise DomainError("need one zeta per direction")
    for h, z in zip(hs, zetas):
        if z.is_zero or h.is_zero:
            raise DomainError("difference quotients need zeta*h != 0")
    out_prec = prec if prec is not None else x.prec
    wp = _work_prec(out_prec, zetas)
    xs = x.with_prec(wp)
    hs = [h.with_prec(wp) for h in hs]
    zetas = [z.with_prec(wp) for z in zetas]
    return _phi(f, xs, list(hs), list(zetas)).with_prec(out_prec)


@dataclass(frozen=True)
class LambdaValue:
    """Element of the scalar extension, kept as real valuation plus unit part.

    magnitude = p**(-exponent); exponent may be fractional.
    """

    exponent: float
    unit: PAdic

    @property
    def magnitude(self) -> float:
        if self.exponent == math.inf:
            return 0.0
        return float(self.unit.p) ** (-self.exponent)


def j_b(zeta: PAdic, b: float) -> LambdaValue:
    """j_b(zeta) as (b * ord(zeta), unit part of zeta); j_1 is the identity."""
    if zeta.is_zero:
        raise DomainError("j_b(0) is the zero flag")
    unit = PAdic(zeta.p, 0, zeta.unit, zeta.prec)
    return LambdaValue(b * zeta.ord, unit)


def fractional_quotient(f: PFunc, x: PAdic, h: PAdic, zeta: PAdic, b: float,
                        prec: int | None = None) -> LambdaValue:
    """(F(x + zeta h) - F(x)) / j_b(zeta)."""
    if not 0 < b <= 1:
        raise DomainError("b must lie in (0, 1]")
    if zeta.is_zero or h.is_zero:
        raise DomainError("fractional quotient needs zeta*h != 0")
    out_prec = prec if prec is not None else x.prec
    wp = _work_prec(out_prec, [zeta])
    xs, hs, zs = x.with_prec(wp), h.with_prec(wp), zeta.with_prec(wp)
    diff = (f(xs + zs * hs) - f(xs)).with_prec(out_prec)
    return _divide_jb(diff, zeta.with_prec(out_prec), b)


def _divide_jb(diff: PAdic, zeta: PAdic, b: float) -> LambdaValue:
    jb = j_b(zeta, b)
    if diff.is_zero:
        return LambdaValue(math.inf, PAdic.zero(diff.p, diff.prec))
    unit = PAdic(diff.p, 0, diff.unit, diff.prec) / jb.unit
    return LambdaValue(diff.ord - jb.exponent, unit)


def difference_quotient(f: PFunc, x: PAdic, hs: Sequence[PAdic], zetas: Sequence[PAdic],
                        v: float, prec: int | None = None) -> LambdaValue:
    """Quotient of real order v = n + b, i.e. Phi^b(Phi^n F).

    Uses the first ``n`` directions for Phi^n and direction ``n`` (0-based)
    for the fractional step when b > 0.
    """
    n = int(math.floor(v))
    b = v - n
    need = n + (1 if b > 0 else 0)
    if len(hs) < need or len(zetas) < need:
        raise DomainError(f"order {v} needs {need} directions")
    out_prec = prec if prec is not None else x.prec
    if b == 0:
        val = difference_quotient_n(f, x, hs[:n], zetas[:n], prec=out_prec) if n else f(x)
        if val.is_zero:
            return LambdaValue(math.inf, val)
        return LambdaValue(val.ord, PAdic(val.p, 0, val.unit, val.prec))

    def inner(y):
        return difference_quotient_n(f, y, hs[:n], zetas[:n], prec=y.prec) if n else f(y)

    return fractional_quotient(inner, x, hs[n], zetas[n], b, prec=out_prec)


def ct_norm_estimate(f: PFunc, grid: Sequence[tuple], t: float) -> float:
    """Lower estimate of the C(t)-norm from sampled tuples (x, hs, zetas).

    Levels v in {0, 1, ..., [t]} and t itself are probed. For |zeta| <= 1
    the magnitude of Phi^{n+b} grows with b, so interior fractional
    levels never exceed these.
    """
    if not grid:
        raise DomainError("empty grid")
    if t < 0:
        raise DomainError("t must be nonnegative")
    levels = list(range(int(math.floor(t)) + 1))
    if t != math.floor(t):
        levels.append(t)
    best = 0.0
    for x, hs, zetas in grid:
        for v in levels:
            need = int(math.floor(v)) + (1 if v != math.floor(v) else 0)
            if len(hs) < need:
                continue
            best = max(best, difference_quotient(f, x, hs, zetas, v).magnitude)
    return best


@dataclass(frozen=True)
class DerivativeProbe:
    zetas: tuple
    estimates: tuple
    differences: tuple  # |estimate_{k+1} - estimate_k|
    converged: bool

    @property
    def limit(self) -> PAdic:
        return self.estimates[-1]


def derivative_probe(f: PFunc, x: PAdic, h: PAdic, depths: Sequence[int] = (1, 2, 3)) -> DerivativeProbe:
    """Probe Phi^1 F(x; h; zeta) at zeta = p^k for the extension at zeta = 0.

    Converged when successive differences shrink by a factor >= p.
    """
    p = x.p
    zetas = tuple(PAdic.from_int(p ** k, p, x.prec) for k in depths)
    ests = tuple(difference_quotient_1(f, x, h, z) for z in zetas)
    diffs = tuple((b - a).norm for a, b in zip(ests, ests[1:]))
    ok = all(d2 == 0 or (d1 > 0 and d1 / d2 >= p - 1e-12) for d1, d2 in zip(diffs, diffs[1:]))
    return DerivativeProbe(zetas, ests, diffs, ok)


def standard_grid(p: int, depth: int, n_dirs: int, zeta_depths: Sequence[int] = (1, 2),
                  prec: int = 20) -> list:
    """All x in Z_p / p^depth with h_i = 1 and zeta_i drawn from p^k."""
    one = PAdic.from_int(1, p, prec)
    grid = []
    for z in zeta_depths:
        zeta = PAdic.from_int(p ** z, p, prec)
        for i in range(p ** depth):
            grid.append((PAdic.from_int(i, p, prec), [one] * n_dirs, [zeta] * n_dirs))
    return grid


def amice_weight(m: int, t: float, p: int, depth: int = 2, prec: int = 20) -> float:
    """Estimated weight J(t, m) = ||binom(., m)||_{C(t, Z_p)} on a single chart."""
    n_dirs = int(math.ceil(t)) if t > 0 else 0
    grid = standard_grid(p, depth, max(n_dirs, 1), prec=prec)
    return ct_norm_estimate(lambda x: binomial(x, m), grid, t)

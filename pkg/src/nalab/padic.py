"""Truncated p-adic numbers, balls, the additive character and matrix exp/log.

Scalars (:class:`PAdic`) use a capped-relative model: an element is
``p**ord * unit`` with ``unit`` an integer in ``[1, p**prec)`` prime to ``p``.
Every operation is carried out on the exact integer representatives and the
result is truncated to ``prec`` significant digits, so arithmetic is
deterministic and norms are always exact.

Matrices (:class:`PMatrix`) live in ``M_d(Z_p)`` and use a capped-absolute
model: entries are integers modulo ``p**prec``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

DEFAULT_PRECISION = 20


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConvergenceError(DomainError):
    """A power series was requested outside its convergence domain."""


def valuation_int(n: int, p: int) -> float:
    """``ord_p`` of an integer; ``math.inf`` for 0."""
    if n == 0:
        return math.inf
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def _split(n: int, p: int) -> tuple[int, int]:
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v, n


@dataclass(frozen=True)
class PAdic:
    """Element of Q_p with ``prec`` significant base-p digits.

    ``ord`` is ``math.inf`` for the zero element (``unit`` is then 0).
    """

    p: int
    ord: float
    unit: int
    prec: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.p < 2:
            raise DomainError(f"p must be a prime >= 2, got {self.p}")
        if self.prec < 1:
            raise DomainError("precision must be positive")
        if self.unit == 0:
            if self.ord != math.inf:
                raise DomainError("zero unit requires ord = inf")
        else:
            if not 0 < self.unit < self.p ** self.prec or self.unit % self.p == 0:
                raise DomainError(f"invalid unit {self.unit} for p={self.p}, prec={self.prec}")

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, p: int, prec: int = DEFAULT_PRECISION) -> PAdic:
        return cls(p, math.inf, 0, prec)

    @classmethod
    def from_int(cls, n: int, p: int, prec: int = DEFAULT_PRECISION) -> PAdic:
        return padic_from_rational(n, 1, p, prec)

    @classmethod
    def from_value(cls, value, p: int, prec: int = DEFAULT_PRECISION) -> PAdic:
        """Coerce an int, Fraction, ``"a/b"`` string or PAdic."""
        if isinstance(value, PAdic):
            if value.p != p:
                raise DomainError("prime mismatch")
            return value.with_prec(prec)
        if isinstance(value, str):
            value = Fraction(value)
        if isinstance(value, int):
            return padic_from_rational(value, 1, p, prec)
        if isinstance(value, Fraction):
            return padic_from_rational(value.numerator, value.denominator, p, prec)
        raise TypeError(f"cannot build a p-adic number from {type(value).__name__}")

    @classmethod
    def _normalize(cls, p: int, ord_: int, n: int, prec: int) -> PAdic:
        # n is an exact integer, value = p**ord_ * n
        if n == 0:
            return cls(p, math.inf, 0, prec)
        v, u = _split(n, p)
        return cls(p, ord_ + v, u % p ** prec, prec)

    def with_prec(self, prec: int) -> PAdic:
        """Same truncated value at another precision (lifting pads zeros)."""
        if prec == self.prec:
            return self
        if self.is_zero:
            return PAdic.zero(self.p, prec)
        return PAdic(self.p, self.ord, self.unit % self.p ** prec, prec)

    # inspection ---------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.unit == 0

    @property
    def digits(self) -> tuple[int, ...]:
        """Base-p digits of the unit part, least significant first."""
        out = []
        u = self.unit
        for _ in range(self.prec):
            u, d = divmod(u, self.p)
            out.append(d)
        return tuple(out)

    @property
    def norm(self) -> float:
        return padic_norm(self)

    def is_integral(self) -> bool:
        return self.ord >= 0

    def to_fraction(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return Fraction(self.unit) * Fraction(self.p) ** int(self.ord)

    def integer_rep(self) -> int:
        """Nonnegative integer representative of an element of Z_p."""
        if self.is_zero:
            return 0
        if self.ord < 0:
            raise DomainError("element is not in Z_p")
        return self.unit * self.p ** int(self.ord)

    def residue(self, k: int) -> int:
        """Representative of the class of x in Z_p / p^k Z_p."""
        return self.integer_rep() % self.p ** k

    def agrees(self, other: PAdic, abs_digits: int) -> bool:
        """True when ``|self - other| <= p**(-abs_digits)``."""
        return (self - other).ord >= abs_digits

    def __repr__(self):
        if self.is_zero:
            return f"PAdic(0, p={self.p})"
        return f"PAdic({self.to_fraction()}, p={self.p}, prec={self.prec})"

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> PAdic | None:
        if isinstance(other, PAdic):
            if other.p != self.p:
                raise DomainError("cannot combine elements of different Q_p")
            return other
        if isinstance(other, (int, Fraction)):
            return PAdic.from_value(other, self.p, self.prec)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        prec = min(self.prec, other.prec)
        if self.is_zero:
            return other.with_prec(prec)
        if other.is_zero:
            return self.with_prec(prec)
        o = min(self.ord, other.ord)
        n = self.unit * self.p ** int(self.ord - o) + other.unit * self.p ** int(other.ord - o)
        # digits past absolute position o + prec are unknown; drop them before renormalizing
        return PAdic._normalize(self.p, int(o), n % self.p ** prec, prec)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero:
            return self
        return PAdic(self.p, self.ord, self.p ** self.prec - self.unit, self.prec)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        prec = min(self.prec, other.prec)
        if self.is_zero or other.is_zero:
            return PAdic.zero(self.p, prec)
        return PAdic(self.p, self.ord + other.ord, (self.unit * other.unit) % self.p ** prec, prec)

    __rmul__ = __mul__

    def inverse(self) -> PAdic:
        if self.is_zero:
            raise ZeroDivisionError("p-adic zero has no inverse")
        return PAdic(self.p, -self.ord, pow(self.unit, -1, self.p ** self.prec), self.prec)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        if self.is_zero:
            return PAdic.from_int(1, self.p, self.prec) if k == 0 else self
        return PAdic(self.p, self.ord * k, pow(self.unit, k, self.p ** self.prec), self.prec)


def padic_from_rational(numerator: int, denominator: int, p: int, N: int = DEFAULT_PRECISION) -> PAdic:
    """``numerator/denominator`` truncated to N significant digits."""
    if denominator == 0:
        raise DomainError("zero denominator")
    if not isinstance(numerator, int) or not isinstance(denominator, int):
        raise TypeError("numerator and denominator must be integers")
    if numerator == 0:
        return PAdic.zero(p, N)
    a, nu = _split(abs(numerator), p)
    b, du = _split(abs(denominator), p)
    sign = -1 if (numerator < 0) != (denominator < 0) else 1
    mod = p ** N
    unit = (sign * nu * pow(du, -1, mod)) % mod
    return PAdic(p, a - b, unit, N)


def padic_norm(x: PAdic) -> float:
    if x.is_zero:
        return 0.0
    return float(x.p) ** (-x.ord)


def j_b_norm(zeta: PAdic, b: float) -> float:
    """|j_b(zeta)| = |zeta|**b; j_1 is the identity."""
    if zeta.is_zero:
        raise DomainError("j_b is only represented for nonzero arguments")
    if not 0 < b <= 1:
        raise DomainError("b must lie in (0, 1]")
    return float(zeta.p) ** (-b * zeta.ord)


def frac_part(x: PAdic) -> Fraction:
    """Polar part sum_{k<0} d_k p^k of the expansion, in [0, 1)."""
    if x.is_zero or x.ord >= 0:
        return Fraction(0)
    k = int(-x.ord)
    return Fraction(x.unit % x.p ** k, x.p ** k)


def additive_character(x: PAdic) -> complex:
    """chi_1(x) = exp(2 pi i {x}_p)."""
    f = frac_part(x)
    if f == 0:
        return 1.0 + 0.0j
    return cmath.exp(2j * math.pi * f.numerator / f.denominator)


@dataclass(frozen=True)
class Ball:
    """Closed ball ``{x : |x - center| <= p**radius_exp}``."""

    center: PAdic
    radius_exp: int

    @property
    def p(self) -> int:
        return self.center.p

    @property
    def measure(self) -> float:
        """Haar measure with the unit ball normalized to 1."""
        return float(self.p) ** self.radius_exp

    def contains(self, x: PAdic) -> bool:
        return (x - self.center).ord >= -self.radius_exp

    def contains_ball(self, other: Ball) -> bool:
        return other.radius_exp <= self.radius_exp and self.contains(other.center)

    def disjoint(self, other: Ball) -> bool:
        return not (self.contains_ball(other) or other.contains_ball(self))

    def nested_or_disjoint(self, other: Ball) -> bool:
        # always true in an ultrametric space; kept as an executable check
        return self.contains_ball(other) or other.contains_ball(self) or (
            not self.contains(other.center) and not other.contains(self.center))


# ---------------------------------------------------------------------------
# matrices over Z_p


def _mat_mul(a, b, mod):
    n, k, m = len(a), len(b), len(b[0])
    return tuple(
        tuple(sum(a[i][t] * b[t][j] for t in range(k)) % mod for j in range(m))
        for i in range(n))


def _legendre(j: int, p: int) -> int:
    """v_p(j!)."""
    v = 0
    while j:
        j //= p
        v += j
    return v


@dataclass(frozen=True)
class PMatrix:
    """d x d matrix over Z_p with entries known modulo ``p**prec``."""

    p: int
    prec: int
    entries: tuple

    def __post_init__(self):
        mod = self.p ** self.prec
        rows = tuple(tuple(int(e) % mod for e in row) for row in self.entries)
        if any(len(r) != len(rows) for r in rows):
            raise DomainError("PMatrix must be square")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def identity(cls, d: int, p: int, prec: int = DEFAULT_PRECISION) -> PMatrix:
        return cls(p, prec, tuple(tuple(int(i == j) for j in range(d)) for i in range(d)))

    @classmethod
    def zeros(cls, d: int, p: int, prec: int = DEFAULT_PRECISION) -> PMatrix:
        return cls(p, prec, tuple((0,) * d for _ in range(d)))

    @classmethod
    def from_padics(cls, rows: Sequence[Sequence[PAdic]], prec: int | None = None) -> PMatrix:
        p = rows[0][0].p
        prec = prec if prec is not None else min(x.prec for r in rows for x in r)
        return cls(p, prec, tuple(tuple(x.residue(prec) for x in r) for r in rows))

    @property
    def d(self) -> int:
        return len(self.entries)

    @property
    def modulus(self) -> int:
        return self.p ** self.prec

    def entry(self, i: int, j: int) -> PAdic:
        return PAdic.from_int(self.entries[i][j], self.p, self.prec)

    def valuation(self) -> float:
        """min entry valuation, truncated at prec (inf for the zero matrix)."""
        v = min(valuation_int(e, self.p) for r in self.entries for e in r)
        return v if v < self.prec else math.inf

    @property
    def norm(self) -> float:
        v = self.valuation()
        return 0.0 if v == math.inf else float(self.p) ** (-v)

    def is_congruent_identity(self, k: int = 1) -> bool:
        """g = I mod p^k."""
        m = self.p ** k
        return all((e - (i == j)) % m == 0
                   for i, r in enumerate(self.entries) for j, e in enumerate(r))

    def reduce(self, k: int) -> tuple:
        m = self.p ** k
        return tuple(tuple(e % m for e in r) for r in self.entries)

    def with_prec(self, prec: int) -> PMatrix:
        return PMatrix(self.p, prec, self.entries)

    def _check(self, other: PMatrix) -> int:
        if other.p != self.p or other.d != self.d:
            raise DomainError("incompatible matrices")
        return min(self.prec, other.prec)

    def __matmul__(self, other: PMatrix) -> PMatrix:
        prec = self._check(other)
        return PMatrix(self.p, prec, _mat_mul(self.entries, other.entries, self.p ** prec))

    def __add__(self, other: PMatrix) -> PMatrix:
        prec = self._check(other)
        return PMatrix(self.p, prec, tuple(
            tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)))

    def __sub__(self, other: PMatrix) -> PMatrix:
        prec = self._check(other)
        return PMatrix(self.p, prec, tuple(
            tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)))

    def __neg__(self) -> PMatrix:
        return PMatrix(self.p, self.prec, tuple(tuple(-a for a in r) for r in self.entries))

    def scale(self, c) -> PMatrix:
        """Multiply by a scalar in Z_p (int or integral PAdic)."""
        if isinstance(c, PAdic):
            c = c.integer_rep()
        elif isinstance(c, Fraction):
            if c.denominator % self.p == 0:
                raise DomainError("scalar is not in Z_p")
            c = c.numerator * pow(c.denominator, -1, self.modulus)
        return PMatrix(self.p, self.prec, tuple(tuple(a * c for a in r) for r in self.entries))

    def bracket(self, other: PMatrix) -> PMatrix:
        return self @ other - other @ self

    def __repr__(self):
        return f"PMatrix(p={self.p}, prec={self.prec}, {list(map(list, self.entries))})"


def _exp_terms(p: int, N: int, v: int) -> tuple[int, int]:
    """(number of series terms, guard digits) for exp on matrices of valuation >= v."""
    # v_p(X^j/j!) >= j*v - (j-1)/(p-1), increasing in j for v >= 1, p odd
    j = 1
    while j * v - (j - 1) / (p - 1) < N:
        j += 1
    return j, _legendre(j, p)


def matrix_exp(X: PMatrix, N: int | None = None) -> PMatrix:
    """exp(X) = sum X^j/j! for X in p M_d(Z_p), p odd, exact modulo p^N."""
    p = X.p
    N = X.prec if N is None else min(N, X.prec)
    if p == 2:
        raise ConvergenceError("matrix_exp requires an odd prime")
    v = X.valuation()
    if v < 1:
        raise ConvergenceError(f"exp needs ||X|| <= 1/p, got ||X|| = {X.norm}")
    d = X.d
    if v == math.inf:
        return PMatrix.identity(d, p, N)
    J, guard = _exp_terms(p, N, int(v))
    W = N + guard
    mod = p ** W
    Xe = tuple(tuple(e % mod for e in r) for r in X.entries)
    power = tuple(tuple(int(i == j) for j in range(d)) for i in range(d))
    total = [[int(i == j) for j in range(d)] for i in range(d)]
    out_mod = p ** N
    for j in range(1, J):
        power = _mat_mul(power, Xe, mod)
        s, u = _split(math.factorial(j), p)
        inv = pow(u, -1, mod)
        div = p ** s
        for a in range(d):
            for b in range(d):
                total[a][b] += (power[a][b] // div) * inv
    return PMatrix(p, N, tuple(tuple(e % out_mod for e in r) for r in total))


def matrix_log(g: PMatrix, N: int | None = None) -> PMatrix:
    """log(g) = sum (-1)^{j+1} (g-I)^j / j for g = I mod p, p odd."""
    p = g.p
    N = g.prec if N is None else min(N, g.prec)
    if p == 2:
        raise ConvergenceError("matrix_log requires an odd prime")
    d = g.d
    Y = g - PMatrix.identity(d, p, g.prec)
    v = Y.valuation()
    if v < 1:
        raise ConvergenceError(f"log needs ||g - I|| <= 1/p, got {Y.norm}")
    if v == math.inf:
        return PMatrix.zeros(d, p, N)
    v = int(v)
    # v_p(Y^j/j) >= j*v - log_p(j); j - log_p j is increasing for p >= 3
    J = 1
    while J * v - math.log(J, p) < N:
        J += 1
    guard = int(math.log(J, p)) + 1
    W = N + guard
    mod = p ** W
    Ye = tuple(tuple(e % mod for e in r) for r in Y.entries)
    power = tuple(tuple(int(i == j) for j in range(d)) for i in range(d))
    total = [[0] * d for _ in range(d)]
    for j in range(1, J + 1):
        power = _mat_mul(power, Ye, mod)
        s, u = _split(j, p)
        coef = pow(u, -1, mod) * (1 if j % 2 else -1)
        div = p ** s
        for a in range(d):
            for b in range(d):
                total[a][b] += (power[a][b] // div) * coef
    out_mod = p ** N
    return PMatrix(p, N, tuple(tuple(e % out_mod for e in r) for r in total))


def matrix_from_ints(rows: Iterable[Iterable[int]], p: int, prec: int = DEFAULT_PRECISION) -> PMatrix:
    return PMatrix(p, prec, tuple(tuple(r) for r in rows))

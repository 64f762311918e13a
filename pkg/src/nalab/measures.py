"""One-dimensional measures on Q_p, their products, and quasi-invariance tools.

Two families are provided:

* :class:`QGaussianSpec` -- characteristic function ``exp(-beta |xi|^q)``
  times a character ``chi_gamma``.  The density is radial about ``gamma``
  and is summed in closed form over the dyadic shells of ``xi``.  It is
  conditioned on the support ball ``p^{-support} Z_p``.
* :class:`SecondTypeSpec` -- a step density ``sum_j C_j Ch_{B_j}`` over
  disjoint balls of radius >= 1, with an optional multiplicative
  perturbation ``h = eta * f`` on smaller balls.

Every 1-D measure exposes ``density(x)`` and ``ball_mass(center, radius_exp)``;
products are built per coordinate with a diagonal scaling ``x_k = v_k y_k``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .lattice import LatticeFunction, LatticeSpec, pd_c
from .padic import Ball, DomainError, PAdic

EPS_EQUIVALENT = 1e-3
EPS_ORTHOGONAL = 1e-8
TAIL_WINDOW = 10
TAIL_TOL = 1e-6


class CoverageWarning(UserWarning):
    """Density requested outside the region described by a spec."""


class AbsoluteContinuityError(DomainError):
    pass


def _ord(x: PAdic) -> float:
    return x.ord


# ---------------------------------------------------------------------------
# q-Gaussian


@dataclass(frozen=True)
class QGaussianSpec:
    """Measure with Fourier transform exp(-beta |xi|^q) chi_gamma(xi)."""

    p: int
    beta: float
    q: float
    gamma: PAdic | None = None
    support: int = 4
    prec: int = 20

    def __post_init__(self):
        if self.beta <= 0 or self.q <= 0:
            raise DomainError("beta and q must be positive")
        g = self.gamma if self.gamma is not None else PAdic.zero(self.p, self.prec)
        if g.p != self.p:
            raise DomainError("gamma lives in the wrong Q_p")
        object.__setattr__(self, "gamma", g)

    # shell weights -----------------------------------------------------
    def _t(self, k: int) -> float:
        return self.beta * float(self.p) ** (k * self.q)

    @cached_property
    def _k_star(self) -> int:
        # largest k with beta p^(kq) < 1
        k = math.floor(-math.log(self.beta, self.p) / self.q)
        while self._t(k) >= 1:
            k -= 1
        while self._t(k + 1) < 1:
            k += 1
        return k

    def _A(self, K: int) -> float:
        """sum_{k <= K} (1 - e_k) p^k (1 - 1/p), with e_k = exp(-beta p^(kq))."""
        p = float(self.p)
        acc = 0.0
        k = K
        while True:
            term = -math.expm1(-self._t(k)) * p ** k * (1 - 1 / p)
            acc += term
            if term <= 1e-19 * acc or term == 0.0:
                return acc
            k -= 1

    @cached_property
    def _S_inf(self) -> float:
        return self._S(math.inf)

    def _S(self, K) -> float:
        """sum_{k <= K} e_k p^k (1 - 1/p) = integral of exp(-beta|xi|^q) over |xi| <= p^K."""
        p = float(self.p)
        ks = self._k_star
        if K <= ks:
            return p ** K - self._A(int(K))
        acc = p ** ks - self._A(ks)
        k = ks + 1
        while k <= K:
            e = math.exp(-self._t(k))
            if e == 0.0:
                break
            acc += e * p ** k * (1 - 1 / p)
            k += 1
        return acc

    def radial_density(self, s) -> float:
        """Untruncated density at |x - gamma| = p^{-s} (s = inf at gamma)."""
        p = float(self.p)
        if s == math.inf:
            return self._S_inf
        s = int(s)
        if s + 1 <= self._k_star:
            return -math.expm1(-self._t(s + 1)) * p ** s - self._A(s)
        return self._S(s) - math.exp(-self._t(s + 1)) * p ** s

    def raw_ball_mass(self, s, e: int) -> float:
        """Untruncated mass of a ball of radius p^e whose center c has ord(gamma - c) = s."""
        p = float(self.p)
        if s < -e:
            return p ** e * self.radial_density(s)
        if -e <= self._k_star:
            # complement of a large ball: 1 - p^e A(-e) loses nothing here
            return 1.0 - p ** e * self._A(-e)
        return p ** e * self._S(-e)

    @cached_property
    def normalization(self) -> float:
        """Mass of the support ball under the untruncated measure."""
        return self.raw_ball_mass(_ord(self.gamma), self.support)

    def _in_support(self, x: PAdic) -> bool:
        return x.is_zero or x.ord >= -self.support

    def density(self, x: PAdic) -> float:
        if not self._in_support(x):
            return 0.0
        return self.radial_density(_ord(self.gamma - x)) / self.normalization

    def ball_mass(self, center: PAdic, radius_exp: int) -> float:
        if radius_exp >= self.support:
            if self._in_support(center):
                return 1.0
            return 0.0
        if not self._in_support(center):
            return 0.0
        return self.raw_ball_mass(_ord(self.gamma - center), radius_exp) / self.normalization

    def default_lattice(self) -> LatticeSpec:
        return LatticeSpec(self.p, self.support, 4)

    def cell_masses(self, lattice: LatticeSpec, shift: PAdic | None = None) -> np.ndarray:
        """Masses of every lattice cell (of the measure translated by ``shift``)."""
        return _cell_masses(self, lattice, shift)


def qgauss_density(spec: QGaussianSpec, x: PAdic) -> float:
    return spec.density(x)


# ---------------------------------------------------------------------------
# second type


@dataclass(frozen=True)
class SecondTypeSpec:
    """Step density sum_j C_j Ch_{B_j} with a perturbation table.

    ``balls`` lists (Ball, C_j) with radius_exp >= 0; the weights are
    rescaled so the total mass is 1.  ``perturbation`` lists (Ball, eta)
    with |eta| < 1; on such a ball the density is multiplied by 1 + eta.
    """

    p: int
    balls: tuple
    perturbation: tuple = ()

    def __post_init__(self):
        if not self.balls:
            raise DomainError("second-type spec needs at least one ball")
        balls = tuple((b, float(c)) for b, c in self.balls)
        pert = tuple((b, float(e)) for b, e in self.perturbation)
        for b, c in balls:
            if b.p != self.p:
                raise DomainError("ball lives in the wrong Q_p")
            if b.radius_exp < 0:
                raise DomainError("base balls need radius >= 1")
            if c <= 0:
                raise DomainError("weights must be positive")
        _check_disjoint([b for b, _ in balls])
        _check_disjoint([b for b, _ in pert])
        for b, eta in pert:
            if not abs(eta) < 1:
                raise DomainError("perturbation needs |eta| < 1")
            if not any(B.contains_ball(b) for B, _ in balls):
                raise DomainError(f"perturbation ball {b!r} is not inside a base ball")
        object.__setattr__(self, "balls", balls)
        object.__setattr__(self, "perturbation", pert)

    @cached_property
    def _total(self) -> float:
        return sum(c * b.measure for b, c in self.balls)

    @cached_property
    def delta(self) -> float:
        return max((abs(e) for _, e in self.perturbation), default=0.0)

    @cached_property
    def _z(self) -> float:
        # mass of f + h before renormalization
        return 1.0 + sum(e * self.base_density(b.center) * b.measure for b, e in self.perturbation)

    def base_density(self, x: PAdic) -> float:
        """f(x) without the perturbation (0 off the covered region)."""
        for b, c in self.balls:
            if b.contains(x):
                return c / self._total
        warnings.warn(f"{x!r} lies outside every listed ball", CoverageWarning, stacklevel=2)
        return 0.0

    def eta(self, x: PAdic) -> float:
        for b, e in self.perturbation:
            if b.contains(x):
                return e
        return 0.0

    def density(self, x: PAdic) -> float:
        f = self.base_density(x)
        if f == 0.0:
            return 0.0
        if not self.perturbation:
            return f
        return f * (1.0 + self.eta(x)) / self._z

    def ball_mass(self, center: PAdic, radius_exp: int) -> float:
        q = Ball(center, radius_exp)
        mass = 0.0
        for b, c in self.balls:
            mass += c / self._total * _overlap(q, b)
        if not self.perturbation:
            return mass
        for b, e in self.perturbation:
            ov = _overlap(q, b)
            if ov:
                mass += e * self.base_density(b.center) * ov
        return mass / self._z

    def default_lattice(self) -> LatticeSpec:
        m = max(max(b.radius_exp, -int(min(_ord(b.center), 0))) for b, _ in self.balls)
        n = max([0] + [-b.radius_exp for b, _ in self.perturbation])
        return LatticeSpec(self.p, m, n)

    def cell_masses(self, lattice: LatticeSpec, shift: PAdic | None = None) -> np.ndarray:
        return _cell_masses(self, lattice, shift)


def second_type_density(spec: SecondTypeSpec, x: PAdic) -> float:
    return spec.density(x)


def _overlap(a: Ball, b: Ball) -> float:
    if a.contains_ball(b):
        return b.measure
    if b.contains_ball(a):
        return a.measure
    return 0.0


def _check_disjoint(balls: Sequence[Ball]) -> None:
    for i, a in enumerate(balls):
        for b in balls[i + 1:]:
            if not a.disjoint(b):
                raise DomainError(f"balls {a!r} and {b!r} overlap")


OneDimMeasureSpec = Union[QGaussianSpec, SecondTypeSpec]


def _scaled_residue(x: PAdic, m: int, k: int) -> int | None:
    """x * p^m mod p^k, or None when x is not in p^{-m} Z_p."""
    if x.is_zero:
        return 0
    if x.ord < -m:
        return None
    return (x * x.p ** m).residue(k) if m >= 0 else (x / x.p ** (-m)).residue(k)


def _qgauss_cell_masses(spec: QGaussianSpec, lattice: LatticeSpec, shift: PAdic | None):
    # cell i is B(i/p^m - shift, p^-n); work with residues mod p^(m+n)
    m, n = lattice.m, lattice.n
    if -n >= spec.support:
        return None
    k = m + n
    sh = _scaled_residue(shift, m, k) if shift is not None else 0
    gs = _scaled_residue(spec.gamma + (shift if shift is not None else 0), m, k)
    if sh is None or gs is None:
        return None
    idx = np.arange(lattice.size, dtype=np.int64)
    vt = lattice.valuations()  # ord of i/p^m, huge for i = 0
    centers = (idx - sh) % lattice.size
    inside = vt[centers] >= -spec.support
    s = vt[(gs - idx) % lattice.size]
    out = np.zeros(lattice.size)
    for sv in np.unique(s[inside]):
        sel = inside & (s == sv)
        out[sel] = spec.raw_ball_mass(math.inf if sv >= n else int(sv), -n)
    return out / spec.normalization


def _cell_masses(spec, lattice: LatticeSpec, shift: PAdic | None) -> np.ndarray:
    if lattice.p != spec.p:
        raise DomainError("lattice and measure use different primes")
    if isinstance(spec, QGaussianSpec):
        fast = _qgauss_cell_masses(spec, lattice, shift)
        if fast is not None:
            return fast
    out = np.empty(lattice.size)
    for i in range(lattice.size):
        c = lattice.point(i, spec_prec(spec))
        if shift is not None and not shift.is_zero:
            c = c - shift
        out[i] = spec.ball_mass(c, -lattice.n)
    return out


def spec_prec(spec) -> int:
    return getattr(spec, "prec", 20)


# ---------------------------------------------------------------------------
# products


@dataclass(frozen=True)
class ProductMeasureSpec:
    """prod_k mu_k with coordinate k distributed as v_k * Y_k, Y_k ~ factors[k]."""

    factors: tuple
    scales: tuple
    shift: tuple | None = None

    def __post_init__(self):
        if len(self.factors) != len(self.scales):
            raise DomainError("need one scale per factor")
        if not self.factors:
            raise DomainError("empty product")
        for v in self.scales:
            if v.is_zero:
                raise DomainError("degenerate scaling (zero diagonal entry)")
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "scales", tuple(self.scales))

    @property
    def K(self) -> int:
        return len(self.factors)

    @property
    def p(self) -> int:
        return self.factors[0].p

    def factor_density(self, k: int, x: PAdic) -> float:
        v = self.scales[k]
        return self.factors[k].density(x / v) / v.norm

    def factor_ball_mass(self, k: int, center: PAdic, radius_exp: int) -> float:
        v = self.scales[k]
        return self.factors[k].ball_mass(center / v, radius_exp + int(v.ord))

    def _ratio(self, k: int, num: PAdic, den: PAdic) -> float:
        # the Jacobian 1/|v_k| cancels in every density ratio
        v = self.scales[k]
        d = self.factors[k].density(den / v)
        if d == 0.0:
            raise AbsoluteContinuityError(f"density of factor {k} vanishes at {den!r}")
        return self.factors[k].density(num / v) / d


def _truncation(spec: ProductMeasureSpec, K: int | None) -> int:
    K = spec.K if K is None else K
    if not 0 < K <= spec.K:
        raise DomainError(f"truncation K={K} outside 1..{spec.K}")
    return K


@dataclass(frozen=True)
class KakutaniReport:
    alphas: tuple
    partial_products: tuple
    verdict: str
    policy: str = (f"equivalent if product > {EPS_EQUIVALENT:g} and the last {TAIL_WINDOW} "
                   f"factors exceed 1 - {TAIL_TOL:g}; orthogonal if product < {EPS_ORTHOGONAL:g}")
    violations: tuple = ()

    @property
    def K(self) -> int:
        return len(self.alphas)

    def rows(self):
        return [(k + 1, a, pp) for k, (a, pp) in enumerate(zip(self.alphas, self.partial_products))]


def hellinger_affinity(m1: np.ndarray, m2: np.ndarray) -> float:
    """sum sqrt(m1 m2) for the normalized cell laws, clipped to [0, 1]."""
    s1, s2 = float(m1.sum()), float(m2.sum())
    if s1 <= 0 or s2 <= 0:
        return 0.0
    a = float(np.sqrt(m1 * m2).sum()) / math.sqrt(s1 * s2)
    return min(1.0, max(0.0, a))


def kakutani_affinity(mu, nu, lattice: LatticeSpec | None = None,
                      mu_shift: PAdic | None = None, nu_shift: PAdic | None = None) -> float:
    """Hellinger affinity of two 1-D measures from their exact lattice cell masses.

    ``mu_shift``/``nu_shift`` translate the measures before comparison.
    """
    lattice = lattice or nu.default_lattice()
    m1 = mu.cell_masses(lattice, mu_shift)
    m2 = nu.cell_masses(lattice, nu_shift)
    return hellinger_affinity(m1, m2)


def absolute_continuity_violations(m_mu: np.ndarray, m_nu: np.ndarray) -> np.ndarray:
    """Cell indices charged by mu but not by nu."""
    return np.flatnonzero((m_mu > 0) & (m_nu <= 0))


def _verdict(alphas: Sequence[float], partial: float) -> str:
    if partial < EPS_ORTHOGONAL:
        return "orthogonal"
    tail = alphas[-TAIL_WINDOW:]
    if partial > EPS_EQUIVALENT and all(a > 1 - TAIL_TOL for a in tail):
        return "equivalent"
    return "undecided-at-K"


def _covering_lattice(lat: LatticeSpec, c: PAdic) -> LatticeSpec:
    """Widen ``lat`` so the translate by ``c`` of its support is still inside."""
    if c.is_zero or c.ord >= -lat.m:
        return lat
    return LatticeSpec(lat.p, -int(c.ord), lat.n)


def kakutani_dichotomy(spec: ProductMeasureSpec, z: Sequence[PAdic], K: int | None = None,
                       lattices: Sequence[LatticeSpec] | None = None) -> KakutaniReport:
    """Affinities of mu_k(. - z_k) against mu_k, computed in the scaled coordinates z_k / v_k."""
    K = _truncation(spec, K)
    if len(z) < K:
        raise DomainError("shift vector shorter than K")
    alphas, partials, bad = [], [], []
    prod = 1.0
    cache: dict = {}
    for k in range(K):
        base = spec.factors[k]
        c = z[k] / spec.scales[k]
        lat = lattices[k] if lattices is not None else _covering_lattice(base.default_lattice(), c)
        key = (id(base), lat)
        if key not in cache:
            cache[key] = base.cell_masses(lat)
        m0 = cache[key]
        m1 = base.cell_masses(lat, c) if not c.is_zero else m0
        if len(absolute_continuity_violations(m1, m0)):
            bad.append(k + 1)
        a = hellinger_affinity(m1, m0)
        alphas.append(a)
        prod *= a
        partials.append(prod)
    return KakutaniReport(tuple(alphas), tuple(partials), _verdict(alphas, prod), violations=tuple(bad))


def quasi_invariance_factor(spec: ProductMeasureSpec, z: Sequence[PAdic], x: Sequence[PAdic],
                            K: int | None = None) -> float:
    """rho(z, x) = prod_{k <= K} d_k(x_k - z_k) / d_k(x_k)."""
    K = _truncation(spec, K)
    out = 1.0
    for k in range(K):
        out *= spec._ratio(k, x[k] - z[k], x[k])
    return out


def cocycle_residual(spec: ProductMeasureSpec, z, h, x, K: int | None = None) -> float:
    """|rho(z + h, x) - rho(z, x - h) rho(h, x)|."""
    K = _truncation(spec, K)
    zh = [a + b for a, b in zip(z[:K], h[:K])]
    xh = [a - b for a, b in zip(x[:K], h[:K])]
    lhs = quasi_invariance_factor(spec, zh, x, K)
    rhs = quasi_invariance_factor(spec, z, xh, K) * quasi_invariance_factor(spec, h, x, K)
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# pseudo-differentiability of measure curves


@dataclass(frozen=True)
class Cylinder:
    """Event {x : x_k in B_k for (k, B_k) in constraints}; other coordinates are free."""

    constraints: tuple

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple((int(k), b) for k, b in self.constraints))


def cylinder_mass(spec: ProductMeasureSpec, cyl: Cylinder, shift: Sequence[PAdic] | None = None) -> float:
    """mu(B - shift) for a cylinder B."""
    out = 1.0
    for k, b in cyl.constraints:
        c = b.center if shift is None else b.center - shift[k]
        out *= spec.factor_ball_mass(k, c, b.radius_exp)
    return out


def constancy_level(spec: ProductMeasureSpec, z: Sequence[PAdic], cyl: Cylinder) -> int:
    """Smallest n with r -> mu(B - r z) constant on cosets of p^n Z_p."""
    n = 0
    for k, b in cyl.constraints:
        if z[k].is_zero:
            continue
        n = max(n, -b.radius_exp - int(z[k].ord))
    return n


def measure_curve(spec: ProductMeasureSpec, z: Sequence[PAdic], cyl: Cylinder, level: int) -> LatticeFunction:
    """phi(r) = mu(B - r z) sampled on Z_p / p^level Z_p."""
    p = spec.p
    lat = LatticeSpec(p, 0, level)
    vals = np.empty(lat.size)
    for i in range(lat.size):
        r = PAdic.from_int(i, p, spec_prec(spec.factors[0]))
        vals[i] = cylinder_mass(spec, cyl, [r * zk for zk in z])
    return LatticeFunction(lat, vals)


def pd_of_measure(spec: ProductMeasureSpec, b: float, z: Sequence[PAdic], cyl: Cylinder,
                  level: int | None = None) -> complex:
    """PD_c(b, .) at r = 0 of r -> mu(S(-r, B)) with S(r, x) = x + r z.

    The curve is locally constant, so any level at or above
    :func:`constancy_level` gives the exact integral.
    """
    if b < 0:
        raise DomainError("b must be nonnegative")
    need = constancy_level(spec, z, cyl)
    if level is None:
        level = need
    if level < need:
        raise DomainError(f"level {level} cannot resolve the curve; need >= {need}")
    phi = measure_curve(spec, z, cyl, level)
    return pd_c(phi, b, 0)


# ---------------------------------------------------------------------------
# regular representation


def _shift(x, h, sign=-1):
    return tuple(a - b if sign < 0 else a + b for a, b in zip(x, h))


def regular_rep_operator(spec: ProductMeasureSpec, h: Sequence[PAdic], f: Callable, K: int | None = None):
    """T_h f(g) = rho(h, g)^{1/2} f(g - h) as a callable on points."""
    K = _truncation(spec, K)
    h = tuple(h[:K])

    def Tf(g):
        g = tuple(g[:K])
        return math.sqrt(quasi_invariance_factor(spec, h, g, K)) * f(_shift(g, h))

    return Tf


def regular_rep_apply(points: Sequence[Sequence[PAdic]], h: Sequence[PAdic], f: Callable,
                      spec: ProductMeasureSpec, K: int | None = None) -> np.ndarray:
    Tf = regular_rep_operator(spec, h, f, K)
    return np.array([Tf(g) for g in points], dtype=complex)


@dataclass(frozen=True)
class NormCheck:
    estimate: float
    standard_error: float
    reference: float

    @property
    def z_score(self) -> float:
        if self.standard_error == 0:
            return 0.0 if self.estimate == self.reference else math.inf
        return abs(self.estimate - self.reference) / self.standard_error


def unitarity_check(points, h, f, spec: ProductMeasureSpec, reference: float, K: int | None = None) -> NormCheck:
    """Monte-Carlo estimate of ||T_h f||^2 from points drawn from the product measure."""
    vals = np.abs(regular_rep_apply(points, h, f, spec, K)) ** 2
    n = len(vals)
    return NormCheck(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)), reference)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class ScaledSample:
    """Points x = values / p^shift, known modulo p^(digits - shift)."""

    p: int
    shift: int
    digits: int
    values: np.ndarray

    def to_padics(self, prec: int = 20) -> list:
        den = self.p ** self.shift if self.shift >= 0 else 1
        num_scale = self.p ** (-self.shift) if self.shift < 0 else 1
        out = []
        for v in self.values.tolist():
            x = PAdic.from_value(v * num_scale, self.p, prec)
            out.append(x if den == 1 else x / den)
        return out

    def cell_indices(self, lattice: LatticeSpec) -> np.ndarray:
        """Index of the lattice cell of every sample (shift must equal lattice.m)."""
        if self.shift != lattice.m:
            raise DomainError("sample and lattice use different supports")
        return self.values % lattice.size


MAX_DIGITS = {2: 60, 3: 37, 5: 26, 7: 21}


def _max_digits(p: int) -> int:
    return MAX_DIGITS.get(p, int(62 / math.log2(p)))


def _uniform_digits(rng: np.random.Generator, p: int, k: int, n: int) -> np.ndarray:
    if k <= 0:
        return np.zeros(n, dtype=np.int64)
    return rng.integers(0, p ** k, size=n, dtype=np.int64)


def sample_qgauss(spec: QGaussianSpec, n: int, rng: np.random.Generator,
                  lattice: LatticeSpec | None = None, tail_digits: int = 8) -> ScaledSample:
    """Inverse-CDF over lattice cells, then uniform digits below the cell resolution."""
    lattice = lattice or spec.default_lattice()
    masses = cached_cell_masses(spec, lattice)
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(n), side="right")
    cells = np.minimum(cells, lattice.size - 1).astype(np.int64)
    digits = min(lattice.m + lattice.n + tail_digits, _max_digits(spec.p))
    tail = _uniform_digits(rng, spec.p, digits - lattice.m - lattice.n, n)
    return ScaledSample(spec.p, lattice.m, digits, cells + lattice.size * tail)


_MASS_CACHE: dict = {}


def cached_cell_masses(spec, lattice: LatticeSpec) -> np.ndarray:
    key = (spec, lattice)
    if key not in _MASS_CACHE:
        m = spec.cell_masses(lattice)
        m.setflags(write=False)
        _MASS_CACHE[key] = m
    return _MASS_CACHE[key]


def sample_second_type(spec: SecondTypeSpec, n: int, rng: np.random.Generator,
                       tail_digits: int = 8) -> ScaledSample:
    """Pick a ball by mass, draw uniform digits inside it, accept with (1 + eta)/(1 + delta)."""
    p = spec.p
    shift = max([0] + [-int(_ord(b.center)) for b, _ in spec.balls if not b.center.is_zero]
                + [b.radius_exp for b, _ in spec.balls])
    finest = max([0] + [-b.radius_exp for b, _ in spec.perturbation])
    digits = min(shift + finest + tail_digits, _max_digits(p))
    mod = p ** digits

    def scaled(c: PAdic) -> int:
        if c.is_zero:
            return 0
        return (c * p ** shift).residue(digits)

    weights = np.array([c * b.measure for b, c in spec.balls])
    weights /= weights.sum()
    centers = np.array([scaled(b.center) for b, _ in spec.balls], dtype=np.int64)
    steps = np.array([p ** (shift - b.radius_exp) for b, _ in spec.balls], dtype=np.int64)
    pert = [(scaled(b.center), p ** (shift - b.radius_exp), e) for b, e in spec.perturbation]
    out = np.empty(0, dtype=np.int64)
    while len(out) < n:
        m = max(2 * (n - len(out)), 16)
        j = rng.choice(len(weights), size=m, p=weights)
        u = rng.integers(0, mod // steps[j], dtype=np.int64)
        x = (centers[j] + steps[j] * u) % mod
        if pert:
            eta = np.zeros(m)
            for c, step, e in pert:
                eta[(x - c) % step == 0] = e
            keep = rng.random(m) < (1 + eta) / (1 + spec.delta)
            x = x[keep]
        out = np.concatenate([out, x])
    return ScaledSample(p, shift, digits, out[:n])


def sample_measure(spec, n: int, rng: np.random.Generator, **kw) -> ScaledSample:
    if isinstance(spec, QGaussianSpec):
        return sample_qgauss(spec, n, rng, **kw)
    if isinstance(spec, SecondTypeSpec):
        return sample_second_type(spec, n, rng, **kw)
    raise TypeError(f"cannot sample {type(spec).__name__}")


def sample_product(spec: ProductMeasureSpec, n: int, seed: int, prec: int = 20) -> list:
    """n points of the product measure, each a K-tuple of PAdic (x_k = v_k y_k)."""
    streams = np.random.SeedSequence(seed).spawn(spec.K)
    cols = []
    for k, (base, ss) in enumerate(zip(spec.factors, streams)):
        ys = sample_measure(base, n, np.random.Generator(np.random.PCG64(ss))).to_padics(prec)
        v = spec.scales[k]
        cols.append([y * v for y in ys])
    return [tuple(col[i] for col in cols) for i in range(n)]


# ---------------------------------------------------------------------------
# JSON specs


def parse_padic(value, p: int, prec: int = 20) -> PAdic:
    return PAdic.from_value(value, p, prec)


def measure_from_dict(obj: dict, p: int | None = None, prec: int = 20):
    p = int(obj.get("p", p))
    kind = obj["type"]
    if kind == "qgauss":
        return QGaussianSpec(p, float(obj["beta"]), float(obj["q"]),
                             parse_padic(obj.get("gamma", 0), p, prec),
                             int(obj.get("support", 4)), prec)
    if kind == "second_type":
        balls = tuple((Ball(parse_padic(b["center"], p, prec), int(b["radius_exp"])), float(b["weight"]))
                      for b in obj["balls"])
        pert = tuple((Ball(parse_padic(b["center"], p, prec), int(b["radius_exp"])), float(b["eta"]))
                     for b in obj.get("perturbation", []))
        return SecondTypeSpec(p, balls, pert)
    raise DomainError(f"unknown measure type {kind!r}")


def product_from_dict(obj: dict, p: int | None = None, prec: int = 20) -> ProductMeasureSpec:
    p = int(obj.get("p", p))
    K = int(obj["K"])
    factors = obj.get("factors") or [obj["factor"]] * K
    specs = tuple(measure_from_dict(f, p, prec) for f in factors)
    scales = obj.get("scales")
    if scales is None:
        ratio = parse_padic(obj.get("scale_ratio", p), p, prec)
        scales = [ratio ** k for k in range(K)]
    else:
        scales = [parse_padic(v, p, prec) for v in scales]
    if len(specs) != K or len(scales) != K:
        raise DomainError("factors and scales must have K entries")
    return ProductMeasureSpec(specs, tuple(scales))


__all__ = [
    "QGaussianSpec", "SecondTypeSpec", "ProductMeasureSpec", "KakutaniReport", "Cylinder",
    "qgauss_density", "second_type_density", "kakutani_affinity", "kakutani_dichotomy",
    "quasi_invariance_factor", "cocycle_residual", "pd_of_measure", "regular_rep_apply",
    "regular_rep_operator", "unitarity_check", "sample_measure", "sample_product",
    "measure_from_dict", "product_from_dict", "cylinder_mass", "measure_curve",
    "constancy_level", "hellinger_affinity", "CoverageWarning", "AbsoluteContinuityError",
]

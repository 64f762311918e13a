"""Harmonic analysis on the finite quotients p^{-m} Z_p / p^n Z_p.

A :class:`LatticeFunction` on ``LatticeSpec(p, m, n)`` is supported on
``p^{-m} Z_p`` and constant on cosets of ``p^n Z_p``.  Index ``i`` stands for
the coset of ``x_i = i / p^m``, i.e. the digits of ``i`` are the p-adic digits
``d_{-m}, ..., d_{n-1}`` of the representative.

The Haar measure gives the unit ball mass 1, so every coset has mass p^{-n}.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .padic import DomainError, PAdic, padic_from_rational


@dataclass(frozen=True)
class LatticeSpec:
    p: int
    m: int
    n: int

    def __post_init__(self):
        if self.m + self.n < 0:
            raise DomainError("lattice needs m + n >= 0")

    @property
    def size(self) -> int:
        return self.p ** (self.m + self.n)

    @property
    def cell_measure(self) -> float:
        return float(self.p) ** (-self.n)

    @property
    def dual(self) -> LatticeSpec:
        return LatticeSpec(self.p, self.n, self.m)

    def point(self, i: int, prec: int = 20) -> PAdic:
        if self.m >= 0:
            return padic_from_rational(i, self.p ** self.m, self.p, prec)
        return padic_from_rational(i * self.p ** (-self.m), 1, self.p, prec)

    def index(self, x: PAdic) -> int:
        """Index of the coset containing x (x must lie in p^{-m} Z_p)."""
        if x.is_zero:
            return 0
        if x.ord < -self.m:
            raise DomainError(f"{x!r} lies outside p^-{self.m} Z_p")
        y = x * Fraction(self.p ** self.m) if self.m >= 0 else x / self.p ** (-self.m)
        return y.residue(self.m + self.n)

    def norms(self) -> np.ndarray:
        """|x_i| for every index, with the zero coset reported as 0."""
        return _norm_table(self.p, self.m, self.n)

    def valuations(self) -> np.ndarray:
        """ord_p of the representative i/p^m (a large sentinel for index 0)."""
        return _val_table(self.p, self.m + self.n) - self.m


@lru_cache(maxsize=64)
def _val_table(p: int, k: int) -> np.ndarray:
    size = p ** k
    v = np.zeros(size, dtype=np.int64)
    idx = np.arange(size)
    step = p
    for _ in range(k):
        v += (idx % step == 0)
        step *= p
    v[0] = 10 ** 6
    v.setflags(write=False)
    return v


@lru_cache(maxsize=64)
def _norm_table(p: int, m: int, n: int) -> np.ndarray:
    v = _val_table(p, m + n) - m
    out = np.power(float(p), -v.astype(float))
    out[0] = 0.0
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    spec: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.spec.size,):
            raise DomainError(f"expected {self.spec.size} values, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, spec: LatticeSpec, fn, prec: int = 20) -> LatticeFunction:
        return cls(spec, np.array([fn(spec.point(i, prec)) for i in range(spec.size)], dtype=complex))

    @classmethod
    def indicator_ball(cls, spec: LatticeSpec, radius_exp: int) -> LatticeFunction:
        """Ch of the ball {|x| <= p^radius_exp} around 0."""
        norms = spec.norms()
        return cls(spec, (norms <= float(spec.p) ** radius_exp + 1e-300).astype(complex))

    def __call__(self, x: PAdic) -> complex:
        if not x.is_zero and x.ord < -self.spec.m:
            return 0.0j
        return complex(self.values[self.spec.index(x)])

    def reflect(self) -> LatticeFunction:
        """x -> f(-x)."""
        idx = (-np.arange(self.spec.size)) % self.spec.size
        return LatticeFunction(self.spec, self.values[idx])

    def __add__(self, other: LatticeFunction) -> LatticeFunction:
        return LatticeFunction(self.spec, self.values + other.values)

    def __sub__(self, other: LatticeFunction) -> LatticeFunction:
        return LatticeFunction(self.spec, self.values - other.values)

    def __mul__(self, c) -> LatticeFunction:
        return LatticeFunction(self.spec, self.values * c)

    __rmul__ = __mul__


def haar_integral(f: LatticeFunction) -> complex:
    return complex(f.spec.cell_measure * f.values.sum())


def inner_product(f: LatticeFunction, g: LatticeFunction) -> complex:
    """(f, g) = integral f * conj(g)."""
    return complex(f.spec.cell_measure * np.vdot(g.values, f.values))


def fourier(f: LatticeFunction) -> LatticeFunction:
    """F[f](xi) = integral f(y) chi_1(xi y) dy, returned on the dual lattice."""
    spec = f.spec
    # chi_1(xi_j y_i) = exp(2 pi i ij / p^(m+n)): a positive-sign DFT
    vals = np.fft.ifft(f.values) * (spec.size * spec.cell_measure)
    return LatticeFunction(spec.dual, vals)


def inverse_fourier(g: LatticeFunction) -> LatticeFunction:
    """F^{-1}[g](x) = integral g(xi) chi_1(-x xi) dxi."""
    spec = g.spec
    vals = np.fft.fft(g.values) * spec.cell_measure
    return LatticeFunction(spec.dual, vals)


def _abs_power(norms: np.ndarray, b) -> np.ndarray:
    out = np.zeros(norms.shape, dtype=complex)
    nz = norms > 0
    out[nz] = np.exp(b * np.log(norms[nz]))
    return out


def vladimirov_multiplier(f: LatticeFunction, b) -> LatticeFunction:
    """D^b f = F^{-1}[|xi|^b F[f]] with |0|^b := 0 on the zero coset.

    Complex b is accepted (|xi|^b = exp(b log|xi|)).
    """
    if np.real(b) <= 0:
        raise DomainError("b must have positive real part")
    g = fourier(f)
    mult = _abs_power(g.spec.norms(), b)
    return inverse_fourier(LatticeFunction(g.spec, g.values * mult))


def vladimirov_constant(p: int, b: float) -> float:
    """c_b with D^b = c_b * PD(b, .): (p^b - 1) / (1 - p^(-1-b))."""
    return (p ** b - 1.0) / (1.0 - p ** (-1.0 - b))


def zero_mode_constant(spec: LatticeSpec, b: float) -> float:
    """integral of |xi|^b over |xi| <= p^{-m}: the part |0|^b := 0 discards."""
    p, m = spec.p, spec.m
    return p ** (-m * (1.0 + b)) * (1.0 - 1.0 / p) / (1.0 - p ** (-1.0 - b))


def exterior_tail(spec: LatticeSpec, b: float) -> float:
    """integral of |y|^{-1-b} over |y| > p^m."""
    p, m = spec.p, spec.m
    return (1.0 - 1.0 / p) * p ** (-(m + 1) * b) / (1.0 - p ** (-b))


def _kernel_matrix(spec: LatticeSpec, b: float) -> np.ndarray:
    size = spec.size
    idx = np.arange(size)
    diff = (idx[:, None] - idx[None, :]) % size
    dist = spec.norms()[diff]
    with np.errstate(divide="ignore"):
        k = np.where(dist > 0, np.power(np.where(dist > 0, dist, 1.0), -1.0 - b), 0.0)
    return k * spec.cell_measure


def _kernel_row(spec: LatticeSpec, b: float, i: int) -> np.ndarray:
    diff = (i - np.arange(spec.size)) % spec.size
    dist = spec.norms()[diff]
    out = np.zeros(spec.size)
    nz = dist > 0
    out[nz] = dist[nz] ** (-1.0 - b) * spec.cell_measure
    return out


def _as_index(spec: LatticeSpec, x) -> int:
    if isinstance(x, PAdic):
        return spec.index(x)
    i = int(x)
    if not 0 <= i < spec.size:
        raise DomainError(f"lattice index {i} out of range")
    return i


def pd_kernel(f: LatticeFunction, b: float, x) -> complex:
    """PD(b, f)(x) = integral (f(x) - f(y)) |x - y|^{-1-b} dy over Q_p.

    f is extended by zero outside p^{-m} Z_p; the exterior contributes
    f(x) times an exact geometric tail.  Cosets never straddle the
    diagonal, so the lattice sum is exact for lattice functions.
    """
    if b <= 0:
        raise DomainError("pd_kernel needs b > 0")
    spec = f.spec
    i = _as_index(spec, x)
    row = _kernel_row(spec, b, i)
    fx = f.values[i]
    inner = np.sum((fx - f.values) * row)
    return complex(inner + fx * exterior_tail(spec, b))


def pd_kernel_all(f: LatticeFunction, b: float) -> LatticeFunction:
    """pd_kernel at every lattice point."""
    if b <= 0:
        raise DomainError("pd_kernel needs b > 0")
    spec = f.spec
    if spec.size <= 2048:
        k = _kernel_matrix(spec, b)
        inner = f.values * k.sum(axis=1) - k @ f.values
    else:
        inner = np.array([np.sum((f.values[i] - f.values) * _kernel_row(spec, b, i))
                          for i in range(spec.size)])
    return LatticeFunction(spec, inner + f.values * exterior_tail(spec, b))


def vladimirov_kernel(f: LatticeFunction, b: float) -> LatticeFunction:
    """Kernel form of the lattice operator computed by vladimirov_multiplier.

    The multiplier drops the zero coset of the dual lattice, where F[f]
    equals the total integral; that piece is an exact constant on the
    support, so c_b * PD(b, f) - (integral f) * zero_mode_constant matches
    the multiplier form pointwise.
    """
    pd = pd_kernel_all(f, b)
    shift = haar_integral(f) * zero_mode_constant(f.spec, b)
    return LatticeFunction(f.spec, vladimirov_constant(f.spec.p, b) * pd.values - shift)


def _unit_ball_mask(spec: LatticeSpec) -> np.ndarray:
    if spec.m < 0 or spec.n < 0:
        raise DomainError("pd_c needs the unit ball to be a union of cells (m, n >= 0)")
    return spec.norms() <= 1.0


def pd_c(f: LatticeFunction, b: float, x) -> complex:
    """PD_c(b, f)(x): the PD integral restricted to y in B(0, 1)."""
    if b < 0:
        raise DomainError("pd_c needs b >= 0")
    spec = f.spec
    i = _as_index(spec, x)
    mask = _unit_ball_mask(spec)
    row = _kernel_row(spec, b, i)
    return complex(np.sum(((f.values[i] - f.values) * row)[mask]))


def exterior_shell_sum(f: LatticeFunction, b: float, x) -> complex:
    """integral over |y| > 1 of (f(x) - f(y)) |x - y|^{-1-b}, f zero outside the lattice."""
    spec = f.spec
    i = _as_index(spec, x)
    mask = ~_unit_ball_mask(spec)
    row = _kernel_row(spec, b, i)
    inner = np.sum(((f.values[i] - f.values) * row)[mask])
    return complex(inner + f.values[i] * exterior_tail(spec, b))


# ---------------------------------------------------------------------------
# Riesz-type character integral


@dataclass(frozen=True)
class RieszCheck:
    lattice_value: float
    closed_form: float
    tail_bound: float

    @property
    def error(self) -> float:
        return abs(self.lattice_value - self.closed_form)


def riesz_closed_form(p: int, n: int, q: float, y_norm: float) -> float:
    return (1.0 - p ** (n * q)) / (1.0 - p ** (-n * (q + 1.0))) * y_norm ** (-n * (q + 1.0))


def _ball_character_sum(p: int, k: int, cutoff: int, y: PAdic) -> float:
    """Lattice sum for integral over |x| <= p^k of chi_1(y x) in one coordinate.

    x runs over p^{-k} Z_p / p^cutoff Z_p; each coset has mass p^{-cutoff}.
    """
    count = p ** (k + cutoff)
    if y.is_zero:
        return count * float(p) ** (-cutoff)
    # y * (i / p^k): the character depends on i modulo p^(k - ord y) only
    e = k - int(y.ord)
    if e <= 0:
        return count * float(p) ** (-cutoff)
    den = p ** e
    u = y.unit % den
    i = np.arange(min(count, den), dtype=np.int64)
    phases = np.exp(2j * np.pi * ((i * u) % den) / den)
    reps = count // len(i) if count >= den else 1
    total = phases.sum() * reps
    return float(total.real) * float(p) ** (-cutoff)


def riesz_integral_check(n: int, q: float, y, cutoff: int, p: int | None = None) -> RieszCheck:
    """Lattice evaluation of integral over Q_p^n of |x|^{nq} chi_1(y . x) dx.

    ``|x|`` is the sup norm on Q_p^n and ``y`` is a PAdic (placed in the first
    coordinate) or a sequence of n PAdics.  Shells |x| = p^k for -cutoff < k <=
    cutoff are summed, each shell's character integral being evaluated by an
    explicit character sum on the lattice p^{-cutoff} Z_p / p^{cutoff} Z_p;
    the inner ball |x| <= p^{-cutoff} is dropped and bounded by ``tail_bound``.
    Shells far beyond 1/|y| cancel exactly, so no summation acceleration is needed.
    """
    if n < 1 or q <= 0:
        raise DomainError("need n >= 1 and q > 0")
    if isinstance(y, PAdic):
        ys = [y] + [PAdic.zero(y.p, y.prec)] * (n - 1)
    else:
        ys = list(y)
    if len(ys) != n:
        raise DomainError("y must have n coordinates")
    p = ys[0].p if p is None else p
    if all(c.is_zero for c in ys):
        raise DomainError("the character integral diverges at y = 0")
    y_norm = max(c.norm for c in ys)
    if y_norm * float(p) ** cutoff < p:
        raise DomainError("cutoff too small to reach the cancelling shells")

    def ball(k):
        out = 1.0
        for c in ys:
            out *= _ball_character_sum(p, k, cutoff, c)
        return out

    total = 0.0
    prev = ball(-cutoff)
    for k in range(-cutoff + 1, cutoff + 1):
        cur = ball(k)
        total += (float(p) ** (k * n * q)) * (cur - prev)
        prev = cur
    a = n * (1.0 + q)
    tail = (1.0 - float(p) ** (-n)) * float(p) ** (-cutoff * a) / (1.0 - float(p) ** (-a))
    return RieszCheck(total, riesz_closed_form(p, n, q, y_norm), tail)


# ---------------------------------------------------------------------------
# serialization


def save_lattice_function(f: LatticeFunction, path) -> None:
    """CSV (digit-index, real, imag) preceded by a ``# {json header}`` line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# " + json.dumps({"p": f.spec.p, "m": f.spec.m, "n": f.spec.n}) + "\n")
        w = csv.writer(fh)
        w.writerow(["digit_index", "real", "imag"])
        for i, v in enumerate(f.values):
            w.writerow([i, repr(float(v.real)), repr(float(v.imag))])


def load_lattice_function(path) -> LatticeFunction:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError("missing JSON header line")
        head = json.loads(first[1:])
        spec = LatticeSpec(int(head["p"]), int(head["m"]), int(head["n"]))
        rows = list(csv.DictReader(fh))
    vals = np.zeros(spec.size, dtype=complex)
    for r in rows:
        vals[int(r["digit_index"])] = complex(float(r["real"]), float(r["imag"]))
    return LatticeFunction(spec, vals)


def random_lattice_function(spec: LatticeSpec, rng: np.random.Generator, mean_zero: bool = False) -> LatticeFunction:
    vals = rng.normal(size=spec.size) + 1j * rng.normal(size=spec.size)
    if mean_zero:
        vals -= vals.mean()
    return LatticeFunction(spec, vals)


def boundary_shell(spec: LatticeSpec) -> int:
    """Outermost sphere exponent |x| = p^m, where zero extension is felt first."""
    return spec.m


__all__ = [
    "LatticeSpec", "LatticeFunction", "haar_integral", "inner_product", "fourier",
    "inverse_fourier", "vladimirov_multiplier", "vladimirov_kernel", "vladimirov_constant",
    "pd_kernel", "pd_kernel_all", "pd_c", "exterior_shell_sum", "riesz_integral_check",
    "riesz_closed_form", "RieszCheck", "save_lattice_function", "load_lattice_function",
    "random_lattice_function", "zero_mode_constant", "exterior_tail", "boundary_shell",
]

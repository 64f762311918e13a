"""Brute-force reference implementations used to freeze expected values.

Nothing here calls into the FFT, shell closed forms or exp-series code of
the package; values are built from exact fractions and direct sums.
"""
import cmath
import math
from fractions import Fraction

import numpy as np


def vp(n: int, p: int) -> int:
    if n == 0:
        return 10 ** 9
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_frac(x: Fraction, p: int) -> int:
    if x == 0:
        return 10 ** 9
    return vp(x.numerator, p) - vp(x.denominator, p)


def frac_part(x: Fraction, p: int) -> Fraction:
    """{x}_p for x whose denominator is a power of p times a unit."""
    x = Fraction(x)
    k = vp(x.denominator, p)
    if k == 0:
        return Fraction(0)
    pk = p ** k
    u = x.denominator // pk
    # x = a / (pk u); modulo Z_p the class is a * u^{-1} / pk
    a = x.numerator * pow(u, -1, pk) % pk
    return Fraction(a, pk)


def chi(x: Fraction, p: int) -> complex:
    f = frac_part(x, p)
    return cmath.exp(2j * math.pi * f)


def lattice_points(p: int, m: int, n: int):
    return [Fraction(i, p ** m) for i in range(p ** (m + n))]


def fourier_direct(values, p: int, m: int, n: int):
    """F[f](xi) = p^{-n} sum_y f(y) chi(xi y), xi on the dual lattice (n, m)."""
    ys = lattice_points(p, m, n)
    xis = lattice_points(p, n, m)
    out = []
    for xi in xis:
        out.append(sum(v * chi(xi * y, p) for v, y in zip(values, ys)) * p ** (-n))
    return np.array(out)


def abs_p(x: Fraction, p: int) -> float:
    if x == 0:
        return 0.0
    return float(p) ** (-vp_frac(x, p))


def qgauss_density_direct(p, beta, q, gamma: Fraction, x: Fraction, M: int) -> float:
    """integral of exp(-beta |xi|^q) chi(xi (gamma - x)) over xi, as a lattice sum.

    xi runs over p^{-M} Z_p / p^M Z_p with the zero cell assigned |xi| = 0.
    """
    u = gamma - x
    total = 0.0
    size = p ** (2 * M)
    for i in range(size):
        xi = Fraction(i, p ** M)
        w = math.exp(-beta * abs_p(xi, p) ** q)
        total += w * chi(xi * u, p).real
    return total * float(p) ** (-M)


def qgauss_shell_series(p, beta, q, s, kmin=-80, kmax=60) -> float:
    """sum_k e_k * (shell integral of chi over |xi| = p^k) at |u| = p^{-s}."""
    total = 0.0
    for k in range(kmin, kmax):
        e = math.exp(-beta * float(p) ** (k * q))
        inner = float(p) ** k * (1 if k <= s else 0)
        outer = float(p) ** (k - 1) * (1 if k - 1 <= s else 0)
        total += e * (inner - outer)
    return total


def pd_full_line(values, p, m, n, b, i, shells=200):
    """PD(b, f)(x_i) summed coset by coset, plus shells |y| = p^k beyond the support."""
    xs = lattice_points(p, m, n)
    x = xs[i]
    acc = 0.0
    for j, y in enumerate(xs):
        if j == i:
            continue
        acc += (values[i] - values[j]) * abs_p(x - y, p) ** (-1 - b) * float(p) ** (-n)
    for k in range(m + 1, m + shells):
        acc += values[i] * float(p) ** k * (1 - 1 / p) * float(p) ** (-k * (1 + b))
    return acc


def matrix_exp_fraction(X, terms: int):
    """Exact sum_{j < terms} X^j / j! over the rationals."""
    d = len(X)
    total = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    power = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    for j in range(1, terms):
        power = [[sum(power[a][c] * X[c][b] for c in range(d)) for b in range(d)] for a in range(d)]
        f = math.factorial(j)
        for a in range(d):
            for b in range(d):
                total[a][b] += power[a][b] / f
    return total


def frac_mod(x: Fraction, p: int, N: int) -> int:
    """Residue of a p-integral rational modulo p^N."""
    mod = p ** N
    return x.numerator * pow(x.denominator, -1, mod) % mod

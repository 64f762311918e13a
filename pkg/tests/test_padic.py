import cmath
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nalab.padic import (Ball, ConvergenceError, DomainError, PAdic, PMatrix, additive_character,
                         j_b_norm, matrix_exp, matrix_from_ints, matrix_log, padic_from_rational,
                         padic_norm)

from oracles import chi, frac_mod, matrix_exp_fraction, vp_frac

PRIMES = [2, 3, 5, 7]


@pytest.mark.parametrize("num,den,ord_,digits", [
    (1, 1, 0, [1, 0, 0, 0, 0, 0, 0, 0]),
    (3, 1, 1, [1, 0, 0, 0, 0, 0, 0, 0]),
    (1, 3, -1, [1, 0, 0, 0, 0, 0, 0, 0]),
    # -1 = sum 2 * 3^k
    (-1, 1, 0, [2] * 8),
    # 1/2 = (1 + 3 + 3^2 + ...) * ... -> 2 * (1/2) = 1: digits 2,1,1,1,...
    (1, 2, 0, [2, 1, 1, 1, 1, 1, 1, 1]),
])
def test_from_rational_p3(num, den, ord_, digits):
    x = padic_from_rational(num, den, 3, 8)
    assert x.ord == ord_
    assert list(x.digits) == digits
    assert x.digits[0] != 0


def test_zero_and_errors():
    z = padic_from_rational(0, 5, 3, 8)
    assert z.is_zero and z.ord == math.inf and padic_norm(z) == 0
    with pytest.raises(DomainError):
        padic_from_rational(1, 0, 3, 8)
    with pytest.raises(TypeError):
        padic_from_rational(0.5, 1, 3, 8)


@pytest.mark.parametrize("p", PRIMES)
def test_norm_of_p(p):
    assert padic_norm(PAdic.from_int(p, p)) == 1 / p


@pytest.mark.parametrize("p", PRIMES)
def test_round_trip_terminating(p):
    # nonnegative rationals with p-power denominators terminate; negatives agree mod p^(ord+N)
    for num in range(-40, 41):
        for k in range(3):
            x = Fraction(num, p ** k)
            y = PAdic.from_value(x, p, 12)
            if num >= 0:
                assert y.to_fraction() == x
            else:
                assert (y.to_fraction() - x) * Fraction(p) ** (-int(y.ord) - 12) % 1 == 0


@pytest.mark.parametrize("p", [2, 3])
def test_norm_exhaustive_small_digits(p):
    # every pair of elements with 3 unit digits and ord in {-1, 0, 1}
    elems = []
    for o in (-1, 0, 1):
        for u in range(1, p ** 3):
            if u % p:
                elems.append(PAdic(p, o, u, 3))
    for x, y in itertools.product(elems, repeat=2):
        assert (x * y).norm == pytest.approx(x.norm * y.norm, rel=1e-15)
        s = (x + y).norm
        assert s <= max(x.norm, y.norm)
        if x.norm != y.norm:
            assert s == max(x.norm, y.norm)


padic_vals = st.builds(lambda n, d, k: Fraction(n, d) * Fraction(3) ** k,
                       st.integers(-10 ** 6, 10 ** 6), st.integers(1, 10 ** 4), st.integers(-4, 4))


@settings(max_examples=300, deadline=None)
@given(padic_vals, padic_vals)
def test_multiplicative_and_ultrametric(a, b):
    p = 3
    x, y = PAdic.from_value(a, p, 30), PAdic.from_value(b, p, 30)
    assert (x * y).norm == pytest.approx(x.norm * y.norm, rel=1e-15)
    assert (x * y).ord == x.ord + y.ord
    assert (x + y).norm <= max(x.norm, y.norm)
    if x.norm != y.norm:
        assert (x + y).norm == max(x.norm, y.norm)
    # valuation agrees with the rational oracle
    if a:
        assert x.ord == vp_frac(a, p)


def test_norm_properties_random_pairs(rng):
    p = 5
    for _ in range(10_000):
        a = Fraction(int(rng.integers(-10 ** 9, 10 ** 9)), int(rng.integers(1, 10 ** 5))) * \
            Fraction(p) ** int(rng.integers(-3, 4))
        b = Fraction(int(rng.integers(-10 ** 9, 10 ** 9)), int(rng.integers(1, 10 ** 5)))
        x, y = PAdic.from_value(a, p, 25), PAdic.from_value(b, p, 25)
        assert (x * y).norm == pytest.approx(x.norm * y.norm, rel=1e-15)
        assert (x + y).norm <= max(x.norm, y.norm)


def test_arithmetic_matches_fractions(rng):
    p = 7
    for _ in range(200):
        a = Fraction(int(rng.integers(-999, 999)), int(rng.integers(1, 50)))
        b = Fraction(int(rng.integers(1, 999)), int(rng.integers(1, 50)))
        x, y = PAdic.from_value(a, p, 20), PAdic.from_value(b, p, 20)
        for got, want in [(x + y, a + b), (x - y, a - b), (x * y, a * b), (x / y, a / b)]:
            ref = PAdic.from_value(want, p, 20)
            assert got.agrees(ref, int(ref.ord) + 15) or want == 0


@pytest.mark.parametrize("p,b", [(2, 0.5), (3, 0.5), (5, 0.25), (3, 1.0)])
def test_j_b_norm(p, b):
    assert j_b_norm(PAdic.from_int(p, p), b) == pytest.approx(p ** -b, rel=1e-15)
    assert j_b_norm(PAdic.from_int(p + 1, p), b) == 1.0
    z = padic_from_rational(p ** 3, 1, p)
    assert j_b_norm(z, 1.0) == z.norm
    with pytest.raises(DomainError):
        j_b_norm(PAdic.zero(p), b)


@pytest.mark.parametrize("p", PRIMES)
def test_character_values(p):
    assert additive_character(PAdic.from_int(12345, p)) == 1
    got = additive_character(padic_from_rational(1, p, p))
    assert abs(got - cmath.exp(2j * math.pi / p)) < 1e-15


@pytest.mark.parametrize("p", PRIMES)
def test_character_homomorphism_and_oracle(p, rng):
    for _ in range(100):
        a = Fraction(int(rng.integers(-10 ** 6, 10 ** 6)), p ** int(rng.integers(0, 6)))
        b = Fraction(int(rng.integers(-10 ** 6, 10 ** 6)), p ** int(rng.integers(0, 6)))
        x, y = PAdic.from_value(a, p), PAdic.from_value(b, p)
        cx = additive_character(x)
        assert abs(cx - chi(a, p)) < 1e-12
        assert abs(abs(cx) - 1) < 1e-14
        assert abs(additive_character(x + y) - cx * additive_character(y)) < 1e-12


@pytest.mark.parametrize("p,k", [(2, 3), (3, 2), (5, 2)])
def test_character_orthogonality(p, k):
    # for x in Z_p: (1/p^k) sum over r in p^{-k}Z_p / Z_p of chi(x r) = 1{x in p^k Z_p}
    reps = [padic_from_rational(i, p ** k, p) for i in range(p ** k)]
    for num in range(-60, 61):
        x = padic_from_rational(num, 1, p)
        s = sum(additive_character(x * r) for r in reps) / p ** k
        want = 1.0 if x.ord >= k else 0.0
        assert abs(s - want) < 1e-12


def test_balls_nested_or_disjoint():
    p = 3
    balls = [Ball(padic_from_rational(c, 9, p), r) for c in range(-20, 20) for r in (-1, 0, 1, 2)]
    for a, b in itertools.combinations(balls, 2):
        assert a.nested_or_disjoint(b)
        assert a.disjoint(b) == (not a.contains_ball(b) and not b.contains_ball(a))
    assert Ball(PAdic.zero(p), 0).measure == 1.0


# ---------------------------------------------------------------------------
# matrices


def _rand_lie(rng, p, d, prec, v=1):
    return PMatrix(p, prec, tuple(tuple(int(x) * p ** v for x in row)
                                  for row in rng.integers(-50, 50, size=(d, d))))


def test_operator_norm_submultiplicative(rng):
    p = 3
    for _ in range(50):
        A = PMatrix(p, 10, tuple(map(tuple, rng.integers(0, 3 ** 10, size=(3, 3)).tolist())))
        B = _rand_lie(rng, p, 3, 10)
        assert (A @ B).norm <= A.norm * B.norm


@pytest.mark.parametrize("p", [3, 5, 7])
def test_exp_zero_and_congruence(p, rng):
    assert matrix_exp(PMatrix.zeros(2, p, 10)) == PMatrix.identity(2, p, 10)
    assert matrix_log(PMatrix.identity(2, p, 10)) == PMatrix.zeros(2, p, 10)
    for _ in range(10):
        X = _rand_lie(rng, p, 3, 12)
        assert matrix_exp(X).is_congruent_identity(1)


@pytest.mark.parametrize("p,prec", [(3, 8), (5, 6), (7, 5)])
def test_exp_matches_rational_series(p, prec, rng):
    # exact rational partial sum; the tail beyond 40 terms vanishes mod p^prec
    for _ in range(3):
        X = _rand_lie(rng, p, 2, prec)
        Xf = [[Fraction(e if e < p ** prec // 2 else e - p ** prec) for e in row] for row in X.entries]
        ref = matrix_exp_fraction(Xf, 40)
        got = matrix_exp(X)
        for a in range(2):
            for b in range(2):
                assert got.entries[a][b] == frac_mod(ref[a][b], p, prec)


@pytest.mark.parametrize("p", [3, 5])
def test_log_exp_inverse(p, rng):
    for _ in range(20):
        X = _rand_lie(rng, p, 3, 15, v=int(rng.integers(1, 3)))
        assert matrix_log(matrix_exp(X)) == X
        g = matrix_exp(X)
        assert matrix_exp(matrix_log(g)) == g


@pytest.mark.parametrize("p", [3, 5])
def test_exp_commuting_sum(p, rng):
    for _ in range(10):
        D1 = [int(x) * p for x in rng.integers(-9, 9, 3)]
        D2 = [int(x) * p for x in rng.integers(-9, 9, 3)]
        X = matrix_from_ints([[D1[i] if i == j else 0 for j in range(3)] for i in range(3)], p, 12)
        Y = matrix_from_ints([[D2[i] if i == j else 0 for j in range(3)] for i in range(3)], p, 12)
        assert matrix_exp(X + Y) == matrix_exp(X) @ matrix_exp(Y)
        # polynomials in one matrix commute too
        Z = _rand_lie(rng, p, 3, 12)
        assert matrix_exp(Z + Z @ Z) == matrix_exp(Z) @ matrix_exp(Z @ Z)


@pytest.mark.parametrize("p,v", [(5, 1), (5, 2), (7, 1), (3, 1), (3, 2)])
def test_campbell_hausdorff_degree_two(p, v, rng):
    # the cubic coefficient 1/12 costs one digit at p = 3
    prec = 14
    mod = p ** prec
    inv2, inv12 = pow(2, -1, mod), None if p == 3 else pow(12, -1, mod)
    loss = 1 if p == 3 else 0
    for _ in range(10):
        X, Y = _rand_lie(rng, p, 2, prec, v), _rand_lie(rng, p, 2, prec, v)
        lhs = matrix_log(matrix_exp(X) @ matrix_exp(Y))
        XY = X.bracket(Y)
        rhs = X + Y + XY.scale(inv2)
        assert (lhs - rhs).valuation() >= 3 * v - loss
        if inv12 is not None:
            cubic = (X.bracket(XY) - Y.bracket(XY)).scale(inv12)
            assert (lhs - rhs - cubic).valuation() >= 4 * v


def test_campbell_hausdorff_series_oracle():
    # exact rational log(exp X exp Y) against the package, p = 3
    p, prec = 3, 8
    X = matrix_from_ints([[3, 6], [-3, 9]], p, prec)
    Y = matrix_from_ints([[0, 3], [6, -3]], p, prec)
    Xf = [[Fraction(3), Fraction(6)], [Fraction(-3), Fraction(9)]]
    Yf = [[Fraction(0), Fraction(3)], [Fraction(6), Fraction(-3)]]
    ex, ey = matrix_exp_fraction(Xf, 40), matrix_exp_fraction(Yf, 40)
    g = [[sum(ex[a][c] * ey[c][b] for c in range(2)) for b in range(2)] for a in range(2)]
    # log(g) = sum (-1)^{j+1} (g - I)^j / j, truncated far past p^prec
    D = [[g[a][b] - (a == b) for b in range(2)] for a in range(2)]
    total = [[Fraction(0)] * 2 for _ in range(2)]
    power = [[Fraction(int(a == b)) for b in range(2)] for a in range(2)]
    for j in range(1, 40):
        power = [[sum(power[a][c] * D[c][b] for c in range(2)) for b in range(2)] for a in range(2)]
        for a in range(2):
            for b in range(2):
                total[a][b] += (-1) ** (j + 1) * power[a][b] / j
    got = matrix_log(matrix_exp(X) @ matrix_exp(Y))
    for a in range(2):
        for b in range(2):
            assert got.entries[a][b] % p ** 6 == frac_mod(total[a][b], p, 6)


def test_exp_log_domain_errors():
    with pytest.raises(ConvergenceError):
        matrix_exp(matrix_from_ints([[1, 0], [0, 0]], 3, 5))
    with pytest.raises(ConvergenceError):
        matrix_exp(matrix_from_ints([[2, 0], [0, 0]], 2, 5))
    with pytest.raises(ConvergenceError):
        matrix_log(matrix_from_ints([[2, 0], [0, 1]], 3, 5))


def test_norm_values_float_exact():
    x = padic_from_rational(50, 1, 5)
    assert x.norm == 1 / 25
    assert np.isclose(padic_from_rational(1, 125, 5).norm, 125.0)

import math
from fractions import Fraction

import numpy as np
import pytest

from nalab.lattice import (LatticeFunction, LatticeSpec, boundary_shell, exterior_shell_sum,
                           exterior_tail, fourier, haar_integral, inner_product, inverse_fourier,
                           load_lattice_function, pd_c, pd_kernel, pd_kernel_all,
                           random_lattice_function, riesz_closed_form, riesz_integral_check,
                           save_lattice_function, vladimirov_constant, vladimirov_kernel,
                           vladimirov_multiplier, zero_mode_constant)
from nalab.padic import DomainError, PAdic, padic_from_rational

from oracles import abs_p, fourier_direct, lattice_points, pd_full_line

SPECS = [LatticeSpec(2, 3, 4), LatticeSpec(3, 2, 2), LatticeSpec(5, 1, 2), LatticeSpec(7, 1, 1),
         LatticeSpec(2, 0, 5), LatticeSpec(3, -1, 3)]


# ---------------------------------------------------------------------------
# indexing and Haar measure


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_index_round_trip(spec):
    for i in range(spec.size):
        assert spec.index(spec.point(i)) == i
    norms = spec.norms()
    for i in range(spec.size):
        want = abs_p(Fraction(i) / Fraction(spec.p) ** spec.m, spec.p)
        assert norms[i] == pytest.approx(want, rel=1e-15)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_haar_integral_examples(spec):
    ones = LatticeFunction(spec, np.ones(spec.size))
    assert haar_integral(ones) == pytest.approx(spec.p ** spec.m, rel=1e-14)
    assert haar_integral(LatticeFunction(spec, np.zeros(spec.size))) == 0
    if spec.m >= 0 and spec.n >= 1:
        assert haar_integral(LatticeFunction.indicator_ball(spec, 0)) == pytest.approx(1.0, rel=1e-14)
        assert haar_integral(LatticeFunction.indicator_ball(spec, -1)) == pytest.approx(1 / spec.p, rel=1e-14)


def test_lattice_spec_errors():
    with pytest.raises(DomainError):
        LatticeSpec(3, -2, 1)
    spec = LatticeSpec(3, 1, 1)
    with pytest.raises(DomainError):
        spec.index(padic_from_rational(1, 9, 3))
    assert LatticeFunction(spec, np.ones(9))(padic_from_rational(1, 9, 3)) == 0
    with pytest.raises(DomainError):
        LatticeFunction(spec, np.ones(4))


# ---------------------------------------------------------------------------
# Fourier transform


@pytest.mark.parametrize("spec", [LatticeSpec(2, 2, 2), LatticeSpec(3, 1, 1), LatticeSpec(5, 0, 1),
                                  LatticeSpec(3, 2, 0), LatticeSpec(2, 1, 3)], ids=str)
def test_fourier_matches_character_sum(spec, rng):
    f = random_lattice_function(spec, rng)
    got = fourier(f)
    assert got.spec == spec.dual
    want = fourier_direct(f.values, spec.p, spec.m, spec.n)
    np.testing.assert_allclose(got.values, want, atol=1e-12)


# the unit ball is a union of cells only when m >= 0 and n >= 0
@pytest.mark.parametrize("spec", [s for s in SPECS if s.m >= 0 and s.n >= 0], ids=str)
def test_fourier_of_unit_ball_is_self_dual(spec):
    ch = LatticeFunction.indicator_ball(spec, 0)
    got = fourier(ch)
    want = LatticeFunction.indicator_ball(spec.dual, 0)
    np.testing.assert_allclose(got.values, want.values, atol=1e-12)


@pytest.mark.parametrize("spec", [LatticeSpec(2, 3, 4), LatticeSpec(3, 3, 4), LatticeSpec(5, 2, 1),
                                  LatticeSpec(7, 1, 2), LatticeSpec(2, -2, 5)], ids=str)
def test_parseval_and_double_transform(spec, rng):
    for _ in range(5):
        f, g = random_lattice_function(spec, rng), random_lattice_function(spec, rng)
        lhs, rhs = inner_product(f, g), inner_product(fourier(f), fourier(g))
        assert abs(lhs - rhs) <= 1e-9 * abs(lhs)
        ff = fourier(fourier(f))
        assert ff.spec == spec
        np.testing.assert_allclose(ff.values, f.reflect().values, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(inverse_fourier(fourier(f)).values, f.values, atol=1e-12)
    z = LatticeFunction(spec, np.zeros(spec.size))
    assert not np.any(fourier(z).values)


# ---------------------------------------------------------------------------
# Vladimirov operator: multiplier form


@pytest.mark.parametrize("spec", [LatticeSpec(2, 3, 4), LatticeSpec(3, 2, 3), LatticeSpec(5, 1, 2)], ids=str)
def test_multiplier_constant_and_semigroup(spec, rng):
    c = LatticeFunction(spec, np.full(spec.size, 2.5))
    # a constant on the whole lattice is p^m Ch_{p^-m Z_p}: its transform lives on the zero coset
    np.testing.assert_allclose(vladimirov_multiplier(c, 0.7).values, 0, atol=1e-12)
    f = random_lattice_function(spec, rng)
    for a, b in [(0.3, 0.5), (1.0, 0.25), (0.4 + 0.2j, 0.6 - 0.2j)]:
        ab = vladimirov_multiplier(vladimirov_multiplier(f, a), b)
        ba = vladimirov_multiplier(vladimirov_multiplier(f, b), a)
        direct = vladimirov_multiplier(f, a + b)
        np.testing.assert_allclose(ab.values, direct.values, atol=1e-10)
        np.testing.assert_allclose(ba.values, direct.values, atol=1e-10)
    with pytest.raises(DomainError):
        vladimirov_multiplier(f, 0.0)


# ---------------------------------------------------------------------------
# kernel form


@pytest.mark.parametrize("p,b", [(2, 0.5), (3, 0.5), (3, 1.2), (5, 0.3)])
def test_pd_kernel_unit_ball_at_zero(p, b):
    spec = LatticeSpec(p, 3, 2)
    ch = LatticeFunction.indicator_ball(spec, 0)
    want = (1 - 1 / p) * p ** -b / (1 - p ** -b)
    assert pd_kernel(ch, b, 0) == pytest.approx(want, rel=1e-12)
    # the same value from the shell series written out term by term
    series = sum(p ** k * (1 - 1 / p) * p ** (-k * (1 + b)) for k in range(1, 400))
    assert want == pytest.approx(series, rel=1e-12)
    assert pd_c(ch, b, 0) == 0


@pytest.mark.parametrize("spec,b", [(LatticeSpec(2, 2, 2), 0.5), (LatticeSpec(3, 1, 1), 0.8),
                                    (LatticeSpec(5, 1, 1), 0.3)], ids=str)
def test_pd_kernel_matches_full_line_oracle(spec, b, rng):
    f = LatticeFunction(spec, rng.normal(size=spec.size))
    allv = pd_kernel_all(f, b)
    for i in range(spec.size):
        want = pd_full_line(f.values.real, spec.p, spec.m, spec.n, b, i)
        assert pd_kernel(f, b, i).real == pytest.approx(want, rel=1e-10, abs=1e-12)
        assert allv.values[i] == pytest.approx(pd_kernel(f, b, i), rel=1e-12, abs=1e-12)
    # PAdic argument selects the same coset
    assert pd_kernel(f, b, spec.point(3)) == pd_kernel(f, b, 3)


def test_pd_kernel_constant_region_and_real_output(rng):
    spec = LatticeSpec(3, 2, 2)
    f = LatticeFunction(spec, rng.normal(size=spec.size))
    assert abs(pd_kernel(f, 0.5, 4).imag) == 0
    # with f extended by zero, only the full-lattice constant has a vanishing numerator inside;
    # the exterior tail is then the whole answer
    c = LatticeFunction(spec, np.full(spec.size, 2.0))
    assert pd_kernel(c, 0.5, 7) == pytest.approx(2.0 * exterior_tail(spec, 0.5), rel=1e-14)
    with pytest.raises(DomainError):
        pd_kernel(f, 0.0, 0)


@pytest.mark.parametrize("spec,b", [(LatticeSpec(2, 3, 3), 0.5), (LatticeSpec(3, 2, 2), 0.7),
                                    (LatticeSpec(5, 1, 2), 1.3), (LatticeSpec(3, 2, 3), 0.25)], ids=str)
def test_multiplier_equals_kernel(spec, b, rng):
    f = random_lattice_function(spec, rng)
    mult = vladimirov_multiplier(f, b)
    kern = vladimirov_kernel(f, b)
    np.testing.assert_allclose(mult.values, kern.values, atol=1e-9)
    # mean-zero functions need no zero-mode correction
    g = random_lattice_function(spec, rng, mean_zero=True)
    pd = pd_kernel_all(g, b)
    np.testing.assert_allclose(vladimirov_multiplier(g, b).values,
                               vladimirov_constant(spec.p, b) * pd.values, atol=1e-9)


def test_zero_mode_constant_is_shell_sum():
    spec = LatticeSpec(3, 2, 2)
    b = 0.6
    p = 3
    shells = sum(p ** k * (1 - 1 / p) * p ** (k * b) for k in range(-400, -spec.m + 1))
    assert zero_mode_constant(spec, b) == pytest.approx(shells, rel=1e-12)
    tail = sum(p ** k * (1 - 1 / p) * p ** (-k * (1 + b)) for k in range(spec.m + 1, 600))
    assert exterior_tail(spec, b) == pytest.approx(tail, rel=1e-12)
    assert boundary_shell(spec) == spec.m


def _pd_c_direct(values, p, m, n, b, i):
    xs = lattice_points(p, m, n)
    acc = 0.0
    for j, y in enumerate(xs):
        if j != i and abs_p(y, p) <= 1:
            acc += (values[i] - values[j]) * abs_p(xs[i] - y, p) ** (-1 - b) * float(p) ** (-n)
    return acc


@pytest.mark.parametrize("spec,b", [(LatticeSpec(3, 1, 2), 0.5), (LatticeSpec(2, 2, 2), 1.0)], ids=str)
def test_pd_c_decomposition(spec, b, rng):
    f = LatticeFunction(spec, rng.normal(size=spec.size))
    for i in range(spec.size):
        c = pd_c(f, b, i)
        assert c.real == pytest.approx(_pd_c_direct(f.values.real, spec.p, spec.m, spec.n, b, i), abs=1e-12)
        assert c + exterior_shell_sum(f, b, i) == pytest.approx(pd_kernel(f, b, i), abs=1e-12)


def test_pd_c_vanishes_for_unit_constancy(rng):
    # constant on cosets of Z_p: every y in the unit ball shares f(x) when x is in the unit ball
    spec = LatticeSpec(3, 2, 2)
    coarse = rng.normal(size=3 ** 2)
    # x_i - x_j lies in Z_p exactly when i = j mod p^m
    vals = coarse[np.arange(spec.size) % 9]
    f = LatticeFunction(spec, vals)
    for i in range(spec.size):
        if spec.norms()[i] <= 1:
            assert pd_c(f, 0.5, i) == 0
    with pytest.raises(DomainError):
        pd_c(LatticeFunction(LatticeSpec(3, -1, 2), np.ones(3)), 0.5, 0)


@pytest.mark.parametrize("unit,shift", [(2, 0), (1, 5), (4, 7), (5, 13)])
def test_pd_kernel_commutes_with_isometries(unit, shift, rng):
    # h(x) = u x + c with |u| = 1 keeps every distance, so PD(b, f o h) = PD(b, f) o h
    spec = LatticeSpec(3, 2, 2)
    f = LatticeFunction(spec, rng.normal(size=spec.size))
    idx = (unit * np.arange(spec.size) + shift) % spec.size
    fh = LatticeFunction(spec, f.values[idx])
    pd_f = pd_kernel_all(f, 0.5).values
    pd_fh = pd_kernel_all(fh, 0.5).values
    np.testing.assert_allclose(pd_fh, pd_f[idx], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("p,n", [(2, 6), (3, 4), (5, 3)])
def test_pd_kernel_commutes_with_nonlinear_isometry(p, n, rng):
    # h(y) = y + p y^2 satisfies |h(x) - h(y)| = |x - y| |1 + p (x + y)| = |x - y| on Z_p
    spec = LatticeSpec(p, 0, n)
    i = np.arange(spec.size)
    idx = (i + p * i * i) % spec.size
    assert len(set(idx.tolist())) == spec.size
    f = LatticeFunction(spec, rng.normal(size=spec.size))
    fh = LatticeFunction(spec, f.values[idx])
    for b in (0.5, 1.0, 2.0):
        np.testing.assert_allclose(pd_kernel_all(fh, b).values, pd_kernel_all(f, b).values[idx],
                                   rtol=1e-12, atol=1e-12)


def test_pd_kernel_scaling_by_p(rng):
    # f(x) = g(p x): PD(b, f)(x) = p^{-b} PD(b, g)(p x); the lattice of g is (m-1, n+1)
    p, m, n, b = 3, 2, 2, 0.5
    spec_f, spec_g = LatticeSpec(p, m, n), LatticeSpec(p, m - 1, n + 1)
    g = LatticeFunction(spec_g, rng.normal(size=spec_g.size))
    # x_i = i / p^m and p x_i = i / p^(m-1): the index is the same
    f = LatticeFunction(spec_f, g.values)
    np.testing.assert_allclose(pd_kernel_all(f, b).values, p ** -b * pd_kernel_all(g, b).values,
                               rtol=1e-12)


# ---------------------------------------------------------------------------
# character integral of |x|^{nq}


@pytest.mark.parametrize("p,n,q,cutoff,want", [
    (2, 1, 1.0, 6, -4 / 3),
    (3, 1, 1.0, 6, -9 / 4),
    (2, 2, 1.0, 6, -3.2),
    (5, 1, 0.5, 5, (1 - 5 ** 0.5) / (1 - 5 ** -1.5)),
])
def test_riesz_unit_y(p, n, q, cutoff, want):
    res = riesz_integral_check(n, q, PAdic.from_int(1, p), cutoff)
    assert res.closed_form == pytest.approx(want, rel=1e-12)
    assert res.error < 1e-3
    assert res.error <= res.tail_bound * p ** (n * q) + 1e-12


def test_riesz_closed_form_scaling():
    p = 3
    y = PAdic.from_int(9, p)
    res = riesz_integral_check(1, 1.0, y, 7)
    assert res.closed_form == pytest.approx(riesz_closed_form(p, 1, 1.0, 1.0) * 81.0, rel=1e-12)
    assert res.error < 1e-3 * abs(res.closed_form)


def test_riesz_error_shrinks_with_cutoff():
    errs = [riesz_integral_check(1, 1.0, PAdic.from_int(1, 2), c).error for c in (3, 5, 7, 9)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_riesz_errors():
    with pytest.raises(DomainError):
        riesz_integral_check(1, 1.0, PAdic.zero(2), 6)
    with pytest.raises(DomainError):
        riesz_integral_check(0, 1.0, PAdic.from_int(1, 2), 6)


# ---------------------------------------------------------------------------
# serialization


def test_save_load_round_trip(tmp_path, rng):
    spec = LatticeSpec(3, 1, 2)
    f = random_lattice_function(spec, rng)
    path = tmp_path / "f.csv"
    save_lattice_function(f, path)
    g = load_lattice_function(path)
    assert g.spec == spec
    np.testing.assert_array_equal(g.values, f.values)
    head = path.read_text().splitlines()[:2]
    assert head[0].startswith("# {") and head[1] == "digit_index,real,imag"
    assert math.isfinite(abs(haar_integral(g)))

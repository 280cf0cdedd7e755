import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sphcov.specialfn import (bessel_k, check_coeffs, legendre_series, legendre_table,
                              xnu_bessel_k, xnu_bessel_k_ladder)


def mp_k(nu, x):
    return float(mpmath.besselk(nu, x))


@pytest.mark.parametrize("nu", [0.01, 0.3, 0.5, 0.77, 1.0, 1.5, 2.5, 3.3, 7.9])
@pytest.mark.parametrize("x", [1e-6, 0.01, 0.4, 0.99, 1.0, 2.5, 8.0, 40.0, 300.0])
def test_bessel_k_matches_mpmath(nu, x):
    assert bessel_k(nu, x) == pytest.approx(mp_k(nu, x), rel=1e-12)


def test_scaled_bessel_at_large_argument():
    for nu in (0.2, 1.7, 4.0):
        ref = float(mpmath.besselk(nu, 1000) * mpmath.exp(1000))
        assert bessel_k(nu, 1000.0, scaled=True) == pytest.approx(ref, rel=1e-12)


def test_half_integer_closed_form():
    x = np.geomspace(1e-3, 50, 60)
    assert np.allclose(bessel_k(0.5, x), np.sqrt(np.pi / (2 * x)) * np.exp(-x), rtol=1e-13)
    assert bessel_k(0.5, 1.0) == pytest.approx(0.4610685044478946, rel=1e-14)


def test_xnu_limit_at_zero():
    for nu in (0.3, 1.0, 2.5):
        assert xnu_bessel_k(nu, 0.0) == pytest.approx(2 ** (nu - 1) * math.gamma(nu), rel=1e-14)
        # the leading correction is O(x**(2 nu)) for nu < 1
        tol = 10 * 1e-9 ** (2 * min(nu, 1.0))
        assert xnu_bessel_k(nu, 1e-9) == pytest.approx(2 ** (nu - 1) * math.gamma(nu), rel=tol)


def test_ladder_orders_match_direct():
    x = np.array([0.0, 1e-4, 0.3, 1.0, 4.0, 25.0])
    ladder = xnu_bessel_k_ladder(0.7, 3, x)
    for j, row in enumerate(ladder):
        a = 0.7 + j
        assert np.allclose(row, xnu_bessel_k(a, x), rtol=1e-13)


def test_ladder_negative_order():
    x = np.array([0.2, 1.3, 6.0])
    row = xnu_bessel_k_ladder(-0.6, 1, x)[0]
    ref = [x_ ** -0.6 * mp_k(0.6, x_) for x_ in x]
    assert np.allclose(row, ref, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.05, 6.0), x=st.floats(1e-4, 200.0))
def test_bessel_recurrence(nu, x):
    assume(abs(nu - 1) > 1e-6)
    lhs = bessel_k(nu + 1, x)
    rhs = bessel_k(nu - 1 if nu > 1 else 1 - nu, x) + 2 * nu / x * bessel_k(nu, x)
    assert lhs == pytest.approx(rhs, rel=1e-11)


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.05, 5.0), x=st.floats(1e-3, 50.0), dx=st.floats(1e-3, 5.0))
def test_bessel_decreasing_in_x(nu, x, dx):
    assert bessel_k(nu, x + dx) < bessel_k(nu, x)


def test_bessel_domain_errors():
    with pytest.raises(ValueError):
        bessel_k(0.5, -1.0)
    with pytest.raises(ValueError):
        bessel_k(-0.5, 1.0)


def test_legendre_values():
    x = np.linspace(-1, 1, 11)
    P = legendre_table(4, x)
    assert np.allclose(P[2], 0.5 * (3 * x ** 2 - 1))
    assert np.allclose(P[3], 0.5 * (5 * x ** 3 - 3 * x))
    assert np.allclose(P[4], (35 * x ** 4 - 30 * x ** 2 + 3) / 8)
    assert legendre_series([1, 2, 3], 0.5) == pytest.approx(1 + 1 + 3 * (-0.125))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_legendre_series_matches_numpy(coeffs):
    x = np.linspace(-1, 1, 17)
    ref = np.polynomial.legendre.legval(x, coeffs)
    assert np.allclose(legendre_series(coeffs, x), ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_legendre_endpoints(coeffs):
    c = np.asarray(coeffs)
    assert legendre_series(c, 1.0) == pytest.approx(c.sum(), abs=1e-10)
    alt = np.sum(c * (-1.0) ** np.arange(c.size))
    assert legendre_series(c, -1.0) == pytest.approx(alt, abs=1e-10)


def test_legendre_input_validation():
    with pytest.raises(ValueError):
        legendre_series([1.0], 1.5)
    with pytest.raises(ValueError):
        check_coeffs([])
    with pytest.raises(ValueError):
        check_coeffs([1.0, np.nan])


def test_huge_order_signals_overflow():
    with pytest.raises(OverflowError):
        xnu_bessel_k(1e6, 1.0)
    with pytest.raises(OverflowError):
        bessel_k(5e3, 2.0)

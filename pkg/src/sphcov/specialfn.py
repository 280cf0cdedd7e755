"""Legendre series and modified Bessel functions of the second kind.

The Bessel routines use the classical Temme series for x < 1 and the
trapezoidal rule on the cosh integral representation for x >= 1 to
obtain K_mu and K_{mu+1} for |mu| <= 1/2, then recur upward in order.
Everything is vectorised over ``x`` for a single real order.

Because the Matern family needs ``x**nu * K_nu(x)`` rather than ``K_nu``
itself, the ladder is carried in that product form,
``h(a+1) = x**2 h(a-1) + 2 a h(a)``, which never overflows for small
``x`` and reaches the analytic limit ``2**(nu-1) Gamma(nu)`` at ``x = 0``.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "check_coeffs",
    "legendre_series",
    "legendre_table",
    "bessel_k",
    "xnu_bessel_k",
    "xnu_bessel_k_ladder",
]

_EPS = 1e-16
_MAXIT = 10000
_TEMME_SWITCH = 1.0
_TRAPEZOID_STEP = 0.2

# Taylor coefficients of 1/Gamma(1+z) about z = 0.
_RGAMMA_TAYLOR = np.array([
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
])


def check_coeffs(coeffs) -> np.ndarray:
    """Return ``coeffs`` as a 1-d float array, rejecting empty or non-finite input."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1 or c.size == 0:
        raise ValueError("Legendre coefficients must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(c)):
        raise ValueError("Legendre coefficients must be finite")
    return c


def _check_unit_interval(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0) or not np.all(np.isfinite(x)):
        raise ValueError("Legendre argument must lie in [-1, 1]")
    return x


def legendre_table(degree: int, x) -> np.ndarray:
    """Legendre polynomials P_0..P_degree at ``x``; shape ``(degree+1,) + x.shape``."""
    x = _check_unit_interval(x)
    out = np.empty((degree + 1,) + x.shape)
    out[0] = 1.0
    if degree >= 1:
        out[1] = x
    for i in range(1, degree):
        out[i + 1] = ((2 * i + 1) * x * out[i] - i * out[i - 1]) / (i + 1)
    return out


def legendre_series(coeffs, x):
    """Evaluate ``sum_i coeffs[i] * P_i(x)`` with the Bonnet recurrence.

    Parameters
    ----------
    coeffs : sequence of float
        Coefficients p_0..p_k.
    x : float or array_like
        Points in [-1, 1].

    Returns
    -------
    float or ndarray
        Same shape as ``x``.
    """
    c = check_coeffs(coeffs)
    x = _check_unit_interval(x)
    p_prev = np.ones_like(x)
    total = c[0] * p_prev
    if c.size > 1:
        p_cur = x.copy()
        total = total + c[1] * p_cur
        for i in range(1, c.size - 1):
            p_next = ((2 * i + 1) * x * p_cur - i * p_prev) / (i + 1)
            total = total + c[i + 1] * p_next
            p_prev, p_cur = p_cur, p_next
    return total if total.ndim else float(total)


def _rgamma_parts(mu: float) -> tuple[float, float, float, float]:
    """Temme's gamma helpers for |mu| <= 1/2.

    Returns ``(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))`` where
    ``gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)`` and
    ``gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2``; both are summed from
    the even/odd halves of the Taylor series so that no cancellation occurs
    as mu -> 0.
    """
    powers = mu ** np.arange(_RGAMMA_TAYLOR.size)
    odd = _RGAMMA_TAYLOR[1::2] * powers[0:-1:2]     # c_k mu^(k-1), k odd
    even = _RGAMMA_TAYLOR[0::2] * powers[0::2]      # c_k mu^k, k even
    gam1 = -float(np.sum(odd[::-1]))
    gam2 = float(np.sum(even[::-1]))
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _temme_small(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Temme series for small x (used below 1).

    Returns ``(x**mu K_mu(x), x**(mu+1) K_{mu+1}(x))``, both unscaled.
    """
    gam1, gam2, gampl, gammi = _rgamma_parts(mu)
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    with np.errstate(invalid="ignore"):
        fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    mu2 = mu * mu
    # for x < 1 every term shrinks at least as fast as (1/4)**i / i!, so all
    # points are advanced together until the slowest has converged
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu2)
        c *= dd / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if np.all(np.abs(delta) < np.abs(total) * _EPS):
            break
    else:  # pragma: no cover - series converges for x < 1
        raise ArithmeticError("Temme series failed to converge")
    xmu = x ** mu
    return xmu * total, 2.0 * xmu * total1


def _trapezoid_large(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoidal rule on ``e**x K_a(x) = int_0^inf exp(-x (cosh t - 1)) cosh(a t) dt``.

    Returns exponentially scaled ``(e**x K_mu(x), e**x K_{mu+1}(x))`` for
    x >= 1.  The integrand is entire and decays doubly exponentially, so the
    rule converges geometrically; its width shrinks like 1/sqrt(x), hence
    points are processed in octaves with step ``min(0.2, 0.7/sqrt(x_hi))``.
    Nodes are added until the integrand at the octave's smallest ``x`` is
    below e**-42 of the leading term.
    """
    acc0 = np.empty_like(x)
    acc1 = np.empty_like(x)
    octave = np.floor(np.log2(x)).astype(int)
    for o in np.unique(octave):
        sel = octave == o
        xo = x[sel]
        x_lo = float(np.min(xo))
        step = min(_TRAPEZOID_STEP, 0.7 / math.sqrt(2.0 ** (o + 1)))
        s0 = np.zeros_like(xo)
        s1 = np.zeros_like(xo)
        k = 0
        while True:
            t = k * step
            shift = math.cosh(t) - 1.0
            w = 0.5 if k == 0 else 1.0
            e = np.exp(-shift * xo)
            s0 += (w * math.cosh(mu * t)) * e
            s1 += (w * math.cosh((mu + 1.0) * t)) * e
            if x_lo * shift - abs(mu + 1.0) * t > 42.0:
                break
            k += 1
        acc0[sel] = step * s0
        acc1[sel] = step * s1
    return acc0, acc1


def _scaled_product_pair(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``e**x * x**a * K_a(x)`` for a = mu and mu + 1, x > 0, |mu| <= 1/2."""
    h0 = np.empty_like(x)
    h1 = np.empty_like(x)
    small = x < _TEMME_SWITCH
    if np.any(small):
        xs = x[small]
        g0, g1 = _temme_small(mu, xs)
        ex = np.exp(xs)
        h0[small] = g0 * ex
        h1[small] = g1 * ex
    large = ~small
    if np.any(large):
        xl = x[large]
        k0, k1 = _trapezoid_large(mu, xl)
        h0[large] = k0 * xl ** mu
        h1[large] = k1 * xl ** (mu + 1.0)
    return h0, h1


MAX_ORDER = 1000


def _scaled_ladder(order_lo: float, count: int, x: np.ndarray) -> list[np.ndarray]:
    """``e**x x**a K_a(x)`` for a = order_lo + j, j < count; x > 0, order_lo > -1."""
    if order_lo <= -1.0:
        raise ValueError("ladder orders must exceed -1")
    if order_lo + count > MAX_ORDER:
        raise OverflowError(f"Bessel order above {MAX_ORDER} leaves the double range")
    if order_lo < -0.5:
        # K_a = K_{-a}; -a lies in (1/2, 1), reached as mu' + 1 with mu' in (-1/2, 0).
        _, k_neg = _scaled_product_pair(-order_lo - 1.0, x)
        first = k_neg * x ** (2.0 * order_lo)
        rest = _scaled_ladder(order_lo + 1.0, count - 1, x) if count > 1 else []
        return [first] + rest
    n0 = int(math.floor(order_lo + 0.5))
    mu = order_lo - n0
    h_prev, h_cur = _scaled_product_pair(mu, x)
    x2 = x * x
    ladder = [h_prev, h_cur]
    a = mu + 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        while len(ladder) < n0 + count:
            ladder.append(x2 * ladder[-2] + 2.0 * a * ladder[-1])
            a += 1.0
    return ladder[n0:n0 + count]


def _as_positive_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    return x


def xnu_bessel_k_ladder(order_lo: float, count: int, x) -> list[np.ndarray]:
    """``x**a K_a(x)`` for ``a = order_lo + j``, ``j = 0..count-1``.

    ``x`` may contain zeros; there each entry takes its limit,
    ``2**(a-1) Gamma(a)`` for a > 0 and ``inf`` otherwise.
    """
    x = _as_positive_x(x)
    if np.any(x < 0):
        raise ValueError("Bessel argument must be non-negative")
    flat = x.reshape(-1)
    pos = flat > 0
    out = [np.empty_like(flat) for _ in range(count)]
    if np.any(pos):
        xp = flat[pos]
        decay = np.exp(-xp)
        for res, h in zip(out, _scaled_ladder(order_lo, count, xp)):
            res[pos] = h * decay
    if not np.all(pos):
        for j, res in enumerate(out):
            a = order_lo + j
            res[~pos] = 2.0 ** (a - 1.0) * math.gamma(a) if a > 0 else np.inf
    return [r.reshape(x.shape) for r in out]


def xnu_bessel_k(nu: float, x):
    """``x**nu * K_nu(x)`` for nu > 0, x >= 0, with value ``2**(nu-1) Gamma(nu)`` at 0."""
    if not nu > 0:
        raise ValueError("order nu must be positive")
    x = _as_positive_x(x)
    res = xnu_bessel_k_ladder(float(nu), 1, x)[0]
    return res if res.ndim else float(res)


def bessel_k(nu: float, x, scaled: bool = False):
    """Modified Bessel function of the second kind, real order ``nu > 0``.

    Parameters
    ----------
    nu : float
        Order, > 0.
    x : float or array_like
        Argument, > 0.
    scaled : bool
        Return ``exp(x) * K_nu(x)``.  Needed beyond x ~ 700, where
        ``K_nu`` itself underflows to zero.

    Returns
    -------
    float or ndarray

    Notes
    -----
    For very small ``x`` and large ``nu`` the true value exceeds the double
    range; the result then saturates to ``inf`` rather than wrapping.
    Orders above ``MAX_ORDER`` raise ``OverflowError``.
    """
    if not nu > 0:
        raise ValueError("order nu must be positive")
    x = _as_positive_x(x)
    if np.any(x <= 0):
        raise ValueError("Bessel argument must be positive")
    if nu > MAX_ORDER:
        raise OverflowError(f"Bessel order above {MAX_ORDER} leaves the double range")
    flat = x.reshape(-1)
    n0 = int(math.floor(nu + 0.5))
    mu = nu - n0
    h0, h1 = _scaled_product_pair(mu, flat)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        k_prev = h0 * flat ** (-mu)
        if n0 == 0:
            res = k_prev
        else:
            k_cur = h1 * flat ** (-(mu + 1.0))
            a = mu + 1.0
            for _ in range(n0 - 1):
                k_prev, k_cur = k_cur, k_prev + (2.0 * a / flat) * k_cur
                a += 1.0
            res = k_cur
        res = np.where(np.isnan(res), np.inf, res)
        if not scaled:
            res = res * np.exp(-flat)
    res = res.reshape(x.shape)
    return res if res.ndim else float(res)

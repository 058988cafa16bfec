"""Gamma, digamma and the Gauss hypergeometric function for complex parameters."""

from __future__ import annotations

import cmath
import math

_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
INT_TOL = 1e-13
MAX_TERMS = 500


class HypergeometricError(ArithmeticError):
    pass


def nonpositive_integer(z, tol: float = INT_TOL):
    """Return n >= 0 when z is (within tol) the integer -n, else None."""
    z = complex(z)
    if abs(z.imag) > tol or z.real > tol:
        return None
    n = round(-z.real)
    return int(n) if abs(z.real + n) <= tol else None


def sinpi(z) -> complex:
    """sin(pi z) with exact zeros at the integers."""
    z = complex(z)
    n = round(z.real)
    f = complex(z.real - n, z.imag)
    s = cmath.sin(math.pi * f)
    return -s if n % 2 else s


def _lanczos_sum(z):
    x = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        x += _LANCZOS[i] / (z + i)
    return x


def gamma(z) -> complex:
    z = complex(z)
    if nonpositive_integer(z, 0.0) is not None:
        return complex(math.inf)
    if z.real < 0.5:
        return math.pi / (sinpi(z) * gamma(1.0 - z))
    z -= 1.0
    t = z + _G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * cmath.exp(-t) * _lanczos_sum(z)


def rgamma(z) -> complex:
    """1/Gamma(z); exactly zero at the poles."""
    z = complex(z)
    if z.real < 0.5:
        return sinpi(z) * gamma(1.0 - z) / math.pi
    return 1.0 / gamma(z)


def digamma(z) -> complex:
    z = complex(z)
    if nonpositive_integer(z, 0.0) is not None:
        return complex(math.inf)
    if z.real < 0.5:
        # psi(z) = psi(1 - z) - pi cot(pi z)
        n = round(z.real)
        f = complex(z.real - n, z.imag)
        return digamma(1.0 - z) - math.pi / cmath.tan(math.pi * f)
    z -= 1.0
    t = z + _G + 0.5
    s = _lanczos_sum(z)
    ds = -sum(_LANCZOS[i] / (z + i) ** 2 for i in range(1, len(_LANCZOS)))
    return cmath.log(t) - _G / t + ds / s


def pochhammer(a, n: int) -> complex:
    out = complex(1.0)
    for k in range(n):
        out *= a + k
    return out


def _series(a, b, c, z):
    total = term = complex(1.0)
    for n in range(MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        if term == 0 or abs(term) < 1e-17 * abs(total):
            return total
    raise HypergeometricError(f"series did not converge in {MAX_TERMS} terms (z={z})")


def _polynomial(a, b, c, z):
    m = nonpositive_integer(a, 0.0)
    k = nonpositive_integer(b, 0.0)
    deg = min(x for x in (m, k) if x is not None)
    total = term = complex(1.0)
    for n in range(deg):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
    return total


def _log_case(a, b, c, z, m):
    """c - a - b = m exactly an integer: the logarithmic 1-z expansions."""
    w = 1.0 - z
    lw = math.log(w)
    if m == 0:
        pref = gamma(a + b) * rgamma(a) * rgamma(b)
        term = complex(1.0)
        n = 0
        acc = complex(0.0)
        while True:
            acc += term * (2 * digamma(n + 1) - digamma(a + n) - digamma(b + n) - lw)
            term *= (a + n) * (b + n) / (n + 1) ** 2 * w
            n += 1
            if term == 0 or abs(term) < 1e-17 * abs(acc) or n > MAX_TERMS:
                break
        return pref * acc
    if m > 0:
        s = a + b + m
        head = complex(0.0)
        for n in range(m):
            head += pochhammer(a, n) * pochhammer(b, n) / (math.factorial(n) * pochhammer(1 - m, n)) * w ** n
        head *= gamma(m) * gamma(s) * rgamma(a + m) * rgamma(b + m)
        pref = (-w) ** m * gamma(s) * rgamma(a) * rgamma(b)
        acc = complex(0.0)
        term = complex(1.0 / math.factorial(m))
        for n in range(MAX_TERMS):
            acc += term * (lw - digamma(n + 1) - digamma(n + m + 1) + digamma(a + n + m) + digamma(b + n + m))
            term *= (a + m + n) * (b + m + n) / ((n + 1) * (n + m + 1)) * w
            if term == 0 or abs(term) < 1e-17 * abs(acc):
                break
        return head - pref * acc
    m = -m
    s = a + b - m
    head = complex(0.0)
    for n in range(m):
        head += pochhammer(a - m, n) * pochhammer(b - m, n) / (math.factorial(n) * pochhammer(1 - m, n)) * w ** n
    head *= gamma(m) * gamma(s) * rgamma(a) * rgamma(b) * w ** (-m)
    pref = (-1) ** m * gamma(s) * rgamma(a - m) * rgamma(b - m)
    acc = complex(0.0)
    term = complex(1.0 / math.factorial(m))
    for n in range(MAX_TERMS):
        acc += term * (lw - digamma(n + 1) - digamma(n + m + 1) + digamma(a + n) + digamma(b + n))
        term *= (a + n) * (b + n) / ((n + 1) * (n + m + 1)) * w
        if term == 0 or abs(term) < 1e-17 * abs(acc):
            break
    return head - pref * acc


def hyp2f1(a, b, c, z: float) -> complex:
    """Gauss 2F1(a, b; c; z) for real 0 <= z <= 1."""
    a, b, c = complex(a), complex(b), complex(c)
    z = float(z)
    if nonpositive_integer(c, 0.0) is not None:
        raise HypergeometricError(f"c = {c} is a nonpositive integer")
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z = {z} outside [0, 1]")
    if z == 0.0:
        return complex(1.0)
    if nonpositive_integer(a, 0.0) is not None or nonpositive_integer(b, 0.0) is not None:
        return _polynomial(a, b, c, z)
    m = c - a - b
    if z == 1.0:
        if m.real <= 0:
            raise HypergeometricError("series diverges at z = 1 when Re(c - a - b) <= 0")
        return gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b)
    if z <= 0.5:
        return _series(a, b, c, z)
    mi = round(m.real)
    if abs(m - mi) <= INT_TOL:
        return _log_case(a, b, c, z, int(mi))
    if abs(m - mi) < 1e-8:
        raise HypergeometricError(f"c - a - b = {m} is too close to an integer for the 1-z transformation")
    w = 1.0 - z
    first = gamma(c) * gamma(m) * rgamma(c - a) * rgamma(c - b) * _series(a, b, 1.0 - m, w)
    second = w ** m * gamma(c) * gamma(-m) * rgamma(a) * rgamma(b) * _series(c - a, c - b, 1.0 + m, w)
    return first + second

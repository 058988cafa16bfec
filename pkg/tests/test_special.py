import cmath
import math

import mpmath
import numpy as np
import pytest

from odeblowup.special import (
    HypergeometricError,
    digamma,
    gamma,
    hyp2f1,
    nonpositive_integer,
    pochhammer,
    rgamma,
    sinpi,
)

rng = np.random.default_rng(11)
POINTS = [complex(x, y) for x, y in zip(rng.uniform(-6, 8, 40), rng.uniform(-4, 4, 40))]


def _close(a, b, tol):
    return abs(complex(a) - complex(b)) <= tol * max(1.0, abs(complex(b)))


@pytest.mark.parametrize("z", POINTS)
def test_gamma_against_mpmath(z):
    assert _close(gamma(z), mpmath.gamma(z), 1e-13)
    assert _close(rgamma(z), mpmath.rgamma(z), 1e-13)


@pytest.mark.parametrize("z", POINTS[:20])
def test_digamma_against_mpmath(z):
    assert _close(digamma(z), mpmath.digamma(z), 1e-12)


def test_gamma_integers_and_poles():
    for n in range(1, 15):
        assert gamma(n).real == pytest.approx(math.factorial(n - 1), rel=1e-14)
    for n in range(0, 6):
        assert rgamma(-n) == 0
        assert math.isinf(abs(gamma(-n)))
    assert gamma(0.5).real == pytest.approx(math.sqrt(math.pi), rel=1e-15)


def test_sinpi_exact_zeros():
    for n in range(-5, 6):
        assert sinpi(n) == 0
    assert sinpi(0.5).real == pytest.approx(1.0)
    assert _close(sinpi(0.3 + 0.2j), cmath.sin(math.pi * (0.3 + 0.2j)), 1e-15)


def test_nonpositive_integer():
    assert nonpositive_integer(-3) == 3
    assert nonpositive_integer(0) == 0
    assert nonpositive_integer(-3 + 1e-15) == 3
    assert nonpositive_integer(1) is None
    assert nonpositive_integer(-2.5) is None
    assert nonpositive_integer(-2 + 1e-3j) is None


def test_pochhammer():
    assert pochhammer(3, 4) == 3 * 4 * 5 * 6
    assert pochhammer(-2, 3) == 0


def test_hyp2f1_examples():
    assert hyp2f1(1.3, -0.4 + 2j, 0.7, 0.0) == 1
    want = -math.log(1 - 0.3) / 0.3
    assert hyp2f1(1, 1, 2, 0.3).real == pytest.approx(want, rel=1e-15)
    assert want == pytest.approx(1.18891648, abs=1e-8)
    assert hyp2f1(-0.5, 2.0, 0.5, 0.0) == 1


HYP_CASES = [
    (0.3, 0.7, 1.5, 0.2),
    (0.3, 0.7, 1.5, 0.8),
    (0.3, 0.7, 1.5, 0.999),
    (-1.25, 2.5, 0.5, 0.9),
    (0.5 + 1j, 1.5 - 0.5j, 1.5, 0.6),
    (1.2, 2.3, 0.5, 0.7),  # c - a - b = -3 exactly: log case
    (0.25, 0.75, 1.0, 0.95),  # c - a - b = 0
    (0.5, 1.0, 3.5, 0.9),  # c - a - b = 2
    (-3.0, 1.7, 1.5, 0.99),  # polynomial
    (0.2, 0.3, 2.0, 1.0),  # Gauss sum
]


@pytest.mark.parametrize("a, b, c, z", HYP_CASES)
def test_hyp2f1_against_mpmath(a, b, c, z):
    want = complex(mpmath.hyp2f1(a, b, c, z))
    assert _close(hyp2f1(a, b, c, z), want, 1e-11)


@pytest.mark.parametrize("lam", [0.37, -0.61 + 0.4j, 1.7 - 1.1j])
@pytest.mark.parametrize("p", [3.0, 5.0])
def test_hyp2f1_on_eigenvalue_parameters(lam, p):
    beta = (p + 1) / (p - 1)
    a, b, c = (lam - 1) / 2, (lam + 2 * beta) / 2, 1.5
    for z in (0.1, 0.5, 0.75, 0.97):
        want = complex(mpmath.hyp2f1(a, b, c, z))
        assert _close(hyp2f1(a, b, c, z), want, 1e-10)


def test_hyp2f1_errors():
    with pytest.raises(HypergeometricError):
        hyp2f1(1, 1, -2, 0.5)
    with pytest.raises(ValueError):
        hyp2f1(1, 1, 2, 1.5)
    with pytest.raises(HypergeometricError):
        hyp2f1(1, 1, 2, 1.0)
    with pytest.raises(HypergeometricError):
        hyp2f1(0.5, 0.5, 1.0 + 1e-10, 0.8)

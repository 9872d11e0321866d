import math

import pytest
from scipy import integrate as sci

from liequad.quadrature import QuadratureError, gk15, integrate

CASES = [
    (math.sin, 0.0, math.pi),
    (lambda x: math.exp(-x * x), -3.0, 2.0),
    (lambda x: 1.0 / (1.0 + 25 * x * x), -1.0, 1.0),
    (lambda x: math.sqrt(x), 0.0, 1.0),
    (lambda x: math.cos(30 * x) * x, 0.0, 2.0),
    (lambda x: x**7 - 3 * x, -1.5, 0.5),
]


@pytest.mark.parametrize("f,a,b", CASES)
def test_matches_scipy_quad(f, a, b):
    want, _ = sci.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=500)
    got = integrate(f, a, b)
    assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_gk15_exact_on_polynomials():
    # the Kronrod rule integrates degree <= 22 exactly
    val, _ = gk15(lambda x: x**20, -1.0, 1.0)
    assert val == pytest.approx(2 / 21, rel=1e-14)


def test_orientation_and_empty_interval():
    assert integrate(math.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1), rel=1e-12)
    assert integrate(math.exp, 0.5, 0.5) == 0.0


def test_non_convergence_raises():
    with pytest.raises(QuadratureError):
        integrate(lambda x: math.sin(1.0 / x) / x, 1e-9, 1.0, limit=20)

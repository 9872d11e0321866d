"""Adaptive 15-point Gauss-Kronrod quadrature."""

from __future__ import annotations

import heapq
import math
from typing import Callable

# Kronrod abscissae on [0,1] (QUADPACK qk15); odd indices are the 7-point Gauss nodes.
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


class QuadratureError(ArithmeticError):
    pass


def gk15(f: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    """One Gauss-Kronrod panel: (Kronrod estimate, |Kronrod - Gauss|)."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fc = f(c)
    rk = fc * _WGK[7]
    rg = fc * _WG[3]
    for j in range(7):
        dx = h * _XGK[j]
        s = f(c - dx) + f(c + dx)
        rk += _WGK[j] * s
        if j % 2 == 1:
            rg += _WG[j // 2] * s
    rk *= h
    rg *= h
    return rk, abs(rk - rg)


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    rtol: float = 1e-10,
    atol: float = 1e-13,
    limit: int = 200,
) -> float:
    """Globally adaptive bisection until the error estimate meets max(atol, rtol*|I|)."""
    if a == b:
        return 0.0
    if b < a:
        return -integrate(f, b, a, rtol, atol, limit)
    val, err = gk15(f, a, b)
    heap = [(-err, a, b, val)]
    total, total_err = val, err
    n = 1
    while total_err > max(atol, rtol * abs(total)):
        if n >= limit:
            raise QuadratureError(
                f"no convergence on [{a}, {b}] after {limit} subintervals (error {total_err:.3g})"
            )
        e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = gk15(f, lo, mid)
        v2, e2 = gk15(f, mid, hi)
        total += v1 + v2 - v
        total_err += e1 + e2 + e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n += 1
        if not math.isfinite(total):
            raise QuadratureError(f"non-finite integrand on [{a}, {b}]")
    return total

"""Straightening of symmetries and reduction to nested one-dimensional quadratures.

The straightening step is a finite catalog, probed in order:

(i)   translation fields ``c * d/dx_k`` (``c`` free of ``x_k``);
(ii)  separable fields ``g(x_k) * d/dx_k`` with ``1/g`` in a table of antiderivatives;
(iii) linear fields ``A x . grad``: rational eigenbasis followed by (iv), or a
      single trace-free 2x2 rotation block;
(iv)  Euler fields ``sum lambda_i x_i d/dx_i``.

Every match is certified afterwards: pushforward equal to the unit field,
round-trip identity, and a non-degenerate Jacobian near the working point.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import brentq

from .expr import (
    ONE,
    ZERO,
    CoordinateSystem,
    DomainError,
    Expr,
    Verdict,
    ZeroTest,
    as_expr,
    atan2,
    compile_exprs,
    cos,
    exp,
    is_identically_zero,
    ln,
    root,
    sin,
    sqrt,
)
from .geometry import VectorField
from .liealg import rref
from .quadrature import _WG, _WGK, _XGK, QuadratureError, integrate as quad

_NODES = np.array([-x for x in _XGK[:7]] + [0.0] + [x for x in _XGK[6::-1]])
_WK = np.array(list(_WGK[:7]) + [_WGK[7]] + list(_WGK[6::-1]))
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
_WG7 = np.array([_WG[0], _WG[1], _WG[2], _WG[3], _WG[2], _WG[1], _WG[0]])
from .symmetry import commutator, is_symmetry


class ReductionError(RuntimeError):
    def __init__(self, message: str, stage: int | None = None):
        self.stage = stage
        prefix = f"stage {stage}: " if stage is not None else ""
        super().__init__(prefix + message)


class NotStraightenable(ReductionError):
    def __init__(self, message: str, probes: Sequence[str] = (), stage: int | None = None):
        self.probes = list(probes)
        self.message = message
        detail = message + ("; probes: " + "; ".join(self.probes) if self.probes else "")
        super().__init__(detail, stage)


class DependenceResidual(ReductionError):
    pass


class NotASymmetry(ReductionError):
    pass


# ---------------------------------------------------------------------------


def _prime(name: str) -> str:
    return name + "'"


@dataclass
class CoordinateChange:
    source: CoordinateSystem
    target: CoordinateSystem
    forward: tuple[Expr, ...]  # target coordinates in terms of source coordinates
    inverse: tuple[Expr, ...]  # source coordinates in terms of target coordinates
    straight_index: int
    case: str

    @property
    def straightened(self) -> str:
        return self.target.names[self.straight_index]

    def to_target(self, e: Expr) -> Expr:
        """Rewrite a source-chart expression in target coordinates."""
        return as_expr(e).subs(dict(zip(self.source.names, self.inverse)))

    def pushforward(self, u: VectorField) -> VectorField:
        return VectorField(self.target, [self.to_target(u.apply(y)) for y in self.forward])

    def forward_map(self) -> Callable:
        return compile_exprs(self.forward, self.source.names)

    def inverse_map(self) -> Callable:
        return compile_exprs(self.inverse, self.target.names)

    def describe(self) -> dict:
        return {
            "case": self.case,
            "straightened": self.straightened,
            "forward": {n: str(e) for n, e in zip(self.target.names, self.forward)},
            "inverse": {n: str(e) for n, e in zip(self.source.names, self.inverse)},
        }


def _const(e: Expr) -> Fraction | None:
    return e.const_value()


def _free_of(e: Expr, name: str) -> bool:
    return name not in e.free_vars


def _linear_in(e: Expr, x: str) -> tuple[Expr, Expr] | None:
    """(a, b) with e = a*x + b, a and b free of x."""
    if e.den and not all(_free_of(Expr(p.terms), x) for p, _ in e.den):
        return None
    a = e.diff(x)
    if not _free_of(a, x):
        return None
    b = e - a * Expr.var(x)
    if not _free_of(b, x):
        return None
    return a, b


def _sign_at(e: Expr, point: dict) -> int:
    from .expr import evaluate

    v = evaluate(e, point)
    if v == 0:
        raise ValueError("zero at the working point")
    return 1 if v > 0 else -1


def _identity_except(chart: CoordinateSystem, k: int, fwd_k: Expr, inv_k: Expr, case: str):
    names = list(chart.names)
    new = names[:]
    new[k] = _prime(names[k])
    target = CoordinateSystem(new, chart.roles)
    y = Expr.var(new[k])
    forward = [Expr.var(n) for n in names]
    forward[k] = fwd_k
    inverse = [Expr.var(n) for n in names]
    # inverse given in terms of the new straightened variable and the untouched others
    inverse[k] = inv_k.subs({"__y__": y})
    return CoordinateChange(chart, target, tuple(forward), tuple(inverse), k, case)


# -- case (i) ----------------------------------------------------------------


def _probe_translation(u: VectorField, point: dict):
    nz = [i for i, c in enumerate(u.components) if not c.is_zero]
    if len(nz) != 1:
        return None, "translation: more than one nonzero component"
    k = nz[0]
    x = u.chart.names[k]
    c = u.components[k]
    if not _free_of(c, x):
        return None, f"translation: coefficient depends on {x}"
    y = Expr.var("__y__")
    return _identity_except(u.chart, k, Expr.var(x) / c, y * c, "translation"), ""


# -- case (ii) ---------------------------------------------------------------


def _split_base(g: Expr, x: str):
    """Write g = C * B where B is the only factor depending on x; returns (C, kind, data)."""
    if g.den:
        xden = [(p, e) for p, e in g.den if not _free_of(Expr(p.terms), x)]
        if len(xden) != 1 or not _free_of(Expr(g.num), x):
            return None
        p, e = xden[0]
        P = Expr(p.terms)
        lin = _linear_in(P, x)
        if lin is None:
            return None
        C = g * P**e
        if not _free_of(C, x):
            return None
        return C, "power", (P, -e)
    if len(g.num) == 1:
        ((m, c),) = g.num.items()
        xg = [(gen, e) for gen, e in m if x in gen.free]
        if len(xg) != 1:
            return None
        gen, e = xg[0]
        B = Expr({((gen, 1),): Fraction(1)})
        C = g / B**e
        if not _free_of(C, x):
            return None
        from .expr import Atom, Var

        if isinstance(gen, Var):
            return C, "power", (Expr.var(x), e)
        if gen.func in ("exp", "sin", "cos") and _linear_in(gen.args[0], x):
            if gen.func == "exp":
                return C, "exp", (gen.args[0] * e,)
            if e == 1:
                return C, gen.func, (gen.args[0],)
        return None
    lin = _linear_in(g, x)
    if lin is not None:
        return ONE, "power", (g, 1)
    return None


def _probe_separable(u: VectorField, point: dict):
    nz = [i for i, c in enumerate(u.components) if not c.is_zero]
    if len(nz) != 1:
        return None, "separable: more than one nonzero component"
    k = nz[0]
    x = u.chart.names[k]
    g = u.components[k]
    split = _split_base(g, x)
    if split is None:
        return None, f"separable: {g} is not in the antiderivative table"
    C, kind, data = split
    Y = Expr.var("__y__")
    X = Expr.var(x)
    try:
        if kind == "power":
            L, kappa = data
            a, b = _linear_in(L, x)
            sigma = _sign_at(L, point)
            if kappa == 1:
                fwd = ln(L * sigma) / (C * a)
                Linv = exp(C * a * Y) * sigma
            else:
                mexp = 1 - kappa
                fwd = L**mexp / (C * a * mexp)
                w = C * a * mexp * Y
                sm = sigma**mexp
                Linv = root(w * sm, abs(mexp)) ** (1 if mexp > 0 else -1) * sigma
            inv = (Linv - b) / a
        elif kind == "exp":
            (L,) = data
            a, b = _linear_in(L, x)
            fwd = -exp(-L) / (C * a)
            inv = (-ln(-C * a * Y) - b) / a
        else:
            (L,) = data
            a, b = _linear_in(L, x)
            if kind == "sin":
                T = sin(L) / (1 + cos(L))
                sigma = _sign_at(T, point)
                fwd = ln(T * sigma) / (C * a)
                Tv = exp(C * a * Y) * sigma
                Linv = atan2(2 * Tv, 1 - Tv * Tv)
            else:
                T = (1 + sin(L)) / cos(L)
                sigma = _sign_at(T, point)
                fwd = ln(T * sigma) / (C * a)
                Tv = exp(C * a * Y) * sigma
                Linv = atan2(Tv * Tv - 1, 2 * Tv)
            inv = (Linv - b) / a
    except (ValueError, ZeroDivisionError, DomainError) as exc:
        return None, f"separable: {exc}"
    del X
    return _identity_except(u.chart, k, fwd, inv, f"separable ({kind})"), ""


# -- cases (iii) and (iv) -------------------------------------------------------


def _linear_matrix(u: VectorField):
    names = u.chart.names
    d = len(names)
    A = [[Fraction(0)] * d for _ in range(d)]
    for i, c in enumerate(u.components):
        if c.is_zero:
            continue
        if not c.is_polynomial():
            return None
        for m, coef in c.num.items():
            if len(m) != 1 or m[0][1] != 1:
                return None
            A[i][names.index(m[0][0].name)] = coef
    return A


def _charpoly(A):
    """Coefficients c_0..c_d of det(lambda I - A), highest first (Faddeev-LeVerrier)."""
    d = len(A)
    M = [[Fraction(0)] * d for _ in range(d)]
    coeffs = [Fraction(1)]
    for k in range(1, d + 1):
        AM = [[sum(A[i][l] * M[l][j] for l in range(d)) for j in range(d)] for i in range(d)]
        M = [[AM[i][j] + (coeffs[-1] if i == j else 0) for j in range(d)] for i in range(d)]
        AM = [[sum(A[i][l] * M[l][j] for l in range(d)) for j in range(d)] for i in range(d)]
        coeffs.append(-sum(AM[i][i] for i in range(d)) / k)
    return coeffs


def _divisors(n: int):
    n = abs(n)
    out = set()
    i = 1
    while i * i <= n:
        if n % i == 0:
            out.update((i, n // i))
        i += 1
    return out


def _rational_roots(coeffs):
    """Rational roots (with multiplicity) of a polynomial given highest-first."""
    den = math.lcm(*(c.denominator for c in coeffs))
    ints = [int(c * den) for c in coeffs]
    roots = []
    while len(ints) > 1 and ints[-1] == 0:
        roots.append(Fraction(0))
        ints.pop()
    if len(ints) == 1:
        return roots
    lead, const = ints[0], ints[-1]
    if abs(const) > 10**12 or abs(lead) > 10**12:
        return None
    for p in sorted(_divisors(const)):
        for q in sorted(_divisors(lead)):
            for r in (Fraction(p, q), Fraction(-p, q)):
                while len(ints) > 1:
                    # synthetic division
                    acc = Fraction(0)
                    out = []
                    for c in ints:
                        acc = acc * r + c
                        out.append(acc)
                    if acc != 0:
                        break
                    roots.append(r)
                    ints = out[:-1]
    return roots


def _nullspace(M):
    d = len(M[0])
    red, piv = rref(M)
    free = [j for j in range(d) if j not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * d
        v[f] = Fraction(1)
        for r, p in enumerate(piv):
            v[p] = -red[r][f]
        basis.append(v)
    return basis


def rational_diagonalization(A):
    """Left eigenvectors P (rows) and eigenvalues with P A = diag(lam) P, or None."""
    d = len(A)
    roots = _rational_roots(_charpoly(A))
    if roots is None or len(roots) != d:
        return None
    rows, lams = [], []
    for lam in sorted(set(roots)):
        At = [[A[j][i] - (lam if i == j else 0) for j in range(d)] for i in range(d)]
        ns = _nullspace(At)
        rows.extend(ns)
        lams.extend([lam] * len(ns))
    if len(rows) != d:
        return None
    return rows, lams


def _euler_change(chart, lams, point, pre=None, pre_inv=None, case="euler"):
    """Straighten sum lam_i w_i d/dw_i where w = pre(x) (default identity)."""
    names = chart.names
    d = len(names)
    W = list(pre) if pre is not None else [Expr.var(n) for n in names]
    from .expr import evaluate

    wvals = [evaluate(w, point) for w in W]
    piv = None
    for j in range(d - 1, -1, -1):
        if lams[j] != 0 and abs(wvals[j]) > 1e-12:
            piv = j
            break
    if piv is None:
        return None, f"{case}: field vanishes at the working point"
    lj = lams[piv]
    sigma = 1 if wvals[piv] > 0 else -1
    new = [_prime(n) if (lams[i] != 0 or pre is not None) else n for i, n in enumerate(names)]
    target = CoordinateSystem(new, chart.roles)
    sw = W[piv] * sigma
    forward = []
    for i in range(d):
        if i == piv:
            forward.append(ln(sw) / lj)
        elif lams[i] != 0:
            forward.append(W[i] * sw ** (-lams[i] / lj))
        else:
            forward.append(W[i])
    Y = [Expr.var(n) for n in new]
    wy = []
    for i in range(d):
        if i == piv:
            wy.append(exp(Y[piv] * lj) * sigma)
        elif lams[i] != 0:
            wy.append(Y[i] * exp(Y[piv] * lams[i]))
        else:
            wy.append(Y[i])
    if pre_inv is not None:
        inverse = [e.subs({f"__w{i}__": wy[i] for i in range(d)}) for e in pre_inv]
    else:
        inverse = wy
    return CoordinateChange(chart, target, tuple(forward), tuple(inverse), piv, case), ""


def _probe_linear(u: VectorField, point: dict):
    A = _linear_matrix(u)
    if A is None:
        return None, "linear: components are not linear homogeneous with constant coefficients"
    names = u.chart.names
    d = len(names)
    diag = rational_diagonalization(A)
    if diag is not None:
        P, lams = diag
        if all(A[i][j] == 0 for i in range(d) for j in range(d) if i != j):
            return None, "linear: already diagonal (Euler case)"
        X = [Expr.var(n) for n in names]
        pre = [sum((X[j] * P[i][j] for j in range(d) if P[i][j]), ZERO) for i in range(d)]
        Pinv = _invert(P)
        pre_inv = [
            sum((Expr.var(f"__w{j}__") * Pinv[i][j] for j in range(d) if Pinv[i][j]), ZERO)
            for i in range(d)
        ]
        ch, why = _euler_change(u.chart, lams, point, pre, pre_inv, "linear (rational eigenbasis)")
        return ch, why
    # a single trace-free 2x2 rotation block
    active = [i for i in range(d) if any(A[i]) or any(A[r][i] for r in range(d))]
    if len(active) != 2:
        return None, "linear: not diagonalizable over the rationals and not a plane rotation"
    ia, ib = active
    a, b, c, dd = A[ia][ia], A[ia][ib], A[ib][ia], A[ib][ib]
    det = a * dd - b * c
    if a + dd != 0 or det <= 0:
        return None, "linear: 2x2 block is not a rotation (needs zero trace, positive determinant)"
    omega = sqrt(Expr.const(det))
    xa, xb = Expr.var(names[ia]), Expr.var(names[ib])
    xi = xa
    eta = (xa * a + xb * b) / omega
    new = list(names)
    new[ia], new[ib] = _prime(names[ia]), _prime(names[ib])
    target = CoordinateSystem(new, u.chart.roles)
    forward = [Expr.var(n) for n in names]
    forward[ia] = sqrt(xi * xi + eta * eta)
    forward[ib] = atan2(xi, eta) / omega
    r, phi = Expr.var(new[ia]), Expr.var(new[ib])
    xi_y = r * sin(phi * omega)
    eta_y = r * cos(phi * omega)
    inverse = [Expr.var(n) for n in names]
    inverse[ia] = xi_y
    inverse[ib] = (eta_y * omega - xi_y * a) / b
    return CoordinateChange(u.chart, target, tuple(forward), tuple(inverse), ib, "linear (rotation)"), ""


def _invert(P):
    d = len(P)
    aug = [list(P[i]) + [Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    red, _ = rref(aug)
    return [row[d:] for row in red]


def _probe_euler(u: VectorField, point: dict):
    names = u.chart.names
    lams = []
    for n, c in zip(names, u.components):
        if c.is_zero:
            lams.append(Fraction(0))
            continue
        lam = (c / Expr.var(n)).const_value()
        if lam is None:
            return None, f"euler: component {n} is not a constant multiple of {n}"
        lams.append(lam)
    return _euler_change(u.chart, lams, point)


_CATALOG = (
    ("(i) translation", _probe_translation),
    ("(ii) separable", _probe_separable),
    ("(iii) linear", _probe_linear),
    ("(iv) euler", _probe_euler),
)


def _box_points(chart, center, rng, count=50, radius=0.1):
    c = np.asarray(center, dtype=float)
    scale = radius * (1 + np.abs(c))
    return [c + rng.uniform(-1, 1, size=len(c)) * scale for _ in range(count)]


def _certify(ch: CoordinateChange, u: VectorField, center) -> str:
    """Empty string on success, else the reason."""
    pt = dict(zip(ch.source.names, map(float, center)))
    try:
        fwd = ch.forward_map()
        inv = ch.inverse_map()
        y0 = fwd(center)
        x_back = inv(y0)
    except DomainError as exc:
        return f"map undefined at the working point ({exc})"
    if max(abs(a - b) for a, b in zip(x_back, center)) > 1e-9 * (1 + max(map(abs, center))):
        return "inverse does not undo forward at the working point (branch mismatch)"
    # Jacobian determinant of the forward map
    J = compile_exprs([y.diff(n) for y in ch.forward for n in ch.source.names], ch.source.names)
    d = ch.source.dim
    try:
        det = float(np.linalg.det(np.array(J(center)).reshape(d, d)))
    except DomainError as exc:
        return f"Jacobian undefined ({exc})"
    if not abs(det) > 1e-6:
        return f"Jacobian determinant {det:.3g} too small"
    # round trip: symbolic where possible, else sampled in a box around the center
    trip = [e.subs(dict(zip(ch.source.names, ch.inverse))) for e in ch.forward]
    tests = [is_identically_zero(t - Expr.var(n)) for t, n in zip(trip, ch.target.names)]
    if not all(t is ZeroTest.ZERO for t in tests):
        rng = np.random.default_rng(0)
        checked = 0
        for x in _box_points(ch.source.names, center, rng):
            try:
                xb = inv(fwd(x))
            except DomainError:
                continue
            checked += 1
            if max(abs(a - b) for a, b in zip(xb, x)) > 1e-9 * (1 + max(map(abs, x))):
                return "round trip fails near the working point"
        if checked < 25:
            return "round trip could not be sampled near the working point"
    # pushforward of u must be the unit field
    pu = ch.pushforward(u)
    for i, c in enumerate(pu.components):
        want = ONE if i == ch.straight_index else ZERO
        z = is_identically_zero(c - want)
        if z is ZeroTest.ZERO:
            continue
        if z is ZeroTest.NONZERO:
            return f"pushforward component {ch.target.names[i]} is {c}, not {want}"
        # transcendental: accept only when it vanishes at the working point's neighbourhood
        fn = compile_exprs((c - want,), ch.target.names)
        rng = np.random.default_rng(1)
        for x in _box_points(ch.source.names, center, rng, 25):
            try:
                if abs(fn(fwd(x))[0]) > 1e-9:
                    return f"pushforward component {ch.target.names[i]} is not {want}"
            except DomainError:
                continue
    del pt
    return ""


def straighten(u: VectorField, center) -> CoordinateChange:
    center = [float(v) for v in center]
    point = dict(zip(u.chart.names, center))
    try:
        uc = compile_exprs(u.components, u.chart.names)(center)
    except DomainError as exc:
        raise NotStraightenable(f"field undefined at the working point ({exc})") from None
    if max(abs(v) for v in uc) <= 1e-12:
        raise NotStraightenable("field has an equilibrium at the working point")
    probes = []
    for label, probe in _CATALOG:
        try:
            ch, why = probe(u, point)
        except (ValueError, ZeroDivisionError, DomainError) as exc:
            ch, why = None, f"{label}: {exc}"
        if ch is None:
            probes.append(why or f"{label}: no match")
            continue
        reason = _certify(ch, u, center)
        if reason:
            probes.append(f"{label}: matched but {reason}")
            continue
        return ch
    raise NotStraightenable("no catalog case straightens the field", probes)


# ---------------------------------------------------------------------------
# reduction


def _drop(v: VectorField, k: int) -> VectorField:
    chart = v.chart
    names = chart.names[:k] + chart.names[k + 1 :]
    roles = chart.roles[:k] + chart.roles[k + 1 :]
    return VectorField(CoordinateSystem(names, roles), v.components[:k] + v.components[k + 1 :])


@dataclass
class Quadrature:
    variable: str
    rhs: Expr  # on the reduced chart
    chart: CoordinateSystem

    def describe(self) -> dict:
        return {"variable": self.variable, "rhs": str(self.rhs)}


@dataclass
class ReducedSystem:
    field: VectorField

    def describe(self) -> dict:
        return {"chart": list(self.field.chart.names), "field": self.field.as_dict()}


def _independent_of(v: VectorField, name: str, skip: int | None = None) -> Verdict:
    return Verdict.all(
        Verdict.zero(is_identically_zero(c.diff(name)))
        for i, c in enumerate(v.components)
        if i != skip
    )


def _why(v: Verdict) -> str:
    return " (zero test undecided)" if v is Verdict.UNKNOWN else ""


def reduce_once(v: VectorField, u: VectorField, center, stage: int | None = None):
    """Straighten u, push v forward, split off the straightened equation."""
    sv = is_symmetry(u, v)
    if sv is not Verdict.YES:
        raise NotASymmetry(f"[u, v] = 0 is not certified ({sv.value})", stage)
    try:
        ch = straighten(u, center)
    except NotStraightenable as exc:
        raise NotStraightenable(exc.message, exc.probes, stage) from None
    vbar = ch.pushforward(v)
    y = ch.straightened
    dep = _independent_of(vbar, y)
    if dep is not Verdict.YES:
        raise DependenceResidual(
            f"transformed field depends on the straightened coordinate {y}{_why(dep)}", stage
        )
    k = ch.straight_index
    reduced = _drop(vbar, k)
    quad_stage = Quadrature(y, vbar.components[k], reduced.chart)
    return reduced, quad_stage, ch


# ---------------------------------------------------------------------------
# solution of the reduced chain


class _Solution:
    """Callable s -> state on a chart."""

    def __call__(self, s: float) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class _Quad:
    """y(s) = y0 + int_0^s g(state(s')) ds'.

    The parameter line is covered by adaptively sized Gauss-Kronrod panels
    grown outward from 0.  Each accepted panel keeps the Legendre interpolant
    of its integrand at the 15 Kronrod nodes, so y can be read anywhere inside
    it without further evaluations of the nested stages.
    """

    def __init__(self, g: Callable, state: Callable, y0: float, rtol: float = 1e-10, atol: float = 1e-13):
        self.g = g
        self.state = state
        self.rtol, self.atol = rtol, atol
        # per direction: list of (a, b, y(a), antiderivative coefficients), frontier, width
        self.panels = {1: [], -1: []}
        self.front = {1: (0.0, y0), -1: (0.0, y0)}
        self.width = {1: 0.5, -1: 0.5}
        self.y0 = y0

    def integrand(self, s):
        return self.g(self.state(s))[0]

    def _extend(self, d: int):
        a, ya = self.front[d]
        w = self.width[d]
        for _ in range(60):
            b = a + d * w
            lo, hi = min(a, b), max(a, b)
            c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
            fk = np.array([self.integrand(c + h * x) for x in _NODES])
            k = h * float(fk @ _WK)
            gauss = h * float(fk[_GAUSS_IDX] @ _WG7)
            mag = h * float(np.abs(fk) @ _WK)
            if not math.isfinite(k):
                raise QuadratureError(f"non-finite integrand on [{lo}, {hi}]")
            if abs(k - gauss) <= max(self.atol * h, self.rtol * mag) or w < 1e-9:
                if w < 1e-9:
                    raise QuadratureError(f"panel width underflow near s={a}")
                coef = legendre.legint(legendre.legfit(_NODES, fk, 14), lbnd=-1) * h
                ylo = ya if d == 1 else ya - k
                self.panels[d].append((lo, hi, ylo, coef))
                yb = ya + d * k
                self.front[d] = (b, yb)
                self.width[d] = min(2 * w, 1.0)
                return
            w /= 2
        raise QuadratureError(f"no convergence near s={a}")

    def __call__(self, s: float) -> float:
        if s == 0:
            return self.y0
        d = 1 if s > 0 else -1
        while (self.front[d][0] - s) * d < 0:
            self._extend(d)
        panels = self.panels[d]
        if d == 1:
            i = bisect.bisect_left([p[1] for p in panels], s)
        else:
            i = bisect.bisect_left([-p[0] for p in panels], -s)
        lo, hi, ylo, coef = panels[min(i, len(panels) - 1)]
        x = (2 * s - lo - hi) / (hi - lo)
        return ylo + float(legendre.legval(x, coef))


@dataclass
class Stage:
    kind: str  # "reduce" or "core"
    detail: dict


@dataclass
class QuadratureSchedule:
    stages: list[Stage] = field(default_factory=list)

    def describe(self) -> list[dict]:
        return [{"kind": s.kind, **s.detail} for s in self.stages]


def _solve_core(v: VectorField, y0: Sequence[float], schedule: QuadratureSchedule, stage: int):
    names = list(v.chart.names)
    d = len(names)
    if d == 0:
        return lambda s: np.zeros(0)
    solved: dict[str, Callable] = {}
    order: list[str] = []
    record = []
    remaining = set(range(d))
    while remaining:
        progress = False
        for i in sorted(remaining):
            n = names[i]
            rhs = v.components[i]
            deps = rhs.free_vars
            if rhs.is_zero:
                val = float(y0[i])
                solved[n] = (lambda c: (lambda s: c))(val)
                record.append({"variable": n, "solution": "constant"})
            elif deps <= solved.keys():
                c = rhs.const_value()
                if c is not None:
                    y_i, rate = float(y0[i]), float(c)
                    solved[n] = (lambda a, r: (lambda s: a + r * s))(y_i, rate)
                    record.append({"variable": n, "solution": f"{n}0 + ({c})*s"})
                else:
                    dep_names = sorted(deps)
                    g = compile_exprs((rhs,), dep_names)
                    fns = [solved[m] for m in dep_names]
                    state = (lambda fs: (lambda s: [f(s) for f in fs]))(fns)
                    solved[n] = _Quad(g, state, float(y0[i]))
                    record.append({"variable": n, "solution": "quadrature", "rhs": str(rhs)})
            elif deps - {n} <= {m for m in solved if v.components[names.index(m)].is_zero}:
                consts = {m: solved[m](0.0) for m in deps - {n}}
                order_names = [n] + sorted(consts)
                g = compile_exprs((rhs,), order_names)
                extra = [consts[m] for m in order_names[1:]]
                solved[n] = _autonomous(lambda y: g([y] + extra)[0], float(y0[i]), stage)
                record.append({"variable": n, "solution": "inverted quadrature", "rhs": str(rhs)})
            else:
                continue
            order.append(n)
            remaining.discard(i)
            progress = True
            break
        if not progress:
            left = [names[i] for i in sorted(remaining)]
            raise ReductionError(
                f"symmetry package is short: the core system in {left} is not triangular", stage
            )
    schedule.stages.append(Stage("core", {"chart": names, "solutions": record}))
    fns = [solved[n] for n in names]
    return lambda s: np.array([f(s) for f in fns])


def _autonomous(g: Callable[[float], float], y0: float, stage: int):
    """Solve y' = g(y) by inverting s = int_{y0}^{y} dy/g."""
    g0 = g(y0)
    if g0 == 0:
        return lambda s: y0
    direction = 1.0 if g0 > 0 else -1.0

    def elapsed(y):
        return quad(lambda w: 1.0 / g(w), y0, y)

    def solve(s):
        if s == 0:
            return y0
        want = s
        step = max(1e-3, abs(g0) * abs(s))
        lo = y0
        hi = y0 + direction * math.copysign(step, s)
        for _ in range(200):
            try:
                if (elapsed(hi) - want) * math.copysign(1, s) >= 0:
                    break
            except (QuadratureError, ZeroDivisionError, DomainError):
                raise ReductionError("inverted quadrature left the domain (blow-up)", stage) from None
            lo, hi = hi, y0 + (hi - y0) * 2
        else:
            raise ReductionError("inverted quadrature did not bracket the solution", stage)
        return brentq(lambda y: elapsed(y) - want, lo, hi, xtol=1e-14, rtol=1e-14)

    return solve


def _solve(v: VectorField, syms: list[VectorField], x0, schedule, stage: int):
    if not syms:
        return _solve_core(v, x0, schedule, stage)
    u = syms[0]
    reduced, qstage, ch = reduce_once(v, u, x0, stage)
    k = ch.straight_index
    y0 = list(ch.forward_map()(x0))
    rest = []
    for j, w in enumerate(syms[1:], start=1):
        wbar = ch.pushforward(w)
        dep = _independent_of(wbar, ch.straightened, skip=k)
        if dep is not Verdict.YES:
            raise DependenceResidual(
                f"symmetry {stage + j} depends on the straightened coordinate {ch.straightened} "
                f"after reduction{_why(dep)}; the elimination order does not follow an ideal chain",
                stage,
            )
        rest.append(_drop(wbar, k))
    schedule.stages.append(
        Stage("reduce", {"stage": stage, "change": ch.describe(), "quadrature": qstage.describe()})
    )
    sub_y0 = y0[:k] + y0[k + 1 :]
    sub = _solve(reduced, rest, sub_y0, schedule, stage + 1)
    rate = qstage.rhs.const_value()
    if rate is not None:
        yk = (lambda a, r: (lambda s: a + r * s))(y0[k], float(rate))
    else:
        yk = _Quad(compile_exprs((qstage.rhs,), reduced.chart.names), sub, y0[k])
    inv = ch.inverse_map()

    def state(s):
        r = list(sub(s))
        return np.array(inv(r[:k] + [yk(s)] + r[k:]))

    return state


@dataclass
class QuadratureResult:
    params: np.ndarray
    states: np.ndarray
    chart: CoordinateSystem
    schedule: QuadratureSchedule


def integrate_by_quadratures(
    v: VectorField, flagged_symmetries: Sequence[VectorField], x0, t_grid
) -> QuadratureResult:
    x0 = [float(a) for a in x0]
    if len(x0) != v.chart.dim:
        raise ValueError(f"initial point must have {v.chart.dim} coordinates")
    for w in flagged_symmetries:
        if w.chart != v.chart:
            raise ReductionError("symmetry lives on a different chart")
    schedule = QuadratureSchedule()
    state = _solve(v, list(flagged_symmetries), x0, schedule, 1)
    grid = np.asarray(t_grid, dtype=float)
    out = []
    try:
        for s in grid:
            out.append(state(float(s) - float(grid[0])))
    except QuadratureError as exc:
        raise ReductionError(f"quadrature failed: {exc}") from exc
    except DomainError as exc:
        raise ReductionError(f"trajectory left the chart of the coordinate change: {exc}") from exc
    return QuadratureResult(grid, np.array(out), v.chart, schedule)

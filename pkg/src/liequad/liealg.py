"""Structure constants, derived series and solvable flags."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .expr import (
    DomainError,
    Expr,
    Verdict,
    ZeroTest,
    compile_exprs,
    is_identically_zero,
)
from .geometry import VectorField

Vec = tuple[Fraction, ...]


class LieAlgebraError(Exception):
    pass


class NotClosed(LieAlgebraError):
    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


class LinearlyDependentBasis(LieAlgebraError):
    pass


class NotSolvable(LieAlgebraError):
    def __init__(self, message: str, series_dims: tuple[int, ...] = ()):
        super().__init__(message)
        self.series_dims = series_dims


# ---------------------------------------------------------------------------
# exact linear algebra over the rationals


def rref(rows: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    m = [list(map(Fraction, r)) for r in rows]
    pivots: list[int] = []
    if not m:
        return m, pivots
    ncols = len(m[0])
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows) -> int:
    return len(rref(rows)[1]) if rows else 0


def span_basis(rows) -> list[Vec]:
    return [tuple(r) for r in rref(rows)[0]] if rows else []


def in_span(v, basis) -> bool:
    if not any(v):
        return True
    return rank(list(basis) + [list(v)]) == rank(list(basis))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureConstants:
    """c[i][j][k] with [b_i, b_j] = sum_k c[i][j][k] b_k (0-based storage)."""

    c: tuple[tuple[tuple[Fraction, ...], ...], ...]
    certified_exactly: bool = True

    @classmethod
    def from_nested(cls, c, certified_exactly: bool = True) -> "StructureConstants":
        return cls(
            tuple(tuple(tuple(Fraction(x) for x in row) for row in plane) for plane in c),
            certified_exactly,
        )

    @classmethod
    def zero(cls, m: int) -> "StructureConstants":
        return cls.from_nested([[[0] * m for _ in range(m)] for _ in range(m)])

    @property
    def m(self) -> int:
        return len(self.c)

    def bracket(self, u: Sequence[Fraction], v: Sequence[Fraction]) -> Vec:
        m = self.m
        out = [Fraction(0)] * m
        for i in range(m):
            if not u[i]:
                continue
            for j in range(m):
                if not v[j]:
                    continue
                w = u[i] * v[j]
                for k, x in enumerate(self.c[i][j]):
                    if x:
                        out[k] += w * x
        return tuple(out)

    def is_antisymmetric(self) -> bool:
        m = self.m
        return all(
            self.c[i][j][k] == -self.c[j][i][k]
            for i in range(m)
            for j in range(m)
            for k in range(m)
        )

    def satisfies_jacobi(self) -> bool:
        m, c = self.m, self.c
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    for l in range(m):
                        s = sum(
                            c[i][j][p] * c[p][k][l] + c[j][k][p] * c[p][i][l] + c[k][i][p] * c[p][j][l]
                            for p in range(m)
                        )
                        if s:
                            return False
        return True

    def is_abelian(self) -> bool:
        return not any(x for plane in self.c for row in plane for x in row)

    def nonzero_entries(self) -> list[tuple[int, int, int, Fraction]]:
        """1-based (i, j, k, c^k_ij) for i < j."""
        return [
            (i + 1, j + 1, k + 1, self.c[i][j][k])
            for i in range(self.m)
            for j in range(i + 1, self.m)
            for k in range(self.m)
            if self.c[i][j][k]
        ]

    def to_json(self) -> list:
        return [[[str(x) for x in row] for row in plane] for plane in self.c]

    def change_basis(self, P) -> "StructureConstants":
        """Constants in the basis e'_a = sum_i P[a][i] e_i (P invertible, rational)."""
        P = [[Fraction(x) for x in row] for row in P]
        m = self.m
        Pinv = _inverse(P)
        out = [[[Fraction(0)] * m for _ in range(m)] for _ in range(m)]
        for a in range(m):
            for b in range(m):
                w = self.bracket(P[a], P[b])
                # express w (old coordinates) in the new basis: w = sum_c y_c P[c]  ->  y = w Pinv
                for cc in range(m):
                    out[a][b][cc] = sum(w[i] * Pinv[i][cc] for i in range(m))
        return StructureConstants.from_nested(out, self.certified_exactly)


def _inverse(P):
    m = len(P)
    aug = [list(P[i]) + [Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    red, piv = rref(aug)
    if piv[:m] != list(range(m)):
        raise ValueError("singular basis change")
    return [row[m:] for row in red]


# ---------------------------------------------------------------------------
# numeric recovery of constant coefficients


def _sample_points(names, rng, count, fns, max_attempts=2000):
    """Points in [-2,2]^dim where every compiled function evaluates finitely."""
    pts, vals = [], []
    attempts = 0
    while len(pts) < count and attempts < max_attempts:
        attempts += 1
        x = rng.uniform(-2.0, 2.0, size=len(names))
        try:
            row = [fn(x) for fn in fns]
        except DomainError:
            continue
        flat = np.concatenate([np.asarray(r, dtype=float) for r in row])
        if not np.all(np.isfinite(flat)):
            continue
        pts.append(x)
        vals.append(row)
    return pts, vals


def _elements_as_rows(elems) -> tuple[list[list[Expr]], tuple[str, ...]]:
    """Flatten scalar fields (one row) or vector fields (one row of components)."""
    if isinstance(elems[0], VectorField):
        names = elems[0].chart.names
        return [list(v.components) for v in elems], names
    names = tuple(sorted(set().union(*(e.free_vars for e in elems))))
    return [[e] for e in elems], names


def _snap(x: float, max_den: int = 10**6) -> Fraction:
    return Fraction(float(x)).limit_denominator(max_den)


@dataclass
class CoefficientSolve:
    coefficients: list[Fraction] | None
    verdict: Verdict  # YES certified, NO shown outside span, UNKNOWN numeric only
    residual: float


def solve_constant_coefficients(
    target, basis, *, names=None, seed: int = 0, extra_points: int = 5, tol: float = 1e-9
) -> CoefficientSolve:
    """Find rational constants lam with target = sum lam_j basis_j.

    ``target`` and ``basis`` entries are Expr or VectorField (uniform).
    """
    elems = [target] + list(basis)
    rows, auto_names = _elements_as_rows(elems)
    names = tuple(names) if names is not None else auto_names
    width = len(rows[0])
    m = len(basis)
    if m == 0:
        z = Verdict.all(Verdict.zero(is_identically_zero(e)) for e in rows[0])
        return CoefficientSolve([] if z is not Verdict.NO else None, z, 0.0)
    fns = [compile_exprs(r, names) for r in rows]
    rng = np.random.default_rng(seed)
    npts = max(m + extra_points, 25 // max(width, 1) + 1)
    pts, vals = _sample_points(names, rng, npts, fns)
    if len(pts) < m + 1:
        return CoefficientSolve(None, Verdict.UNKNOWN, float("inf"))
    A = np.array([[v[j + 1][w] for v in vals for w in range(width)] for j in range(m)]).T
    b = np.array([v[0][w] for v in vals for w in range(width)])
    lam, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.max(np.abs(A @ lam - b))) if len(b) else 0.0
    lam_q = [_snap(x) for x in lam]
    # exact verification
    res_rows = []
    for w in range(width):
        r = rows[0][w]
        for j in range(m):
            if lam_q[j]:
                r = r - rows[j + 1][w] * lam_q[j]
        res_rows.append(r)
    verdicts = [is_identically_zero(r) for r in res_rows]
    if all(v is ZeroTest.ZERO for v in verdicts):
        return CoefficientSolve(lam_q, Verdict.YES, resid)
    if any(v is ZeroTest.NONZERO for v in verdicts):
        # outside the span, or coefficients that are not constant rationals
        return CoefficientSolve(None, Verdict.NO, resid)
    # transcendental residual: numeric verification at fresh points
    rfn = compile_exprs(res_rows, names)
    vpts, vvals = _sample_points(names, np.random.default_rng(seed + 1), 25, [rfn])
    if not vpts:
        return CoefficientSolve(None, Verdict.UNKNOWN, resid)
    worst = max(max(abs(x) for x in row[0]) for row in vvals)
    if worst <= tol:
        return CoefficientSolve(lam_q, Verdict.UNKNOWN, worst)
    return CoefficientSolve(None, Verdict.NO, worst)


def independence_singular_value(elems, names=None, seed: int = 0) -> float:
    """Smallest singular value of the row-normalized evaluation matrix."""
    rows, auto = _elements_as_rows(list(elems))
    names = tuple(names) if names is not None else auto
    width = len(rows[0])
    m = len(rows)
    fns = [compile_exprs(r, names) for r in rows]
    pts, vals = _sample_points(names, np.random.default_rng(seed), max(m + 5, 8), fns)
    if not pts:
        return 0.0
    M = np.array([[v[j][w] for v in vals for w in range(width)] for j in range(m)])
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms == 0):
        return 0.0
    M = M / norms[:, None]
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def structure_constants(
    basis: Sequence, bracket_fn: Callable, *, seed: int = 0, names=None
) -> StructureConstants:
    """Recover c^k_ij for ``bracket_fn`` on ``basis`` (scalar or vector fields)."""
    basis = list(basis)
    m = len(basis)
    if m == 0:
        raise ValueError("empty basis")
    if len(set(basis)) != m:
        raise LinearlyDependentBasis("basis elements are not pairwise distinct")
    if independence_singular_value(basis, names, seed) <= 1e-8:
        raise LinearlyDependentBasis("basis is linearly dependent (evaluation-matrix rank deficit)")
    c = [[[Fraction(0)] * m for _ in range(m)] for _ in range(m)]
    exact = True
    for i in range(m):
        for j in range(i + 1, m):
            br = bracket_fn(basis[i], basis[j])
            sol = solve_constant_coefficients(br, basis, names=names, seed=seed)
            if sol.coefficients is None:
                if sol.verdict is Verdict.NO:
                    raise NotClosed(
                        f"bracket of elements {i + 1} and {j + 1} is not a constant-coefficient "
                        f"combination of the basis",
                        (i + 1, j + 1),
                    )
                raise NotClosed(
                    f"closure of elements {i + 1} and {j + 1} could not be verified", (i + 1, j + 1)
                )
            if sol.verdict is not Verdict.YES:
                exact = False
            for k in range(m):
                c[i][j][k] = sol.coefficients[k]
                c[j][i][k] = -sol.coefficients[k]
    return StructureConstants.from_nested(c, exact)


# ---------------------------------------------------------------------------
# derived series and flags


def _unit(m, i) -> Vec:
    return tuple(Fraction(int(k == i)) for k in range(m))


def derived_algebra(c: StructureConstants, span: Sequence[Vec]) -> list[Vec]:
    brs = [c.bracket(u, v) for a, u in enumerate(span) for v in span[a + 1 :]]
    return span_basis([b for b in brs if any(b)])


@dataclass(frozen=True)
class SolvabilityResult:
    solvable: bool
    series_dims: tuple[int, ...]
    series: tuple[tuple[Vec, ...], ...]

    def __bool__(self):
        return self.solvable


def is_solvable(c: StructureConstants) -> SolvabilityResult:
    """Derived series g, [g,g], ...; dims end at 0 or at the first repeat."""
    m = c.m
    cur = [_unit(m, i) for i in range(m)]
    series = [tuple(cur)]
    dims = [len(cur)]
    while cur:
        nxt = derived_algebra(c, cur)
        series.append(tuple(nxt))
        dims.append(len(nxt))
        if len(nxt) == len(cur):
            break
        cur = nxt
    return SolvabilityResult(dims[-1] == 0, tuple(dims), tuple(series))


@dataclass(frozen=True)
class SolvableFlag:
    """L_0 = {0} < L_1 < ... < L_m; ``directions[i]`` spans L_{i+1} together with L_i."""

    directions: tuple[Vec, ...]

    @property
    def subspaces(self) -> list[list[Vec]]:
        return [list(self.directions[:i]) for i in range(len(self.directions) + 1)]

    def order(self) -> list[int]:
        """Basis indices (0-based) when every direction is a basis vector, else empty."""
        out = []
        for d in self.directions:
            nz = [i for i, x in enumerate(d) if x]
            if len(nz) != 1:
                return []
            out.append(nz[0])
        return out

    def to_json(self) -> list:
        return [[str(x) for x in d] for d in self.directions]


def _flag_directions(c: StructureConstants, g: list[Vec]) -> list[Vec]:
    """Directions e_1..e_d (innermost first) for the subalgebra spanned by ``g``."""
    if len(g) == 1:
        return [g[0]]
    if not g:
        return []
    D = derived_algebra(c, g)
    if len(D) >= len(g):
        raise NotSolvable("derived algebra does not shrink")
    # hyperplane H containing D: extend D greedily by g's vectors, drop the last new one
    chosen = list(D)
    extra: list[Vec] = []
    for v in g:
        if not in_span(v, chosen):
            chosen.append(v)
            extra.append(v)
    dropped = extra[-1]
    H = list(D) + extra[:-1]
    return _flag_directions(c, H) + [dropped]


def check_flag(c: StructureConstants, directions: Sequence[Vec]) -> bool:
    """Exact ideal condition [L_{i+1}, L_i] in L_i and dimension steps of one."""
    for i in range(1, len(directions) + 1):
        Li = list(directions[:i])
        if rank(Li) != i:
            return False
    for i in range(1, len(directions)):
        Li = list(directions[:i])
        for u in directions[: i + 1]:
            for v in Li:
                if not in_span(c.bracket(u, v), Li):
                    return False
    return True


def solvable_flag(c: StructureConstants) -> SolvableFlag:
    res = is_solvable(c)
    if not res.solvable:
        raise NotSolvable(
            f"derived series stabilizes at dimension {res.series_dims[-1]}", res.series_dims
        )
    g = [_unit(c.m, i) for i in range(c.m)]
    dirs = _flag_directions(c, g)
    if len(dirs) != c.m or not check_flag(c, dirs):  # pragma: no cover - guarded by construction
        raise LieAlgebraError("flag construction failed its own ideal check")
    return SolvableFlag(tuple(dirs))


def combine(basis: Sequence, coeffs: Sequence[Fraction]):
    """Linear combination of scalar or vector fields."""
    out = None
    for b, x in zip(basis, coeffs):
        if not x:
            continue
        term = b.scale(x) if isinstance(b, VectorField) else b * x
        out = term if out is None else out + term
    if out is None:
        b = basis[0]
        return b.scale(0) if isinstance(b, VectorField) else b * 0
    return out

"""Commutators, symmetry verdicts, antihomomorphism identities and level sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .brackets import bracket, is_constant_of_motion
from .expr import DomainError, Expr, Verdict, compile_exprs, is_identically_zero
from .geometry import (
    GeometryMismatch,
    HamiltonianSystem,
    Kind,
    PhaseGeometry,
    VectorField,
    dynamics_field,
    hamiltonian_vector_field,
    reeb,
)
from .liealg import solve_constant_coefficients


class InapplicableHypothesis(ValueError):
    pass


class NoSamplePoints(ValueError):
    pass


class NoPointFound(ValueError):
    pass


def commutator(u: VectorField, v: VectorField) -> VectorField:
    """[u,v]^i = u(v^i) - v(u^i)."""
    if u.chart != v.chart:
        raise GeometryMismatch("commutator of fields on different charts")
    return VectorField(u.chart, [u.apply(b) - v.apply(a) for a, b in zip(u.components, v.components)])


def is_symmetry(u: VectorField, v: VectorField) -> Verdict:
    return commutator(u, v).is_zero()


@dataclass
class IdentityCheck:
    residual: VectorField
    verdict: Verdict


def check_antihomomorphism(g: PhaseGeometry, f, h) -> IdentityCheck:
    """Residual X_{f,h} + [X_f, X_h]."""
    f, h = g.scalar(f), g.scalar(h)
    if g.kind.has_z and not (f.diff("z").is_zero and h.diff("z").is_zero):
        name = "R" if g.kind is Kind.CONTACT else "R_z"
        raise InapplicableHypothesis(f"{name}f and {name}h must vanish (inputs depend on z)")
    res = hamiltonian_vector_field(g, bracket(g, f, h)) + commutator(
        hamiltonian_vector_field(g, f), hamiltonian_vector_field(g, h)
    )
    return IdentityCheck(res, res.is_zero())


@dataclass
class ReebIdentity:
    name: str
    verdict: Verdict | None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "identity": self.name,
            "verdict": self.verdict.value if self.verdict else "skipped",
            "reason": self.reason,
        }


def check_reeb_identities(sys: HamiltonianSystem, f) -> list[ReebIdentity]:
    g = sys.geometry
    f = g.scalar(f)
    kind = g.kind
    xf = hamiltonian_vector_field(g, f)
    out: list[ReebIdentity] = []

    def reeb_shift(label: str, rname: str):
        r = reeb(g, rname)
        res = hamiltonian_vector_field(g, r.apply(f)) + commutator(xf, r)
        out.append(ReebIdentity(label, res.is_zero()))

    if kind is Kind.COSYMPLECTIC:
        reeb_shift("X_{Rf} + [X_f, R] = 0", "R")
    if kind is Kind.COCONTACT:
        reeb_shift("X_{R_t f} + [X_f, R_t] = 0", "R_t")

    label = "[E_H, X_f] = 0" if kind.has_time else "[X_H, X_f] = 0"
    com = is_constant_of_motion(sys, f)
    if com is not Verdict.YES:
        out.append(ReebIdentity(label, None, f"f is not certified as a constant of motion ({com.value})"))
    elif kind.has_z and not f.diff("z").is_zero:
        out.append(ReebIdentity(label, None, "f depends on z"))
    elif kind.has_z and not sys.is_good:
        out.append(ReebIdentity(label, None, "system is not good (H depends on z)"))
    else:
        out.append(ReebIdentity(label, is_symmetry(dynamics_field(sys), xf)))

    if kind is Kind.CONTACT:
        if sys.is_good:
            out.append(ReebIdentity("[R, X_H] = 0", is_symmetry(reeb(g, "R"), dynamics_field(sys))))
        else:
            out.append(ReebIdentity("[R, X_H] = 0", None, "system is not good (H depends on z)"))
    if kind is Kind.COCONTACT:
        if sys.is_good:
            out.append(ReebIdentity("[R_z, E_H] = 0", is_symmetry(reeb(g, "R_z"), dynamics_field(sys))))
        else:
            out.append(ReebIdentity("[R_z, E_H] = 0", None, "system is not good (H depends on z)"))
    return out


# ---------------------------------------------------------------------------
# level sets


@dataclass
class LevelSet:
    geometry: PhaseGeometry
    functions: list[Expr]
    values: list[float]
    points: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        self.functions = [self.geometry.scalar(f) for f in self.functions]
        self.values = [float(a) for a in self.values]
        if len(self.functions) != len(self.values):
            raise ValueError("one value per function")
        if len(self.functions) > self.geometry.dim:
            raise ValueError("more functions than chart dimensions")
        self.points = [list(map(float, p)) for p in self.points]
        for p in self.points:
            if len(p) != self.geometry.dim:
                raise ValueError(f"sample point {p} has wrong dimension")
            r = self.residual(p)
            if r > 1e-9:
                raise ValueError(f"sample point {p} is off the level set (residual {r:.3g})")

    @property
    def names(self) -> tuple[str, ...]:
        return self.geometry.chart.names

    def residual(self, x) -> float:
        vals = compile_exprs(self.functions, self.names)(x)
        return max((abs(v - a) for v, a in zip(vals, self.values)), default=0.0)

    def with_points(self, points) -> "LevelSet":
        return LevelSet(self.geometry, self.functions, self.values, points)


def find_level_set_points(
    M: LevelSet, count: int = 5, seed: int = 0, max_seeds: int = 50, iters: int = 100, tol: float = 1e-11
) -> list[list[float]]:
    """Damped Gauss-Newton from uniform seeds in [-2,2]^dim."""
    names = M.names
    F = compile_exprs(M.functions, names)
    J = compile_exprs([f.diff(n) for f in M.functions for n in names], names)
    k, d = len(M.functions), len(names)
    alpha = np.array(M.values)
    rng = np.random.default_rng(seed)
    found: list[list[float]] = []
    for _ in range(max_seeds):
        x = rng.uniform(-2.0, 2.0, size=d)
        try:
            r = np.array(F(x)) - alpha
            for _ in range(iters):
                if np.max(np.abs(r)) <= tol:
                    break
                Jx = np.array(J(x)).reshape(k, d)
                step, *_ = np.linalg.lstsq(Jx, -r, rcond=None)
                lam, norm = 1.0, np.linalg.norm(r)
                while lam > 1e-6:
                    xn = x + lam * step
                    try:
                        rn = np.array(F(xn)) - alpha
                    except DomainError:
                        rn = None
                    if rn is not None and np.all(np.isfinite(rn)) and np.linalg.norm(rn) < norm:
                        break
                    lam /= 2
                else:
                    break
                x, r = xn, rn
        except DomainError:
            continue
        if np.all(np.isfinite(r)) and np.max(np.abs(r)) <= tol:
            found.append([float(v) for v in x])
            if len(found) >= count:
                break
    if not found:
        raise NoPointFound(f"no point on the level set found from {max_seeds} seeds")
    return found


def ensure_points(M: LevelSet, seed: int = 0, count: int = 5) -> LevelSet:
    if M.points:
        return M
    return M.with_points(find_level_set_points(M, count=count, seed=seed))


@dataclass
class IndependenceResult:
    rank: int
    verdict: Verdict
    dim_level_set: int | None
    points: list[list[float]]
    ranks: list[int]


def functional_independence_rank(M: LevelSet, seed: int = 0) -> IndependenceResult:
    M = ensure_points(M, seed)
    names = M.names
    k, d = len(M.functions), len(names)
    J = compile_exprs([f.diff(n) for f in M.functions for n in names], names)
    ranks = []
    for x in M.points:
        A = np.array(J(x)).reshape(k, d)
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms == 0):
            A = A[norms != 0]
            norms = norms[norms != 0]
        if not len(A):
            ranks.append(0)
            continue
        s = np.linalg.svd(A / norms[:, None], compute_uv=False)
        ranks.append(int(np.sum(s > 1e-8)))
    r = min(ranks)
    ok = r == k
    return IndependenceResult(
        r, Verdict.YES if ok else Verdict.NO, d - k if ok else None, M.points, ranks
    )


def tangent_to_level_set(u: VectorField, M: LevelSet, seed: int = 0, tol: float = 1e-8) -> Verdict:
    if u.chart != M.geometry.chart:
        raise GeometryMismatch("field and level set live on different charts")
    pending = []
    shifted = [f - a for f, a in zip(M.functions, M.values)]
    for f in M.functions:
        uf = u.apply(f)
        if uf.is_zero:
            continue
        sol = solve_constant_coefficients(uf, shifted, names=M.names, seed=seed)
        if sol.verdict is Verdict.YES:
            continue
        pending.append(uf)
    if not pending:
        return Verdict.YES
    if not M.points:
        raise NoSamplePoints("tangency needs sample points on the level set")
    fn = compile_exprs(pending, M.names)
    for x in M.points:
        try:
            vals = fn(x)
        except DomainError:
            return Verdict.UNKNOWN
        if any(abs(v) > tol for v in vals):
            return Verdict.NO
    return Verdict.YES

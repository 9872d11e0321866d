"""Integrability-by-quadratures checkers for the four geometries."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .brackets import bracket, is_constant_of_motion
from .expr import Expr, Verdict
from .geometry import (
    CONTACT_SIGN_NOTE,
    TIME_PARAMETER_NOTE,
    HamiltonianSystem,
    Kind,
    VectorField,
    dynamics_field,
    hamiltonian_vector_field,
    reeb,
)
from .liealg import (
    LinearlyDependentBasis,
    NotClosed,
    NotSolvable,
    StructureConstants,
    combine,
    is_solvable,
    solvable_flag,
    structure_constants,
)
from .symmetry import (
    LevelSet,
    NoPointFound,
    NoSamplePoints,
    commutator,
    functional_independence_rank,
    tangent_to_level_set,
)

SCHEMA = 1

THEOREM_BY_KIND = {
    Kind.SYMPLECTIC: "T2",
    Kind.COSYMPLECTIC: "T3",
    Kind.CONTACT: "T4",
    Kind.COCONTACT: "T5",
}


class ArityError(ValueError):
    pass


class Status(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"

    @classmethod
    def of(cls, v: Verdict) -> "Status":
        return {Verdict.YES: cls.HOLDS, Verdict.NO: cls.FAILS}.get(v, cls.UNKNOWN)

    @classmethod
    def combine(cls, statuses) -> "Status":
        ss = list(statuses)
        if any(s is cls.FAILS for s in ss):
            return cls.FAILS
        if all(s is cls.HOLDS for s in ss):
            return cls.HOLDS
        return cls.UNKNOWN


@dataclass
class Hypothesis:
    name: str
    status: Status
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status.value, "detail": self.detail}


@dataclass
class TheoremReport:
    theorem: str
    geometry: Kind
    n: int
    hypotheses: list[Hypothesis]
    verdict: Status
    dim_level_set: int | None
    package: list[tuple[str, VectorField]]
    structure: StructureConstants | None = None
    flag_order: list[int] | None = None
    liouville: bool = False
    points: list[list[float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def hypothesis(self, name: str) -> Hypothesis:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "theorem": self.theorem,
            "geometry": self.geometry.value,
            "n": self.n,
            "liouville_mode": self.liouville,
            "verdict": self.verdict.value,
            "dim_level_set": self.dim_level_set,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "structure_constants": self.structure.to_json() if self.structure else None,
            "package": [{"name": n, "components": v.as_dict()} for n, v in self.package],
            "level_set_points": self.points,
            "notes": self.notes,
        }


def _vector_bracket(u: VectorField, v: VectorField) -> VectorField:
    return commutator(u, v)


def check_integrability(
    sys: HamiltonianSystem,
    fs: Sequence,
    alphas: Sequence[float],
    seed: int = 0,
    points: Sequence[Sequence[float]] | None = None,
    liouville: bool = False,
) -> TheoremReport:
    g = sys.geometry
    kind = g.kind
    n = g.n
    if len(fs) != n:
        raise ArityError(f"{kind.value} n={n} needs exactly {n} functions, got {len(fs)}")
    if len(alphas) != n:
        raise ArityError(f"need exactly {n} level values, got {len(alphas)}")
    fs = [g.scalar(f) for f in fs]
    alphas = [float(a) for a in alphas]
    hyps: list[Hypothesis] = []
    notes: list[str] = []
    if kind.has_z:
        notes.append(CONTACT_SIGN_NOTE)
    if kind is Kind.COCONTACT:
        notes.append(TIME_PARAMETER_NOTE)

    # (a) goodness and (b) Reeb-freeness of the constants
    if kind.has_z:
        Hz = sys.H.diff("z")
        hyps.append(
            Hypothesis(
                "good_system",
                Status.HOLDS if Hz.is_zero else Status.FAILS,
                {"dH/dz": str(Hz)},
            )
        )
        rname = "R" if kind is Kind.CONTACT else "R_z"
        dep = [i + 1 for i, f in enumerate(fs) if not f.diff("z").is_zero]
        hyps.append(
            Hypothesis(
                "reeb_free_constants",
                Status.FAILS if dep else Status.HOLDS,
                {"reeb_field": rname, "z_dependent": dep},
            )
        )

    # (c) constants of motion
    com = [is_constant_of_motion(sys, f) for f in fs]
    hyps.append(
        Hypothesis(
            "constants_of_motion",
            Status.combine(Status.of(v) for v in com),
            {"per_function": [v.value for v in com]},
        )
    )

    # (d) closure
    c: StructureConstants | None = None
    try:
        c = structure_constants(fs, lambda a, b: bracket(g, a, b), seed=seed, names=g.chart.names)
        st = Status.HOLDS if c.certified_exactly else Status.UNKNOWN
        detail = {"nonzero": [[i, j, k, str(x)] for i, j, k, x in c.nonzero_entries()]}
        if not c.certified_exactly:
            detail["note"] = "closure verified numerically only"
        hyps.append(Hypothesis("closure", st, detail))
    except NotClosed as exc:
        hyps.append(Hypothesis("closure", Status.FAILS, {"reason": str(exc), "pair": list(exc.pair or ())}))
    except LinearlyDependentBasis as exc:
        hyps.append(Hypothesis("closure", Status.FAILS, {"reason": str(exc)}))
    if liouville:
        if c is None:
            hyps.append(Hypothesis("abelian", Status.UNKNOWN, {"reason": "closure not established"}))
        else:
            hyps.append(
                Hypothesis(
                    "abelian",
                    Status.HOLDS if c.is_abelian() else Status.FAILS,
                    {"nonzero": [[i, j, k, str(x)] for i, j, k, x in c.nonzero_entries()]},
                )
            )

    # (e) solvability, function level and vector-field level
    xs = [hamiltonian_vector_field(g, f) for f in fs]
    flag_dirs = None
    if c is None:
        hyps.append(Hypothesis("solvable", Status.UNKNOWN, {"reason": "closure not established"}))
    else:
        res = is_solvable(c)
        detail: dict = {"derived_series_dims": list(res.series_dims)}
        st_f = Status.HOLDS if res.solvable else Status.FAILS
        try:
            flag_dirs = solvable_flag(c).directions
            detail["flag"] = [[str(x) for x in d] for d in flag_dirs]
        except NotSolvable:
            pass
        try:
            cv = structure_constants(xs, _vector_bracket, seed=seed)
            rv = is_solvable(cv)
            detail["vector_field_series_dims"] = list(rv.series_dims)
            st_v = Status.HOLDS if rv.solvable else Status.FAILS
            if rv.solvable and not cv.certified_exactly:
                st_v = Status.UNKNOWN
        except (NotClosed, LinearlyDependentBasis) as exc:
            detail["vector_field_error"] = str(exc)
            st_v = Status.FAILS if isinstance(exc, NotClosed) else Status.UNKNOWN
        detail["function_level"] = st_f.value
        detail["vector_field_level"] = st_v.value
        hyps.append(Hypothesis("solvable", Status.combine([st_f, st_v]), detail))

    # (f) functional independence on the level set
    M = LevelSet(g, fs, alphas, list(points or []))
    dim_mf = None
    try:
        ind = functional_independence_rank(M, seed=seed)
        M = M.with_points(ind.points)
        dim_mf = ind.dim_level_set
        hyps.append(
            Hypothesis(
                "functional_independence",
                Status.of(ind.verdict),
                {"rank": ind.rank, "ranks_at_points": ind.ranks, "dim_level_set": dim_mf},
            )
        )
    except NoPointFound as exc:
        hyps.append(Hypothesis("functional_independence", Status.UNKNOWN, {"reason": str(exc)}))

    # (g) c^k_ij alpha_k = 0
    if c is None:
        hyps.append(Hypothesis("alpha_compatibility", Status.UNKNOWN, {"reason": "closure not established"}))
    else:
        bad = None
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                s = sum(float(c.c[i][j][k]) * alphas[k] for k in range(n))
                worst = max(worst, abs(s))
                if abs(s) > 1e-12 and bad is None:
                    bad = (i + 1, j + 1, s)
        if bad:
            hyps.append(
                Hypothesis(
                    "alpha_compatibility",
                    Status.FAILS,
                    {"counterexample": [bad[0], bad[1]], "value": bad[2]},
                )
            )
        else:
            hyps.append(Hypothesis("alpha_compatibility", Status.HOLDS, {"max_abs": worst}))

    # certified package: Reeb field innermost, then X_f in flag order
    package: list[tuple[str, VectorField]] = []
    if kind is Kind.CONTACT:
        package.append(("R", reeb(g, "R")))
    elif kind is Kind.COCONTACT:
        package.append(("R_z", reeb(g, "R_z")))
    flag_order = None
    if flag_dirs is not None:
        for d in flag_dirs:
            nz = [i for i, x in enumerate(d) if x]
            label = (
                f"X_f{nz[0] + 1}"
                if len(nz) == 1 and d[nz[0]] == 1
                else "X(" + " + ".join(f"{x}*f{i + 1}" for i, x in enumerate(d) if x) + ")"
            )
            package.append((label, combine(xs, d)))
        flag_order = [
            next(i for i, x in enumerate(d) if x) + 1 for d in flag_dirs
        ]
    else:
        package.extend((f"X_f{i + 1}", x) for i, x in enumerate(xs))

    # (h) tangency of the package and of the dynamics to M_f
    tang = {}
    for name, u in package + [("dynamics", dynamics_field(sys))]:
        try:
            tang[name] = Status.of(tangent_to_level_set(u, M, seed=seed))
        except NoSamplePoints as exc:
            tang[name] = Status.UNKNOWN
    hyps.append(
        Hypothesis(
            "tangency",
            Status.combine(tang.values()),
            {k: v.value for k, v in tang.items()},
        )
    )

    verdict = Status.combine(h.status for h in hyps)
    return TheoremReport(
        THEOREM_BY_KIND[kind],
        kind,
        n,
        hyps,
        verdict,
        dim_mf,
        package,
        c,
        flag_order,
        liouville,
        M.points,
        notes,
    )


def liouville_corollary(sys, fs, alphas, seed: int = 0, points=None) -> TheoremReport:
    return check_integrability(sys, fs, alphas, seed=seed, points=points, liouville=True)

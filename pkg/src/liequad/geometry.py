"""The four phase-space geometries in Darboux coordinates."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .expr import (
    ONE,
    ZERO,
    CoordinateSystem,
    Expr,
    Role,
    Verdict,
    as_expr,
    is_identically_zero,
    parse,
)


class GeometryMismatch(ValueError):
    pass


class Kind(enum.Enum):
    SYMPLECTIC = "symplectic"
    COSYMPLECTIC = "cosymplectic"
    CONTACT = "contact"
    COCONTACT = "cocontact"

    @classmethod
    def from_name(cls, name: str) -> "Kind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown geometry {name!r}; expected one of {[k.value for k in cls]}"
            ) from None

    @property
    def has_time(self) -> bool:
        return self in (Kind.COSYMPLECTIC, Kind.COCONTACT)

    @property
    def has_z(self) -> bool:
        return self in (Kind.CONTACT, Kind.COCONTACT)


def _chart(kind: Kind, n: int) -> CoordinateSystem:
    qs = [f"q{i}" for i in range(1, n + 1)]
    ps = [f"p{i}" for i in range(1, n + 1)]
    names = qs + ps
    roles = [Role.POSITION] * n + [Role.MOMENTUM] * n
    if kind is Kind.COSYMPLECTIC:
        names, roles = names + ["t"], roles + [Role.TIME]
    elif kind is Kind.CONTACT:
        names, roles = names + ["z"], roles + [Role.CONTACT]
    elif kind is Kind.COCONTACT:
        names = ["t"] + names + ["z"]
        roles = [Role.TIME] + roles + [Role.CONTACT]
    return CoordinateSystem(names, roles)


@dataclass(frozen=True)
class PhaseGeometry:
    kind: Kind
    n: int
    chart: CoordinateSystem = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", Kind.from_name(self.kind))
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"degrees of freedom must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "chart", _chart(self.kind, self.n))

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def qs(self) -> list[str]:
        return [f"q{i}" for i in range(1, self.n + 1)]

    @property
    def ps(self) -> list[str]:
        return [f"p{i}" for i in range(1, self.n + 1)]

    def parse(self, text: str) -> Expr:
        return parse(text, self.chart)

    def scalar(self, f) -> Expr:
        """Validate ``f`` as a scalar field on this chart (strings are parsed)."""
        e = self.parse(f) if isinstance(f, str) else as_expr(f)
        extra = e.free_vars - set(self.chart.names)
        if extra:
            raise GeometryMismatch(
                f"{sorted(extra)} are not coordinates of the {self.kind.value} chart {list(self.chart.names)}"
            )
        return e

    def unit_field(self, name: str) -> "VectorField":
        i = self.chart.index(name)
        return VectorField(self.chart, [ONE if j == i else ZERO for j in range(self.dim)])

    def __str__(self):
        return f"{self.kind.value}(n={self.n})"


class VectorField:
    """Components over a chart, one Expr per coordinate."""

    __slots__ = ("chart", "components")

    def __init__(self, chart: CoordinateSystem, components: Sequence):
        if isinstance(chart, PhaseGeometry):
            chart = chart.chart
        comps = tuple(as_expr(c) for c in components)
        if len(comps) != chart.dim:
            raise ValueError(f"expected {chart.dim} components, got {len(comps)}")
        self.chart = chart
        self.components = comps

    @classmethod
    def from_mapping(cls, chart: CoordinateSystem, comps: Mapping[str, object]) -> "VectorField":
        return cls(chart, [comps.get(n, ZERO) for n in chart.names])

    def _check(self, other: "VectorField"):
        if self.chart != other.chart:
            raise GeometryMismatch("vector fields live on different charts")

    def __getitem__(self, name_or_index):
        if isinstance(name_or_index, str):
            return self.components[self.chart.index(name_or_index)]
        return self.components[name_or_index]

    def __add__(self, other):
        self._check(other)
        return VectorField(self.chart, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        self._check(other)
        return VectorField(self.chart, [a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return VectorField(self.chart, [-a for a in self.components])

    def scale(self, c) -> "VectorField":
        c = as_expr(c)
        return VectorField(self.chart, [c * a for a in self.components])

    __rmul__ = scale

    def apply(self, f: Expr) -> Expr:
        """Directional derivative u(f) = u^i df/dx^i."""
        f = as_expr(f)
        out = ZERO
        for name, c in zip(self.chart.names, self.components):
            if c.is_zero or name not in f.free_vars:
                continue
            out = out + c * f.diff(name)
        return out

    def is_zero(self) -> Verdict:
        return Verdict.all(Verdict.zero(is_identically_zero(c)) for c in self.components)

    def __eq__(self, other):
        return (
            isinstance(other, VectorField)
            and self.chart == other.chart
            and self.components == other.components
        )

    def __hash__(self):
        return hash((self.chart, self.components))

    def as_dict(self) -> dict[str, str]:
        return {n: str(c) for n, c in zip(self.chart.names, self.components)}

    def __repr__(self):
        inner = ", ".join(f"{n}: {c}" for n, c in zip(self.chart.names, self.components))
        return f"VectorField({inner})"


@dataclass(frozen=True)
class HamiltonianSystem:
    geometry: PhaseGeometry
    H: Expr

    def __post_init__(self):
        object.__setattr__(self, "H", self.geometry.scalar(self.H))

    @property
    def chart(self) -> CoordinateSystem:
        return self.geometry.chart

    @property
    def is_good(self) -> bool | None:
        """True when the Hamiltonian is invariant along the contact Reeb field (None if no z)."""
        if not self.geometry.kind.has_z:
            return None
        return self.H.diff("z").is_zero


def hamiltonian_vector_field(g: PhaseGeometry, f) -> VectorField:
    f = g.scalar(f)
    comps: dict[str, Expr] = {}
    if g.kind.has_z:
        fz = f.diff("z")
        pf_p = ZERO
        for q, p in zip(g.qs, g.ps):
            fp = f.diff(p)
            comps[q] = fp
            comps[p] = -(f.diff(q) + Expr.var(p) * fz)
            pf_p = pf_p + Expr.var(p) * fp
        comps["z"] = pf_p - f
    else:
        for q, p in zip(g.qs, g.ps):
            comps[q] = f.diff(p)
            comps[p] = -f.diff(q)
    return VectorField.from_mapping(g.chart, comps)


def reeb_fields(g: PhaseGeometry) -> list[tuple[str, VectorField]]:
    if g.kind is Kind.SYMPLECTIC:
        return []
    if g.kind is Kind.COSYMPLECTIC:
        return [("R", g.unit_field("t"))]
    if g.kind is Kind.CONTACT:
        return [("R", g.unit_field("z"))]
    return [("R_z", g.unit_field("z")), ("R_t", g.unit_field("t"))]


def reeb(g: PhaseGeometry, name: str) -> VectorField:
    for n, r in reeb_fields(g):
        if n == name:
            return r
    raise GeometryMismatch(f"{g} has no Reeb field {name!r}")


def dynamics_field(sys: HamiltonianSystem) -> VectorField:
    g = sys.geometry
    xh = hamiltonian_vector_field(g, sys.H)
    if g.kind.has_time:
        return xh + g.unit_field("t")
    return xh


def equations_of_motion(sys: HamiltonianSystem) -> list[tuple[str, Expr]]:
    v = dynamics_field(sys)
    return list(zip(sys.chart.names, v.components))


CONTACT_SIGN_NOTE = (
    "X_1 computed from the coordinate formula is (0,...,0,-1) = -R; the Reeb field is "
    "minus the Hamiltonian field of the constant 1. Symmetry statements [R, X_H] = 0 are "
    "unaffected by the sign."
)
TIME_PARAMETER_NOTE = "t is the curve parameter: dt/ds = 1, so t = s along trajectories."


def motion_report(sys: HamiltonianSystem) -> dict:
    out = {
        "geometry": sys.geometry.kind.value,
        "n": sys.geometry.n,
        "chart": list(sys.chart.names),
        "equations": [{"coordinate": c, "rhs": str(e)} for c, e in equations_of_motion(sys)],
        "notes": [],
    }
    if sys.geometry.kind.has_z:
        out["notes"].append(CONTACT_SIGN_NOTE)
    if sys.geometry.kind is Kind.COCONTACT:
        out["notes"].append(TIME_PARAMETER_NOTE)
    return out

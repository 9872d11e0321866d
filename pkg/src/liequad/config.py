"""System definition files (TOML)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from .expr import ParseError
from .geometry import HamiltonianSystem, Kind, PhaseGeometry

KEYS = {"geometry", "n", "hamiltonian", "constants", "points", "seed", "t_max", "h"}


class SchemaError(ValueError):
    pass


@dataclass
class Constant:
    f: str
    alpha: float


@dataclass
class SystemFile:
    geometry: str
    n: int
    hamiltonian: str
    constants: list[Constant] = field(default_factory=list)
    points: list[list[float]] = field(default_factory=list)
    seed: int = 0
    t_max: float = 10.0
    h: float = 1e-3

    # -- construction ---------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, source: str = "<input>") -> "SystemFile":
        unknown = set(data) - KEYS
        if unknown:
            raise SchemaError(f"{source}: unknown key(s) {sorted(unknown)}")
        for key in ("geometry", "n", "hamiltonian"):
            if key not in data:
                raise SchemaError(f"{source}: missing required key '{key}'")
        geometry = data["geometry"]
        if not isinstance(geometry, str):
            raise SchemaError(f"{source}: field 'geometry' must be a string")
        try:
            Kind.from_name(geometry)
        except ValueError as exc:
            raise SchemaError(f"{source}: field 'geometry': {exc}") from None
        n = data["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise SchemaError(f"{source}: field 'n' must be a positive integer")
        ham = data["hamiltonian"]
        if not isinstance(ham, str):
            raise SchemaError(f"{source}: field 'hamiltonian' must be a string")
        consts = []
        for i, c in enumerate(data.get("constants", [])):
            if not isinstance(c, dict) or set(c) != {"f", "alpha"}:
                raise SchemaError(f"{source}: constants[{i}] must be a table with keys 'f' and 'alpha'")
            if not isinstance(c["f"], str):
                raise SchemaError(f"{source}: constants[{i}].f must be a string")
            if not isinstance(c["alpha"], (int, float)) or isinstance(c["alpha"], bool):
                raise SchemaError(f"{source}: constants[{i}].alpha must be a number")
            consts.append(Constant(c["f"], float(c["alpha"])))
        points = []
        for i, p in enumerate(data.get("points", [])):
            if not isinstance(p, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in p
            ):
                raise SchemaError(f"{source}: points[{i}] must be an array of numbers")
            points.append([float(x) for x in p])
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise SchemaError(f"{source}: field 'seed' must be an integer")
        out = cls(geometry.strip().lower(), n, ham, consts, points, seed)
        for key in ("t_max", "h"):
            if key in data:
                v = data[key]
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                    raise SchemaError(f"{source}: field '{key}' must be a positive number")
                setattr(out, key, float(v))
        out.validate(source)
        return out

    @classmethod
    def loads(cls, text: str, source: str = "<input>") -> "SystemFile":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise SchemaError(f"{source}: {exc}") from None
        return cls.from_dict(data, source)

    @classmethod
    def load(cls, path) -> "SystemFile":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"{path}: {exc.strerror}") from None
        return cls.loads(text, str(path))

    def validate(self, source: str = "<input>"):
        geo = self.phase_geometry()
        try:
            geo.scalar(self.hamiltonian)
        except (ParseError, ValueError) as exc:
            raise SchemaError(f"{source}: field 'hamiltonian': {exc}") from None
        for i, c in enumerate(self.constants):
            try:
                geo.scalar(c.f)
            except (ParseError, ValueError) as exc:
                raise SchemaError(f"{source}: constants[{i}].f: {exc}") from None
        for i, p in enumerate(self.points):
            if len(p) != geo.dim:
                raise SchemaError(
                    f"{source}: points[{i}] has {len(p)} coordinates, chart {list(geo.chart.names)} needs {geo.dim}"
                )

    # -- views ------------------------------------------------------------

    def phase_geometry(self) -> PhaseGeometry:
        return PhaseGeometry(Kind.from_name(self.geometry), self.n)

    def system(self) -> HamiltonianSystem:
        geo = self.phase_geometry()
        return HamiltonianSystem(geo, geo.scalar(self.hamiltonian))

    def functions(self):
        geo = self.phase_geometry()
        return [geo.scalar(c.f) for c in self.constants]

    def alphas(self) -> list[float]:
        return [c.alpha for c in self.constants]

    def to_dict(self) -> dict:
        out: dict = {
            "geometry": self.geometry,
            "n": self.n,
            "hamiltonian": self.hamiltonian,
            "seed": self.seed,
            "t_max": self.t_max,
            "h": self.h,
        }
        if self.points:
            out["points"] = self.points
        if self.constants:
            out["constants"] = [{"f": c.f, "alpha": c.alpha} for c in self.constants]
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

"""Lie integrability by quadratures for symplectic, cosymplectic, contact and cocontact systems."""

from .brackets import bracket, bracket_intrinsic, evolution_derivative, is_constant_of_motion
from .expr import CoordinateSystem, Expr, Verdict, ZeroTest, differentiate, evaluate, is_identically_zero, parse
from .geometry import (
    HamiltonianSystem,
    Kind,
    PhaseGeometry,
    VectorField,
    dynamics_field,
    equations_of_motion,
    hamiltonian_vector_field,
    reeb_fields,
)

__version__ = "0.1.0"

__all__ = [
    "CoordinateSystem",
    "Expr",
    "HamiltonianSystem",
    "Kind",
    "PhaseGeometry",
    "VectorField",
    "Verdict",
    "ZeroTest",
    "bracket",
    "bracket_intrinsic",
    "differentiate",
    "dynamics_field",
    "equations_of_motion",
    "evaluate",
    "evolution_derivative",
    "hamiltonian_vector_field",
    "is_constant_of_motion",
    "is_identically_zero",
    "parse",
    "reeb_fields",
]

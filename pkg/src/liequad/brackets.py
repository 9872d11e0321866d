"""Poisson and Jacobi brackets, by coordinate formula and by intrinsic definition."""

from __future__ import annotations

from .expr import ZERO, Expr, Verdict, is_identically_zero
from .geometry import (
    HamiltonianSystem,
    Kind,
    PhaseGeometry,
    dynamics_field,
    hamiltonian_vector_field,
    reeb,
)


def bracket(g: PhaseGeometry, f, h) -> Expr:
    """Coordinate formula; contact types add the z terms."""
    f, h = g.scalar(f), g.scalar(h)
    out = ZERO
    for q, p in zip(g.qs, g.ps):
        out = out + f.diff(q) * h.diff(p) - f.diff(p) * h.diff(q)
    if g.kind.has_z:
        fz, hz = f.diff("z"), h.diff("z")
        if not (fz.is_zero and hz.is_zero):
            pf = sum((Expr.var(p) * f.diff(p) for p in g.ps), ZERO)
            ph = sum((Expr.var(p) * h.diff(p) for p in g.ps), ZERO)
            out = out + fz * (ph - h) - hz * (pf - f)
    return out


def bracket_intrinsic(g: PhaseGeometry, f, h) -> Expr:
    """{f,h} = X_h f, plus f R h (contact) or f R_z h (cocontact)."""
    f, h = g.scalar(f), g.scalar(h)
    out = hamiltonian_vector_field(g, h).apply(f)
    if g.kind is Kind.CONTACT:
        out = out + f * reeb(g, "R").apply(h)
    elif g.kind is Kind.COCONTACT:
        out = out + f * reeb(g, "R_z").apply(h)
    return out


def evolution_derivative(sys: HamiltonianSystem, f) -> Expr:
    g = sys.geometry
    f = g.scalar(f)
    out = bracket(g, f, sys.H)
    if g.kind is Kind.COSYMPLECTIC:
        out = out + f.diff("t")
    elif g.kind is Kind.CONTACT:
        out = out - f * sys.H.diff("z")
    elif g.kind is Kind.COCONTACT:
        out = out - f * sys.H.diff("z") + f.diff("t")
    return out


def directional_evolution(sys: HamiltonianSystem, f) -> Expr:
    """Cross-check form of the evolution derivative: E_H(f) (or X_H(f))."""
    return dynamics_field(sys).apply(sys.geometry.scalar(f))


def is_constant_of_motion(sys: HamiltonianSystem, f) -> Verdict:
    return Verdict.zero(is_identically_zero(evolution_derivative(sys, f)))

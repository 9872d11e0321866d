"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction

import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from liequad.expr import ZERO, Expr
from liequad.liealg import StructureConstants

F = Fraction

_TRANSFORMS = standard_transformations + (convert_xor,)


def to_sympy(e) -> sp.Expr:
    """Independent reading of a printed expression."""
    text = str(e)
    names = {n: sp.Symbol(n) for n in sorted(getattr(e, "free_vars", ()))}
    local = dict(names, ln=sp.log, sqrt=sp.sqrt, atan2=sp.atan2, sin=sp.sin, cos=sp.cos, exp=sp.exp)
    return parse_expr(text, local_dict=local, transformations=_TRANSFORMS)


def sym(text: str) -> sp.Expr:
    local = dict(ln=sp.log)
    return parse_expr(text, local_dict=local, transformations=_TRANSFORMS)


def random_poly(rng: random.Random, names, deg: int = 3, terms: int = 3) -> Expr:
    """Sparse polynomial with small rational coefficients, total degree <= deg."""
    e = ZERO
    for _ in range(terms):
        m = Expr.const(Fraction(rng.randint(-5, 5), rng.randint(1, 3)))
        for _ in range(rng.randint(0, deg)):
            m = m * Expr.var(rng.choice(list(names)))
        e = e + m
    return e


def random_poly_free_of(rng, names, banned, **kw) -> Expr:
    return random_poly(rng, [n for n in names if n not in banned], **kw)


# -- structure-constant tensors whose solvability is known by construction --


def from_brackets(m, table):
    """table: {(i, j): {k: value}} with 0-based indices, i < j."""
    c = [[[F(0)] * m for _ in range(m)] for _ in range(m)]
    for (i, j), out in table.items():
        for k, x in out.items():
            c[i][j][k] = F(x)
            c[j][i][k] = -F(x)
    return StructureConstants.from_nested(c)


SL2 = from_brackets(3, {(0, 1): {2: 1}, (2, 0): {0: 2}, (2, 1): {1: -2}})  # e, f, h


def _rand_q(rng, lo=-3, hi=3):
    return F(rng.randint(lo, hi), rng.randint(1, 3))


def _random_invertible(rng, m):
    while True:
        P = [[_rand_q(rng) for _ in range(m)] for _ in range(m)]
        try:
            StructureConstants.zero(m).change_basis(P)
            return P
        except ValueError:
            continue


def _semidirect(rng, m):
    # R x_A R^{m-1}: [e0, e_i] = sum_j A[j][i] e_j, solvable for any A
    table = {}
    for i in range(1, m):
        table[(0, i)] = {j: _rand_q(rng) for j in range(1, m)}
    return from_brackets(m, table)


def _heisenberg_ext(rng, m):
    # [e1, e2] = e3 plus a derivation e0 scaling e1, e2 (needs m = 4)
    a, b = _rand_q(rng), _rand_q(rng)
    return from_brackets(4, {(1, 2): {3: 1}, (0, 1): {1: a}, (0, 2): {2: b}, (0, 3): {3: a + b}})


def _nonsolvable(rng, m):
    if m == 3:
        return rng.choice([SL2, from_brackets(3, {(0, 1): {2: 1}, (1, 2): {0: 1}, (2, 0): {1: 1}})])
    # sl2 + centre (gl2)
    return from_brackets(4, {(0, 1): {2: 1}, (2, 0): {0: 2}, (2, 1): {1: -2}})


def random_algebra(rng):
    """Returns (constants, solvable-by-construction)."""
    m = rng.randint(1, 4)
    pick = rng.randrange(4)
    if m >= 3 and pick == 0:
        base, solv = _nonsolvable(rng, m), False
    elif m == 4 and pick == 1:
        base, solv = _heisenberg_ext(rng, m), True
    elif pick == 2:
        base, solv = StructureConstants.zero(m), True
    else:
        base, solv = _semidirect(rng, m), True
    return base.change_basis(_random_invertible(rng, m)), solv

import random
from fractions import Fraction

import pytest

from helpers import SL2, from_brackets as _from_brackets, random_algebra as _random_algebra
from liequad.brackets import bracket
from liequad.geometry import Kind, PhaseGeometry, hamiltonian_vector_field
from liequad.liealg import (
    LinearlyDependentBasis,
    NotClosed,
    NotSolvable,
    StructureConstants,
    check_flag,
    in_span,
    is_solvable,
    solvable_flag,
    structure_constants,
)
from liequad.symmetry import commutator

F = Fraction
SYMP1 = PhaseGeometry(Kind.SYMPLECTIC, 1)
SYMP2 = PhaseGeometry(Kind.SYMPLECTIC, 2)


def _pb(g):
    return lambda a, b: bracket(g, a, b)


def test_structure_constants_example():
    c = structure_constants([SYMP1.parse("p1"), SYMP1.parse("q1*p1")], _pb(SYMP1), names=SYMP1.chart.names)
    assert c.nonzero_entries() == [(1, 2, 1, F(-1))]
    assert c.c[1][0][0] == 1
    assert c.certified_exactly and c.is_antisymmetric() and c.satisfies_jacobi()


def test_not_closed():
    with pytest.raises(NotClosed) as err:
        structure_constants([SYMP1.parse("q1"), SYMP1.parse("p1")], _pb(SYMP1), names=SYMP1.chart.names)
    assert err.value.pair == (1, 2)


def test_singleton_and_dependent_bases():
    c = structure_constants([SYMP1.parse("q1^3*p1")], _pb(SYMP1), names=SYMP1.chart.names)
    assert c.m == 1 and c.is_abelian()
    with pytest.raises(LinearlyDependentBasis):
        structure_constants([SYMP2.parse("p1"), SYMP2.parse("2*p1")], _pb(SYMP2), names=SYMP2.chart.names)


def test_sl2_from_quadratic_functions():
    g = PhaseGeometry(Kind.SYMPLECTIC, 1)
    basis = [g.parse("q1^2/2"), g.parse("-p1^2/2"), g.parse("q1*p1")]
    c = structure_constants(basis, _pb(g), names=g.chart.names)
    assert c.satisfies_jacobi()
    res = is_solvable(c)
    assert not res.solvable and res.series_dims == (3, 3)


def test_vector_field_level_constants_mirror_function_level():
    g = SYMP1
    fs = [g.parse("p1"), g.parse("q1*p1")]
    cf = structure_constants(fs, _pb(g), names=g.chart.names)
    cv = structure_constants([hamiltonian_vector_field(g, f) for f in fs], commutator)
    # X_{f,g} = -[X_f, X_g]
    assert all(cv.c[i][j][k] == -cf.c[i][j][k] for i in range(2) for j in range(2) for k in range(2))


def test_solvability_examples():
    c = structure_constants([SYMP1.parse("p1"), SYMP1.parse("q1*p1")], _pb(SYMP1), names=SYMP1.chart.names)
    assert is_solvable(c).series_dims == (2, 1, 0)
    assert is_solvable(SL2).series_dims == (3, 3) and not is_solvable(SL2)
    for m in (1, 2, 4):
        assert is_solvable(StructureConstants.zero(m)).series_dims == (m, 0)


def test_flag_examples():
    c = structure_constants([SYMP1.parse("p1"), SYMP1.parse("q1*p1")], _pb(SYMP1), names=SYMP1.chart.names)
    flag = solvable_flag(c)
    assert flag.directions[0] == (1, 0) and flag.order() == [0, 1]
    ab = structure_constants([SYMP2.parse("p1"), SYMP2.parse("p2")], _pb(SYMP2), names=SYMP2.chart.names)
    assert solvable_flag(ab).order() == [0, 1]
    with pytest.raises(NotSolvable):
        solvable_flag(SL2)


def test_flag_contains_derived_algebra():
    # b1 = [b0, b1], so [g,g] = span(b1) must be innermost even though b0 comes first
    c = _from_brackets(2, {(0, 1): {1: 1}})
    flag = solvable_flag(c)
    assert flag.order() == [1, 0]
    assert check_flag(c, flag.directions)


def test_change_basis_preserves_bracket():
    c = _from_brackets(3, {(0, 1): {1: 1}, (0, 2): {2: -2}})
    P = [[1, 1, 0], [0, 1, 3], [F(1, 2), 0, 1]]
    d = c.change_basis(P)
    assert d.satisfies_jacobi() and d.is_antisymmetric()
    for a in range(3):
        for b in range(3):
            lhs = c.bracket([F(x) for x in P[a]], [F(x) for x in P[b]])
            rhs = [sum(d.c[a][b][k] * F(P[k][i]) for k in range(3)) for i in range(3)]
            assert list(lhs) == rhs


# -- random Jacobi-valid tensors -----------------------------------------------


def test_solvability_agrees_with_flag_existence():
    rng = random.Random(2024)
    counts = {True: 0, False: 0}
    for _ in range(200):
        c, truth = _random_algebra(rng)
        assert c.satisfies_jacobi() and c.is_antisymmetric()
        res = is_solvable(c)
        try:
            flag = solvable_flag(c)
            has_flag = True
            assert len(flag.directions) == c.m and check_flag(c, flag.directions)
            # [g,g] must sit inside the codimension-one ideal L_{m-1}
            D = res.series[1]
            assert all(in_span(v, list(flag.directions[:-1])) for v in D) or c.m == 1
        except NotSolvable:
            has_flag = False
        assert bool(res) == has_flag == truth
        counts[truth] += 1
    assert counts[True] > 50 and counts[False] > 10


def test_check_flag_rejects_non_ideal_chain():
    c = _from_brackets(2, {(0, 1): {1: 1}})
    assert not check_flag(c, [(F(1), F(0)), (F(0), F(1))])
    assert not check_flag(c, [(F(0), F(1)), (F(0), F(2))])

import math

import numpy as np
import pytest

from liequad.expr import ONE, ZERO, CoordinateSystem, Expr, ZeroTest, exp, is_identically_zero, sin
from liequad.geometry import HamiltonianSystem, Kind, PhaseGeometry, VectorField, dynamics_field, hamiltonian_vector_field
from liequad.numint import integrate_field
from liequad.reduce import (
    DependenceResidual,
    NotASymmetry,
    NotStraightenable,
    ReductionError,
    integrate_by_quadratures,
    rational_diagonalization,
    reduce_once,
    straighten,
)
from liequad.theorems import check_integrability

PLANE = CoordinateSystem(["x", "y"])
x, y = Expr.var("x"), Expr.var("y")


def vf(*comps):
    return VectorField(PLANE, [c if isinstance(c, Expr) else Expr.const(c) for c in comps])


def assert_unit_pushforward(ch, u):
    pu = ch.pushforward(u)
    for i, c in enumerate(pu.components):
        want = ONE if i == ch.straight_index else ZERO
        assert c == want, (ch.case, pu)


def assert_round_trip(ch, center, count=50):
    fwd, inv = ch.forward_map(), ch.inverse_map()
    rng = np.random.default_rng(3)
    for _ in range(count):
        pt = np.array(center) + rng.uniform(-0.1, 0.1, size=len(center))
        back = inv(fwd(pt))
        assert np.max(np.abs(np.array(back) - pt)) <= 1e-9


CASES = [
    ("translation", vf(1, 0), (0.3, 0.4)),
    ("translation", vf(0, -3), (0.3, 0.4)),
    ("euler", vf(x, y), (1.0, 2.0)),
    ("linear", vf(y, x), (2.0, 0.5)),
    ("linear", vf(-y, x), (1.0, 0.5)),
    ("separable", vf(x * x, 0), (0.5, 1.0)),
    ("separable", vf(exp(x), 0), (0.5, 1.0)),
    ("separable", vf(0, sin(y)), (0.5, 1.0)),
    ("separable", vf(1 / (x + 2), 0), (0.5, 1.0)),
    ("translation", vf(y, 0), (0.0, 1.0)),
    ("euler", vf(2 * x, -3 * y), (1.0, 1.0)),
]


@pytest.mark.parametrize("case,u,center", CASES)
def test_straighten_catalog(case, u, center):
    ch = straighten(u, center)
    assert ch.case.startswith(case)
    assert_unit_pushforward(ch, u)
    assert_round_trip(ch, center)


def test_straighten_identity_for_unit_field():
    ch = straighten(vf(1, 0), (0.0, 0.0))
    assert ch.forward == (x, y) or [str(e) for e in ch.forward] == ["x", "y"]


def test_scaling_field_example():
    ch = straighten(vf(x, y), (1.0, 2.0))
    # a first integral (x/y) and a log coordinate
    assert ch.forward[1 - ch.straight_index] == x / y
    assert vf(x, y).apply(ch.forward[1 - ch.straight_index]).is_zero
    assert vf(x, y).apply(ch.forward[ch.straight_index]) == ONE


def test_symmetric_linear_field_uses_eigenbasis():
    u = vf(y, x)
    ch = straighten(u, (2.0, 0.5))
    assert "eigenbasis" in ch.case
    # the invariant is a function of (x + y)(x - y)
    inv = ch.forward[1 - ch.straight_index]
    assert u.apply(inv).is_zero
    assert is_identically_zero(inv * inv - (x * x - y * y) ** 2) is ZeroTest.ZERO


def test_rational_diagonalization():
    P, eig = rational_diagonalization([[0, 1], [1, 0]])
    assert sorted(eig) == [-1, 1]
    assert rational_diagonalization([[0, -1], [1, 0]]) is None


def test_not_straightenable_lists_probes():
    with pytest.raises(NotStraightenable) as err:
        straighten(vf(sin(x) * y + x * x, Expr.const(1) + x * y * y), (0.3, 0.2))
    probes = err.value.probes
    assert len(probes) == 4
    assert [p.split(":")[0] for p in probes] == ["translation", "separable", "linear", "euler"]


def test_equilibrium_rejected():
    with pytest.raises(NotStraightenable):
        straighten(vf(x, y), (0.0, 0.0))


def test_reduce_once_translation():
    v, u = vf(y, 0), vf(1, 0)
    reduced, quad, ch = reduce_once(v, u, (1.0, 2.0))
    assert reduced.chart.names == ("y",)
    assert reduced.components == (ZERO,)
    assert quad.rhs == y


def test_reduce_once_rejects_non_symmetry():
    with pytest.raises(NotASymmetry):
        reduce_once(vf(y, 0), vf(x, 0), (1.0, 2.0))


def _shear_flow(order, x0, grid):
    syms = {"translation": vf(1, 0), "scaling": vf(x, y)}
    return integrate_by_quadratures(vf(y, 0), [syms[k] for k in order], x0, grid)


def test_two_symmetry_pipeline():
    res = _shear_flow(["translation", "scaling"], (1.0, 2.0), [0.0, 0.5, 1.0])
    assert np.allclose(res.states, [[1, 2], [2, 2], [3, 2]], atol=1e-12, rtol=0)
    rk = integrate_field(vf(y, 0), (1.0, 2.0), (0.0, 10.0), 1e-3)
    res = _shear_flow(["translation", "scaling"], (1.0, 2.0), rk.params)
    assert np.max(np.abs(res.states - rk.states)) <= 1e-9


def test_reversed_order_is_detected():
    with pytest.raises((DependenceResidual, NotASymmetry)):
        _shear_flow(["scaling", "translation"], (1.0, 2.0), [0.0, 1.0])


def test_harmonic_oscillator_closed_form():
    g = PhaseGeometry(Kind.SYMPLECTIC, 1)
    sys = HamiltonianSystem(g, g.parse("(q1^2 + p1^2)/2"))
    rep = check_integrability(sys, [sys.H], [0.5], points=[[0.0, 1.0]])
    grid = np.linspace(0, 10, 101)
    res = integrate_by_quadratures(dynamics_field(sys), [u for _, u in rep.package], (0.0, 1.0), grid)
    want = np.column_stack([np.sin(grid), np.cos(grid)])
    assert np.max(np.abs(res.states - want)) <= 1e-8


def test_contact_oscillator_matches_rk4():
    g = PhaseGeometry(Kind.CONTACT, 1)
    sys = HamiltonianSystem(g, g.parse("(p1^2 + q1^2)/2"))
    x0 = (0.0, 1.0, 0.0)
    rep = check_integrability(sys, [sys.H], [0.5], points=[list(x0)])
    rk = integrate_field(dynamics_field(sys), x0, (0.0, 10.0), 1e-3)
    res = integrate_by_quadratures(dynamics_field(sys), [u for _, u in rep.package], x0, rk.params)
    assert np.max(np.abs(res.states - rk.states)) <= 1e-6
    # zdot = p dH/dp - H = (p^2 - q^2)/2 = cos(2t)/2, so z = sin(t) cos(t)/2
    t = rk.params
    assert np.max(np.abs(res.states[:, 2] - 0.5 * np.sin(t) * np.cos(t))) <= 1e-8


@pytest.mark.parametrize("kind,H,f,x0", [
    (Kind.COSYMPLECTIC, "p1^2/2 + t*q1", "p1 + t^2/2", (0.0, 1.0, 0.0)),
    (Kind.COCONTACT, "p1^2/2 + t*q1", "p1 + t^2/2", (0.0, 0.0, 1.0, 0.0)),
    (Kind.CONTACT, "p1^2/2", "p1", (0.0, 1.0, 0.0)),
])
def test_certified_packages_match_rk4_and_conserve(kind, H, f, x0):
    g = PhaseGeometry(kind, 1)
    sys = HamiltonianSystem(g, g.parse(H))
    fe = g.parse(f)
    rep = check_integrability(sys, [f], [float(evaluate_at(fe, g, x0))], points=[list(x0)])
    rk = integrate_field(dynamics_field(sys), x0, (x0[0] if kind is Kind.COCONTACT else 0.0, 10.0), 1e-3)
    res = integrate_by_quadratures(dynamics_field(sys), [u for _, u in rep.package], x0, rk.params)
    assert np.max(np.abs(res.states - rk.states)) <= 1e-6
    vals = [evaluate_at(fe, g, s) for s in res.states]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-6


def evaluate_at(e, g, point):
    from liequad.expr import evaluate
    return evaluate(e, dict(zip(g.chart.names, map(float, point))))


def test_pendulum_not_straightenable():
    g = PhaseGeometry(Kind.SYMPLECTIC, 1)
    sys = HamiltonianSystem(g, g.parse("p1^2/2 - cos(q1)"))
    with pytest.raises(NotStraightenable) as err:
        integrate_by_quadratures(dynamics_field(sys), [hamiltonian_vector_field(g, sys.H)], (0.5, 0.5), [0.0, 1.0])
    assert err.value.stage == 1 and err.value.probes
    assert isinstance(err.value, ReductionError)


def test_schedule_is_recorded():
    res = _shear_flow(["translation", "scaling"], (1.0, 2.0), [0.0])
    stages = res.schedule.describe()
    assert len(stages) <= 3
    assert stages[0]["kind"] == "reduce"

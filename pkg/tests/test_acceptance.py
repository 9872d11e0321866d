"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the captured output and with -s), or
directly: ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import random_algebra, random_poly, random_poly_free_of  # noqa: E402
from liequad.brackets import bracket, bracket_intrinsic, evolution_derivative, is_constant_of_motion  # noqa: E402
from liequad.expr import ZERO, Expr, Verdict, ZeroTest, compile_exprs, evaluate, is_identically_zero  # noqa: E402
from liequad.geometry import (  # noqa: E402
    HamiltonianSystem,
    Kind,
    PhaseGeometry,
    VectorField,
    dynamics_field,
    hamiltonian_vector_field,
    reeb,
)
from liequad.liealg import NotSolvable, check_flag, is_solvable, solvable_flag  # noqa: E402
from liequad.expr import CoordinateSystem  # noqa: E402
from liequad.numint import integrate, integrate_field  # noqa: E402
from liequad.reduce import DependenceResidual, NotASymmetry, integrate_by_quadratures  # noqa: E402
from liequad.symmetry import check_antihomomorphism, commutator, is_symmetry  # noqa: E402
from liequad.theorems import ArityError, Status, check_integrability, liouville_corollary  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
KINDS = list(Kind)


def _geom(rng, kind):
    return PhaseGeometry(kind, rng.choice([1, 2]))


def _zero_or_sampled(e: Expr, names, rng, points=20, rel=1e-9) -> bool:
    """Canonical zero, or small relative to the scale of the compared terms at sample points."""
    z = is_identically_zero(e)
    if z is ZeroTest.ZERO:
        return True
    if z is ZeroTest.NONZERO:
        return False
    fn = compile_exprs([e], names)
    for _ in range(points):
        x = [rng.uniform(-2, 2) for _ in names]
        if abs(fn(x)[0]) > rel:
            return False
    return True


# -- criteria -------------------------------------------------------------------


def criterion_1():
    rng = random.Random(101)
    checked = 0
    for kind in KINDS:
        for _ in range(100):
            g = _geom(rng, kind)
            f, h = random_poly(rng, g.chart.names), random_poly(rng, g.chart.names)
            a, b = bracket(g, f, h), bracket_intrinsic(g, f, h)
            scale = max(1.0, max(abs(c) for c in (a.num or {(): 1}).values()))
            if not _zero_or_sampled(a - b, g.chart.names, rng, rel=1e-9 * scale):
                return False, f"{kind.value}: {f} / {h}"
            checked += 1
    return True, f"{checked} pairs, 4 geometries"


def criterion_2():
    rng = random.Random(202)
    for kind in KINDS:
        for _ in range(100):
            g = _geom(rng, kind)
            f, h, k = (random_poly(rng, g.chart.names) for _ in range(3))
            if not (bracket(g, f, h) + bracket(g, h, f)).is_zero:
                return False, f"antisymmetry, {kind.value}"
            jac = bracket(g, f, bracket(g, h, k)) + bracket(g, h, bracket(g, k, f)) + bracket(g, k, bracket(g, f, h))
            if not jac.is_zero:
                return False, f"Jacobi, {kind.value}"
    c = PhaseGeometry(Kind.CONTACT, 1)
    z, q = c.parse("z"), c.parse("q1")
    leibniz = bracket(c, z, q * q) - 2 * q * bracket(c, z, q)
    if is_identically_zero(leibniz) is not ZeroTest.NONZERO:
        return False, "Leibniz counterexample vanished"
    return True, f"400 triples; Leibniz defect {{z,q1^2}} - 2 q1 {{z,q1}} = {leibniz}"


def criterion_3():
    rng = random.Random(303)
    n_checks = 0
    for kind in KINDS:
        for _ in range(100):
            g = _geom(rng, kind)
            gen = (lambda: random_poly_free_of(rng, g.chart.names, "z")) if kind.has_z else (
                lambda: random_poly(rng, g.chart.names)
            )
            f, h = gen(), gen()
            if check_antihomomorphism(g, f, h).verdict is not Verdict.YES:
                return False, f"antihomomorphism, {kind.value}: {f}, {h}"
            n_checks += 1
            if kind in (Kind.COSYMPLECTIC, Kind.COCONTACT):
                R = reeb(g, "R" if kind is Kind.COSYMPLECTIC else "R_t")
                ff = random_poly(rng, g.chart.names)
                res = hamiltonian_vector_field(g, R.apply(ff)) + commutator(hamiltonian_vector_field(g, ff), R)
                if res.is_zero() is not Verdict.YES:
                    return False, f"Reeb shift identity, {kind.value}"
                n_checks += 1
            if kind.has_z:
                Rz = reeb(g, "R" if kind is Kind.CONTACT else "R_z")
                if not Rz.apply(bracket(g, f, h)).is_zero:
                    return False, f"R(bracket) identity, {kind.value}"
                n_checks += 1
    return True, f"{n_checks} identity checks"


def _constant_of_motion_pair(rng, kind):
    """H built from f and coordinates that commute with f, so f is conserved."""
    g = PhaseGeometry(kind, 2)
    f = random_poly(rng, ["q1", "p1"], deg=2, terms=3)
    if f.const_value() is not None:
        f = f + Expr.var("p1")
    others = ["q2", "p2"] + (["t"] if kind.has_time else [])
    F = Expr.var("F")
    G = random_poly(rng, ["F", *others], deg=3, terms=4) + F
    H = G.subs({"F": f})
    return HamiltonianSystem(g, H), f


def criterion_4():
    rng = random.Random(404)
    done = 0
    for kind in KINDS:
        for _ in range(5):
            sys_, f = _constant_of_motion_pair(rng, kind)
            if is_constant_of_motion(sys_, f) is not Verdict.YES:
                return False, f"construction failed, {kind.value}"
            if is_symmetry(dynamics_field(sys_), hamiltonian_vector_field(sys_.geometry, f)) is not Verdict.YES:
                return False, f"[E_H, X_f] != 0, {kind.value}: H = {sys_.H}, f = {f}"
            done += 1
    return True, f"{done} (system, constant) pairs"


def _fixture(name):
    from liequad.config import SystemFile

    sf = SystemFile.load(FIXTURES / f"{name}.toml")
    return check_integrability(sf.system(), sf.functions(), sf.alphas(), seed=sf.seed, points=sf.points)


def criterion_5():
    t2 = _fixture("free_particle_t2")
    if not (t2.verdict is Status.HOLDS and t2.dim_level_set == 2):
        return False, "T2 free particle"
    t4 = _fixture("good_contact_t4")
    if not (t4.verdict is Status.HOLDS and t4.dim_level_set == 2 and sorted(n for n, _ in t4.package) == ["R", "X_f1"]):
        return False, "T4 good contact"
    v = _fixture("condition4_violation")
    alpha = v.hypothesis("alpha_compatibility")
    if not (v.verdict is Status.FAILS and alpha.status is Status.FAILS and alpha.detail["counterexample"] == [1, 2]):
        return False, "condition-4 violation"
    s = _fixture("sl2_rotation")
    if not (s.verdict is Status.FAILS and s.hypothesis("solvable").status is Status.FAILS):
        return False, "sl2 solvability"
    g = PhaseGeometry(Kind.SYMPLECTIC, 2)
    if liouville_corollary(HamiltonianSystem(g, g.parse("(p1^2+p2^2)/2")), ["p1", "p2"], [1, 2]).verdict is not Status.HOLDS:
        return False, "Liouville mode, abelian"
    nonab = liouville_corollary(HamiltonianSystem(g, g.parse("p2^2/2")), ["p1", "q1*p1"], [0, 1])
    if nonab.hypothesis("abelian").status is not Status.FAILS:
        return False, "Liouville mode, non-abelian"
    try:
        liouville_corollary(HamiltonianSystem(g, g.parse("p1")), [], [])
        return False, "empty fs accepted"
    except ArityError:
        pass
    return True, "T2 holds, T4 holds (X_f1, R), condition 4 fails at (1,2), sl2 fails solvability"


def criterion_6():
    rng = random.Random(606)
    for i in range(200):
        c, truth = random_algebra(rng)
        if not (c.satisfies_jacobi() and c.is_antisymmetric()):
            return False, f"tensor {i} failed the Jacobi screen"
        solv = is_solvable(c).solvable
        try:
            flag = solvable_flag(c)
            has = check_flag(c, flag.directions) and len(flag.directions) == c.m
        except NotSolvable:
            has = False
        if not (solv == has == truth):
            return False, f"tensor {i}: derived series {solv}, flag {has}, construction {truth}"
    return True, "200 tensors, m <= 4"


def _max_diff(v, syms, x0):
    rk = integrate_field(v, x0, (0.0, 10.0), 1e-3)
    q = integrate_by_quadratures(v, syms, x0, rk.params)
    return float(np.max(np.abs(q.states - rk.states)))


def criterion_7():
    plane = CoordinateSystem(["x", "y"])
    x, y = Expr.var("x"), Expr.var("y")
    shear = VectorField(plane, [y, ZERO])
    trans, scale = VectorField(plane, [Expr.const(1), ZERO]), VectorField(plane, [x, y])
    diffs = {"shear": _max_diff(shear, [trans, scale], (1.0, 2.0))}
    for name, kind in (("harmonic", Kind.SYMPLECTIC), ("contact", Kind.CONTACT)):
        g = PhaseGeometry(kind, 1)
        sys_ = HamiltonianSystem(g, g.parse("(q1^2 + p1^2)/2"))
        x0 = [0.0, 1.0] + ([0.0] if kind is Kind.CONTACT else [])
        rep = check_integrability(sys_, [sys_.H], [0.5], points=[x0])
        if rep.verdict is not Status.HOLDS:
            return False, f"{name}: package not certified"
        diffs[name] = _max_diff(dynamics_field(sys_), [u for _, u in rep.package], x0)
    worst = max(diffs.values())
    if worst > 1e-6:
        return False, f"max-norm differences {diffs}"
    try:
        integrate_by_quadratures(shear, [scale, trans], (1.0, 2.0), [0.0, 1.0])
        return False, "reversed flag order was accepted"
    except (DependenceResidual, NotASymmetry) as exc:
        caught = type(exc).__name__
    return True, "max diff " + ", ".join(f"{k} {v:.1e}" for k, v in diffs.items()) + f"; reversed order -> {caught}"


def criterion_8():
    g = PhaseGeometry(Kind.CONTACT, 1)
    gamma = 0.2
    sys_ = HamiltonianSystem(g, g.parse("p1^2/2 + q1^2/2 + 0.2*z"))
    x0 = [0.0, math.sqrt(2.0), 0.0]
    tr = integrate(sys_, x0, (0.0, 10.0), 1e-3)
    fn = compile_exprs([sys_.H], g.chart.names)
    H = np.array([fn(x)[0] for x in tr.states])
    dev = float(np.max(np.abs(H - H[0] * np.exp(-gamma * tr.params))))
    if dev > 1e-6:
        return False, f"|H(t) - H0 exp(-0.2 t)| = {dev:.3g}"
    rng = random.Random(808)
    g2 = PhaseGeometry(Kind.CONTACT, 2)
    for _ in range(20):
        Hr = random_poly(rng, g2.chart.names)
        if not (evolution_derivative(HamiltonianSystem(g2, Hr), Hr) + Hr * Hr.diff("z")).is_zero:
            return False, f"Hdot != -H dH/dz for {Hr}"
    return True, f"max dissipation deviation {dev:.1e}; 20 symbolic identities"


def criterion_9():
    g = PhaseGeometry(Kind.SYMPLECTIC, 1)
    sys_ = HamiltonianSystem(g, g.parse("(q1^2 + p1^2)/2"))
    errs = []
    for h in (0.05, 0.025):
        tr = integrate(sys_, [0.0, 1.0], (0.0, 10.0), h)
        errs.append(float(np.max(np.abs(tr.states[-1] - [math.sin(10.0), math.cos(10.0)]))))
    ratio = errs[0] / errs[1]
    return 12 <= ratio <= 20, f"error ratio {ratio:.3f} (h = 0.05 vs 0.025)"


def criterion_10():
    files = sorted(FIXTURES.glob("*.toml"))
    for f in files:
        cmd = [sys.executable, "-m", "liequad.cli", "check", str(f)]
        a = subprocess.run(cmd, capture_output=True)
        b = subprocess.run(cmd, capture_output=True)
        if a.stdout != b.stdout or not a.stdout:
            return False, f"{f.name} differs between runs"
    return True, f"{len(files)} fixtures byte-identical"


CRITERIA = [
    (1, "bracket oracle equivalence", criterion_1),
    (2, "bracket axioms and Leibniz failure", criterion_2),
    (3, "antihomomorphism suite", criterion_3),
    (4, "constant of motion implies symmetry", criterion_4),
    (5, "theorem-checker fixtures", criterion_5),
    (6, "solvability engine", criterion_6),
    (7, "quadrature vs RK4 oracle", criterion_7),
    (8, "dissipation law", criterion_8),
    (9, "RK4 order", criterion_9),
    (10, "determinism", criterion_10),
]


def run_criterion(num, title, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {title} ({detail}; {time.perf_counter() - t0:.1f}s)"
    return ok, line


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_acceptance(num, title, fn, capsys):
    ok, line = run_criterion(num, title, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)

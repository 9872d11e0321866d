"""Exact symbolic kernel.

Every expression is held in canonical form: a quotient ``N / (P_1^e_1 ... P_k^e_k)``
where ``N`` is a Laurent polynomial with rational coefficients and each ``P_i`` is a
monic, content-free polynomial.  The indeterminates are coordinates and *atoms*,
i.e. applications of ``sin``, ``cos``, ``exp``, ``ln``, ``k``-th roots and ``atan2``
to canonical expressions.

Fixed rewrite rules (applied on construction):

* like terms collected, zero terms dropped, monomial denominators folded into
  negative exponents;
* ``cos(u)^2 -> 1 - sin(u)^2``;
* ``root(a, k)^k -> a`` when ``a`` is a Laurent polynomial;
* ``exp(ln(a)) -> a`` and ``ln(exp(a)) -> a``;
* ``sin(-a) -> -sin(a)``, ``cos(-a) -> cos(a)``;
* values at trivial constants (``sin(0)``, ``exp(0)``, ``ln(1)``, exact roots);
* a denominator factor is cancelled whenever it divides the numerator exactly.

Zero testing is exact on the rational fragment and falls back to randomized
evaluation when atoms are present.
"""

from __future__ import annotations

import enum
import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Atom",
    "CoordinateSystem",
    "DomainError",
    "Expr",
    "ExprError",
    "ONE",
    "ParseError",
    "Role",
    "UnknownIdentifierError",
    "Verdict",
    "ZERO",
    "ZeroTest",
    "as_expr",
    "atan2",
    "compile_exprs",
    "cos",
    "differentiate",
    "evaluate",
    "exp",
    "is_identically_zero",
    "ln",
    "parse",
    "root",
    "simplify",
    "sin",
    "sqrt",
]


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r}", position)
        self.name = name


class DomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, subexpression: str = ""):
        super().__init__(message)
        self.subexpression = subexpression


class ZeroTest(enum.Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    UNKNOWN = "unknown"


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"

    @classmethod
    def zero(cls, z: ZeroTest) -> "Verdict":
        """YES when the tested quantity vanishes identically."""
        return {ZeroTest.ZERO: cls.YES, ZeroTest.NONZERO: cls.NO}.get(z, cls.UNKNOWN)

    @classmethod
    def all(cls, verdicts: Iterable["Verdict"]) -> "Verdict":
        vs = list(verdicts)
        if any(v is cls.NO for v in vs):
            return cls.NO
        if all(v is cls.YES for v in vs):
            return cls.YES
        return cls.UNKNOWN


class Role(enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"
    TIME = "time"
    CONTACT = "contact"
    AUX = "aux"


class CoordinateSystem:
    """Ordered, named coordinates with roles."""

    __slots__ = ("names", "roles", "_index")

    def __init__(self, names: Sequence[str], roles: Sequence[Role] | None = None):
        names = tuple(names)
        roles = tuple(roles) if roles is not None else (Role.AUX,) * len(names)
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be unique: {names}")
        if len(roles) != len(names):
            raise ValueError("one role per coordinate")
        self.names = names
        self.roles = roles
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __iter__(self):
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CoordinateSystem) and (self.names, self.roles) == (
            other.names,
            other.roles,
        )

    def __hash__(self) -> int:
        return hash((self.names, self.roles))

    def __repr__(self) -> str:
        return f"CoordinateSystem({list(self.names)})"

    def var(self, name: str) -> "Expr":
        if name not in self._index:
            raise KeyError(name)
        return Expr.var(name)

    def without(self, name: str) -> "CoordinateSystem":
        i = self.index(name)
        return CoordinateSystem(
            self.names[:i] + self.names[i + 1 :], self.roles[:i] + self.roles[i + 1 :]
        )


# ---------------------------------------------------------------------------
# generators


class Gen:
    __slots__ = ("key", "_hash", "free")

    def __eq__(self, other):
        return self is other or (isinstance(other, Gen) and self.key == other.key)

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.key < other.key


class Var(Gen):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.key = (0, name)
        self._hash = hash(self.key)
        self.free = frozenset((name,))

    def __str__(self):
        return self.name

    __repr__ = __str__


class Atom(Gen):
    __slots__ = ("func", "args", "k")

    def __init__(self, func: str, args: tuple["Expr", ...], k: int = 0):
        self.func = func
        self.args = args
        self.k = k
        self.key = (1, func, k, tuple(str(a) for a in args))
        self._hash = hash(self.key)
        self.free = frozenset().union(*(a.free_vars for a in args))

    def __str__(self):
        if self.func == "root":
            a = self.args[0]
            return f"sqrt({a})" if self.k == 2 else f"({a})^(1/{self.k})"
        return f"{self.func}({', '.join(str(a) for a in self.args)})"

    __repr__ = __str__


# ---------------------------------------------------------------------------
# sparse Laurent polynomials: dict monomial -> Fraction, monomial = sorted tuple of (Gen, exp)


def _gkey(item):
    return item[0].key


def _mono_mul(a, b):
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for g, e in b:
        s = d.get(g, 0) + e
        if s:
            d[g] = s
        else:
            del d[g]
    return tuple(sorted(d.items(), key=_gkey))


def _mono_pow(a, n):
    return tuple((g, e * n) for g, e in a) if n else ()


def _padd(a, b, sign=1):
    r = dict(a)
    for m, c in b.items():
        s = r.get(m, 0) + (c if sign == 1 else -c)
        if s:
            r[m] = s
        else:
            r.pop(m, None)
    return r


def _pscale(a, c, mono=()):
    if not c:
        return {}
    if mono:
        return {_mono_mul(m, mono): v * c for m, v in a.items()}
    return {m: v * c for m, v in a.items()}


def _pmul(a, b):
    if len(a) > len(b):
        a, b = b, a
    r: dict = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = _mono_mul(m1, m2)
            s = r.get(m, 0) + c1 * c2
            if s:
                r[m] = s
            else:
                r.pop(m, None)
    return r


def _ppow(a, n):
    r = {(): Fraction(1)}
    base = a
    while n:
        if n & 1:
            r = _pmul(r, base)
        n >>= 1
        if n:
            base = _pmul(base, base)
    return r


def _gens_of(terms):
    s = set()
    for m in terms:
        for g, _ in m:
            s.add(g)
    return s


def _lex_vec(gens_sorted):
    idx = {g: i for i, g in enumerate(gens_sorted)}
    n = len(gens_sorted)

    def vec(m):
        v = [0] * n
        for g, e in m:
            v[idx[g]] = e
        return tuple(v)

    return vec


def _exact_div(num, den):
    """Return ``num / den`` when ``den`` divides ``num`` exactly, else None."""
    gens = sorted(_gens_of(num) | _gens_of(den), key=lambda g: g.key)
    shift = {}
    for m in num:
        for g, e in m:
            if e < shift.get(g, 0):
                shift[g] = e
    lift = tuple(sorted(((g, -e) for g, e in shift.items()), key=_gkey))
    r = _pscale(num, Fraction(1), lift) if lift else dict(num)
    vec = _lex_vec(gens)
    lead_d = max(den, key=vec)
    vd = vec(lead_d)
    cd = den[lead_d]
    q: dict = {}
    budget = 10 * (len(num) + 1) * (len(den) + 1) + 1000
    while r:
        budget -= 1
        if budget < 0:
            return None
        lm = max(r, key=vec)
        v = vec(lm)
        diff = [a - b for a, b in zip(v, vd)]
        if any(d < 0 for d in diff):
            return None
        tm = tuple((g, d) for g, d in zip(gens, diff) if d)
        tc = r[lm] / cd
        q[tm] = q.get(tm, 0) + tc
        r = _padd(r, _pscale(den, tc, tm), -1)
    q = {m: c for m, c in q.items() if c}
    if lift:
        q = _pscale(q, Fraction(1), _mono_pow(lift, -1))
    return q


def _normalize_factor(terms):
    """Split ``terms = c * mono * P`` with P monic and content free (P None if trivial)."""
    gens = _gens_of(terms)
    content = []
    for g in gens:
        lo = None
        for m in terms:
            e = 0
            for h, x in m:
                if h == g:
                    e = x
                    break
            lo = e if lo is None else min(lo, e)
        if lo:
            content.append((g, lo))
    mono = tuple(sorted(content, key=_gkey))
    if len(terms) == 1:
        ((m, c),) = terms.items()
        return c, m, None
    vec = _lex_vec(sorted(gens, key=lambda g: g.key))
    lead = max(terms, key=vec)
    c = terms[lead]
    inv = _mono_pow(mono, -1)
    p = {_mono_mul(m, inv): v / c for m, v in terms.items()}
    return c, mono, _Poly(p)


class _Poly:
    __slots__ = ("terms", "_hash", "_str")

    def __init__(self, terms):
        self.terms = terms
        self._hash = None
        self._str = None

    def __eq__(self, other):
        return isinstance(other, _Poly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __str__(self):
        if self._str is None:
            self._str = _fmt_poly(self.terms)
        return self._str


# ---------------------------------------------------------------------------
# printing


def _fmt_coef(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _fmt_gen_pow(g, e):
    s = str(g)
    if e == 1:
        return s
    if isinstance(g, Atom) and g.func == "root" and g.k != 2:
        s = f"({s})"
    return f"{s}^{e}" if e > 0 else f"{s}^({e})"


def _print_key(m):
    return (-sum(e for _, e in m), tuple((g.key, -e) for g, e in m))


def _fmt_poly(terms) -> str:
    if not terms:
        return "0"
    out = []
    for m in sorted(terms, key=_print_key):
        c = terms[m]
        body = "*".join(_fmt_gen_pow(g, e) for g, e in m)
        if not body:
            t = _fmt_coef(c)
        elif c == 1:
            t = body
        elif c == -1:
            t = "-" + body
        else:
            t = f"{_fmt_coef(c)}*{body}"
        if out:
            out.append(" - " + t[1:] if t.startswith("-") else " + " + t)
        else:
            out.append(t)
    return "".join(out)


# ---------------------------------------------------------------------------
# rewrite rules on polynomial terms


def _reducible(m):
    for i, (g, e) in enumerate(m):
        if not isinstance(g, Atom):
            continue
        if g.func == "cos" and e >= 2:
            rest = m[:i] + (((g, e - 2),) if e > 2 else ()) + m[i + 1 :]
            s = _atom_gen("sin", g.args)
            return rest, {(): Fraction(1), ((s, 2),): Fraction(-1)}
        if g.func == "root" and e >= g.k and not g.args[0].den:
            rest = m[:i] + (((g, e - g.k),) if e > g.k else ()) + m[i + 1 :]
            return rest, g.args[0].num
    return None


def _needs_reduce(terms):
    for m in terms:
        for g, e in m:
            if isinstance(g, Atom) and (
                (g.func == "cos" and e >= 2) or (g.func == "root" and e >= g.k)
            ):
                return True
    return False


def _reduce_terms(terms):
    if not _needs_reduce(terms):
        return terms
    terms = dict(terms)
    for _ in range(10000):
        hit = None
        for m in terms:
            rep = _reducible(m)
            if rep is not None:
                hit = (m, rep)
                break
        if hit is None:
            return terms
        m, (rest, factor) = hit
        c = terms.pop(m)
        terms = _padd(terms, _pscale(factor, c, rest))
    raise ExprError("rewrite rules did not terminate")


# ---------------------------------------------------------------------------
# Expr


class Expr:
    """Immutable canonical expression; see module docstring."""

    __slots__ = ("num", "den", "_hash", "_str", "_free")

    def __init__(self, num, den=()):
        # internal: use the module constructors
        self.num = num
        self.den = den
        self._hash = None
        self._str = None
        self._free = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def const(value) -> "Expr":
        value = _to_fraction(value)
        return Expr({(): value}) if value else ZERO

    @staticmethod
    def var(name: str) -> "Expr":
        return Expr({((_var_gen(name), 1),): Fraction(1)})

    # -- inspection -------------------------------------------------------

    @property
    def free_vars(self) -> frozenset:
        if self._free is None:
            s = set()
            for terms in (self.num, *(p.terms for p, _ in self.den)):
                for m in terms:
                    for g, _ in m:
                        s |= g.free
            self._free = frozenset(s)
        return self._free

    @property
    def is_zero(self) -> bool:
        return not self.num

    def gens(self) -> set:
        s = _gens_of(self.num)
        for p, _ in self.den:
            s |= _gens_of(p.terms)
        return s

    def has_atoms(self) -> bool:
        return any(isinstance(g, Atom) for g in self.gens())

    def const_value(self) -> Fraction | None:
        """The rational value of a constant expression, else None."""
        if self.den:
            return None
        if not self.num:
            return Fraction(0)
        if len(self.num) == 1 and () in self.num:
            return self.num[()]
        return None

    def is_polynomial(self) -> bool:
        return not self.den and all(
            isinstance(g, Var) and e > 0 for m in self.num for g, e in m
        )

    def single_gen(self):
        """(coefficient, gen, exponent) if this is ``c * g^e``, else None."""
        if self.den or len(self.num) != 1:
            return None
        ((m, c),) = self.num.items()
        if len(m) != 1:
            return None
        return c, m[0][0], m[0][1]

    def leading_coefficient(self) -> Fraction:
        if not self.num:
            return Fraction(0)
        return self.num[min(self.num, key=_print_key)]

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        return _add(self, as_expr(other), 1)

    def __radd__(self, other):
        return _add(as_expr(other), self, 1)

    def __sub__(self, other):
        return _add(self, as_expr(other), -1)

    def __rsub__(self, other):
        return _add(as_expr(other), self, -1)

    def __neg__(self):
        return Expr({m: -c for m, c in self.num.items()}, self.den)

    def __pos__(self):
        return self

    def __mul__(self, other):
        return _mul(self, as_expr(other))

    def __rmul__(self, other):
        return _mul(as_expr(other), self)

    def __truediv__(self, other):
        return _div(self, as_expr(other))

    def __rtruediv__(self, other):
        return _div(as_expr(other), self)

    def __pow__(self, power):
        power = _to_fraction(power)
        if power.denominator != 1:
            return root(self, power.denominator) ** power.numerator
        n = power.numerator
        if n == 0:
            return ONE
        if n < 0:
            return _div(ONE, self**-n)
        if not self.den and len(self.num) == 1:
            ((m, c),) = self.num.items()
            return _make({_mono_pow(m, n): c**n}, ())
        num = _ppow(self.num, n)
        return _make(num, tuple((p, e * n) for p, e in self.den))

    # -- calculus / substitution -----------------------------------------

    def diff(self, name: str) -> "Expr":
        if name not in self.free_vars:
            return ZERO
        memo: dict = {}
        out = _poly_diff(self.num, name, memo)
        if not self.den:
            return out
        # d(N / prod P_i^e_i) = (N' prod P_i - N sum e_i P_i' prod_{j != i} P_j) / prod P_i^(e_i + 1)
        polys = [Expr(p.terms) for p, _ in self.den]
        top = out
        for p in polys:
            top = top * p
        n = Expr(self.num)
        for i, (p, e) in enumerate(self.den):
            dp = _poly_diff(p.terms, name, memo)
            if dp.is_zero:
                continue
            t = n * dp * e
            for j, q in enumerate(polys):
                if j != i:
                    t = t * q
            top = top - t
        return top * Expr._with_den(tuple((p, e + 1) for p, e in self.den))

    @staticmethod
    def _with_den(den) -> "Expr":
        return Expr({(): Fraction(1)}, den)

    def subs(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        mapping = {k: as_expr(v) for k, v in mapping.items()}
        if not (self.free_vars & mapping.keys()):
            return self
        memo: dict = {}
        out = _poly_subs(self.num, mapping, memo)
        for p, e in self.den:
            out = out / _poly_subs(p.terms, mapping, memo) ** e
        return out

    # -- identity ---------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Expr):
            if isinstance(other, (int, Fraction)):
                other = Expr.const(other)
            else:
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()), self.den))
        return self._hash

    def __str__(self):
        if self._str is None:
            s = _fmt_poly(self.num)
            if self.den:
                parts = [f"({s})"]
                for p, e in self.den:
                    parts.append(f"/({p})" + (f"^{e}" if e != 1 else ""))
                s = "".join(parts)
            self._str = s
        return self._str

    def __repr__(self):
        return f"Expr({str(self)!r})"

    def __float__(self):
        return evaluate(self, {})


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value}")
        # the shortest decimal that round-trips, read exactly
        return Fraction(repr(value))
    if isinstance(value, Expr):
        v = value.const_value()
        if v is None:
            raise TypeError(f"{value} is not a rational constant")
        return v
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Expr.const(value)


@lru_cache(maxsize=None)
def _var_gen(name: str) -> Var:
    return Var(name)


ZERO = Expr({})
ONE = Expr({(): Fraction(1)})


def _den_product(den):
    out = {(): Fraction(1)}
    for p, e in den:
        out = _pmul(out, _ppow(p.terms, e))
    return out


def _make(num, den) -> Expr:
    if not num:
        return ZERO
    num = _reduce_terms(num)
    if not num:
        return ZERO
    factors: dict = {}
    for p, e in den:
        if not e:
            continue
        terms = _reduce_terms(p.terms)
        if terms is not p.terms:
            if not terms:
                raise ZeroDivisionError("denominator reduces to zero")
            c, mono, q = _normalize_factor(terms)
            num = _pscale(num, Fraction(1) / c**e, _mono_pow(mono, -e))
            if q is None:
                continue
            p = q
        factors[p] = factors.get(p, 0) + e
    for p in list(factors):
        e = factors[p]
        while e > 0:
            q = _exact_div(num, p.terms)
            if q is None:
                break
            num = q
            e -= 1
        factors[p] = e
    den = tuple(sorted(((p, e) for p, e in factors.items() if e), key=lambda pe: str(pe[0])))
    if not num:
        return ZERO
    return Expr(num, den)


def _add(a: Expr, b: Expr, sign: int) -> Expr:
    if not a.den and not b.den:
        r = _padd(a.num, b.num, sign)
        return Expr(r) if not _needs_reduce(r) else _make(r, ())
    if a.den == b.den:
        return _make(_padd(a.num, b.num, sign), a.den)
    fa, fb = dict(a.den), dict(b.den)
    lcm = {p: max(fa.get(p, 0), fb.get(p, 0)) for p in {*fa, *fb}}
    ma = _den_product([(p, e - fa.get(p, 0)) for p, e in lcm.items()])
    mb = _den_product([(p, e - fb.get(p, 0)) for p, e in lcm.items()])
    num = _padd(_pmul(a.num, ma), _pmul(b.num, mb), sign)
    return _make(num, tuple(lcm.items()))


def _mul(a: Expr, b: Expr) -> Expr:
    if not a.num or not b.num:
        return ZERO
    num = _pmul(a.num, b.num)
    if not a.den and not b.den:
        return Expr(num) if not _needs_reduce(num) else _make(num, ())
    return _make(num, a.den + b.den)


def _div(a: Expr, b: Expr) -> Expr:
    if not b.num:
        raise ZeroDivisionError("division by the zero expression")
    if not a.num:
        return ZERO
    c, mono, q = _normalize_factor(b.num)
    num = _pscale(a.num, Fraction(1) / c, _mono_pow(mono, -1))
    if b.den:
        num = _pmul(num, _den_product(b.den))
    den = a.den + (((q, 1),) if q is not None else ())
    if not den and not _needs_reduce(num):
        return Expr(num)
    return _make(num, den)


def _poly_diff(terms, name, memo) -> Expr:
    partials: dict = {}
    for m, c in terms.items():
        for i, (g, e) in enumerate(m):
            if name not in g.free:
                continue
            rest = m[:i] + (((g, e - 1),) if e != 1 else ()) + m[i + 1 :]
            d = partials.setdefault(g, {})
            s = d.get(rest, 0) + c * e
            if s:
                d[rest] = s
            else:
                d.pop(rest, None)
    out = ZERO
    for g, d in partials.items():
        if not d:
            continue
        part = _make(d, ()) if _needs_reduce(d) else Expr(d)
        if isinstance(g, Var):
            out = out + part
        else:
            dg = memo.get(g)
            if dg is None:
                dg = memo[g] = _atom_diff(g, name)
            out = out + part * dg
    return out


def _atom_diff(g: Atom, name: str) -> Expr:
    a = g.args[0]
    da = a.diff(name)
    f = g.func
    if f == "atan2":
        b = g.args[1]
        db = b.diff(name)
        return (b * da - a * db) / (a * a + b * b)
    if da.is_zero:
        return ZERO
    if f == "sin":
        return cos(a) * da
    if f == "cos":
        return -sin(a) * da
    if f == "exp":
        return _gen_expr(g) * da
    if f == "ln":
        return da / a
    if f == "root":
        return da * _gen_expr(g) / (a * g.k)
    raise ExprError(f"no derivative rule for {f}")


def _poly_subs(terms, mapping, memo) -> Expr:
    out = ZERO
    for m, c in terms.items():
        t = Expr.const(c)
        for g, e in m:
            v = memo.get(g)
            if v is None:
                if isinstance(g, Var):
                    v = mapping[g.name] if g.name in mapping else _gen_expr(g)
                else:
                    v = _apply(g.func, tuple(a.subs(mapping) for a in g.args), g.k)
                memo[g] = v
            t = t * v**e
        out = out + t
    return out


# ---------------------------------------------------------------------------
# atoms


def _atom_gen(func, args, k=0) -> Atom:
    return Atom(func, args, k)


def _gen_expr(g: Gen) -> Expr:
    return Expr({((g, 1),): Fraction(1)})


def _is_negative(e: Expr) -> bool:
    return e.leading_coefficient() < 0


def _unwrap(e: Expr, func: str):
    sg = e.single_gen()
    if sg and sg[0] == 1 and sg[2] == 1 and isinstance(sg[1], Atom) and sg[1].func == func:
        return sg[1].args[0]
    return None


def sin(e) -> Expr:
    e = as_expr(e)
    if e.is_zero:
        return ZERO
    if _is_negative(e):
        return -_gen_expr(_atom_gen("sin", (-e,)))
    return _gen_expr(_atom_gen("sin", (e,)))


def cos(e) -> Expr:
    e = as_expr(e)
    if e.is_zero:
        return ONE
    if _is_negative(e):
        e = -e
    return _gen_expr(_atom_gen("cos", (e,)))


def exp(e) -> Expr:
    e = as_expr(e)
    if e.is_zero:
        return ONE
    inner = _unwrap(e, "ln")
    if inner is not None:
        return inner
    sg = e.single_gen()
    if sg and sg[2] == 1 and isinstance(sg[1], Atom) and sg[1].func == "ln":
        # exp(c ln u) = u^c on the domain of ln
        return sg[1].args[0] ** sg[0]
    return _gen_expr(_atom_gen("exp", (e,)))


def ln(e) -> Expr:
    e = as_expr(e)
    if e == ONE:
        return ZERO
    inner = _unwrap(e, "exp")
    if inner is not None:
        return inner
    return _gen_expr(_atom_gen("ln", (e,)))


def _int_root(n: int, k: int):
    if n < 0:
        return None
    r = round(n ** (1.0 / k)) if n else 0
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand**k == n:
            return cand
    return None


def root(e, k: int) -> Expr:
    """Real ``k``-th root (odd ``k`` keeps the sign of ``e``)."""
    e = as_expr(e)
    if k < 1:
        raise ValueError("root index must be positive")
    if k == 1 or e.is_zero or e == ONE:
        return e
    c = e.const_value()
    if c is not None:
        if c < 0 and k % 2:
            return -root(-c, k)
        if c > 0:
            a, b = _int_root(c.numerator, k), _int_root(c.denominator, k)
            if a is not None and b is not None:
                return Expr.const(Fraction(a, b))
    return _gen_expr(_atom_gen("root", (e,), k))


def sqrt(e) -> Expr:
    return root(e, 2)


def atan2(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if a.is_zero:
        cb = b.const_value()
        if cb is not None and cb > 0:
            return ZERO
    return _gen_expr(_atom_gen("atan2", (a, b)))


def _apply(func, args, k=0) -> Expr:
    if func == "root":
        return root(args[0], k)
    if func == "atan2":
        return atan2(*args)
    return _FUNCS[func](args[0])


_FUNCS = {"sin": sin, "cos": cos, "exp": exp, "ln": ln, "sqrt": sqrt}


# ---------------------------------------------------------------------------
# public operations


def differentiate(e: Expr, v: str) -> Expr:
    return as_expr(e).diff(v)


def simplify(e: Expr) -> Expr:
    """Re-apply the rewrite rules (expressions are kept canonical, so this is idempotent)."""
    e = as_expr(e)
    return _make(e.num, e.den)


def _eval_gen(g, point, cache):
    v = cache.get(g)
    if v is not None:
        return v
    if isinstance(g, Var):
        try:
            v = float(point[g.name])
        except KeyError:
            raise ValueError(f"point does not assign coordinate {g.name!r}") from None
    else:
        args = [_eval(a, point, cache) for a in g.args]
        a = args[0]
        f = g.func
        if f == "sin":
            v = math.sin(a)
        elif f == "cos":
            v = math.cos(a)
        elif f == "exp":
            try:
                v = math.exp(a)
            except OverflowError:
                raise DomainError(f"overflow in {g}", str(g)) from None
        elif f == "ln":
            if a <= 0:
                raise DomainError(f"ln of non-positive value {a!r} in {g}", str(g))
            v = math.log(a)
        elif f == "root":
            if a < 0 and g.k % 2 == 0:
                raise DomainError(f"even root of negative value {a!r} in {g}", str(g))
            v = math.copysign(abs(a) ** (1.0 / g.k), a)
        elif f == "atan2":
            v = math.atan2(a, args[1])
        else:  # pragma: no cover
            raise ExprError(f"unknown function {f}")
    cache[g] = v
    return v


def _eval_terms(terms, point, cache):
    total = 0.0
    for m, c in terms.items():
        t = float(c)
        for g, e in m:
            x = _eval_gen(g, point, cache)
            if x == 0.0 and e < 0:
                raise DomainError(f"division by zero in {_fmt_gen_pow(g, e)}", str(g))
            try:
                t *= x**e
            except OverflowError:
                raise DomainError(f"overflow in {_fmt_gen_pow(g, e)}", str(g)) from None
        total += t
    return total


def _eval(e: Expr, point, cache) -> float:
    val = _eval_terms(e.num, point, cache)
    for p, k in e.den:
        d = _eval_terms(p.terms, point, cache)
        if d == 0.0:
            raise DomainError(f"division by zero: ({p}) vanishes", str(p))
        val /= d**k
    return val


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """IEEE double value of ``e``; raises DomainError naming the offending subexpression."""
    return _eval(as_expr(e), point, {})


def _samples(names, rng, n):
    return rng.uniform(-2.0, 2.0, size=(n, len(names)))


def is_identically_zero(
    e: Expr, *, samples: int = 25, tol: float = 1e-8, seed: int = 0, max_attempts: int = 200
) -> ZeroTest:
    e = as_expr(e)
    if e.is_zero:
        return ZeroTest.ZERO
    if not e.has_atoms():
        return ZeroTest.NONZERO
    names = sorted(e.free_vars)
    fn = compile_exprs((e,), tuple(names))
    rng = np.random.default_rng(seed)
    good = 0
    for x in _samples(names, rng, max_attempts):
        try:
            (v,) = fn(x)
        except DomainError:
            continue
        if not math.isfinite(v):
            continue
        if abs(v) > tol:
            return ZeroTest.NONZERO
        good += 1
        if good >= samples:
            break
    return ZeroTest.UNKNOWN


# ---------------------------------------------------------------------------
# compilation to plain Python for hot loops


def _root_helper(a, k):
    if a < 0 and k % 2 == 0:
        raise ValueError("even root of a negative number")
    return math.copysign(abs(a) ** (1.0 / k), a)


_NAMESPACE = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_ln": math.log,
    "_root": _root_helper,
    "_atan2": math.atan2,
}


class _Codegen:
    def __init__(self, names):
        self.index = {n: i for i, n in enumerate(names)}
        self.lines: list[str] = []
        self.locals: dict = {}

    def gen(self, g):
        name = self.locals.get(g)
        if name is not None:
            return name
        if isinstance(g, Var):
            if g.name not in self.index:
                raise ValueError(f"coordinate {g.name!r} not in the argument list")
            src = f"_x[{self.index[g.name]}]"
        else:
            args = [self.expr(a) for a in g.args]
            if g.func == "root":
                src = f"_root({args[0]}, {g.k})"
            elif g.func == "atan2":
                src = f"_atan2({args[0]}, {args[1]})"
            else:
                src = f"_{g.func}({args[0]})"
        name = f"_g{len(self.locals)}"
        self.locals[g] = name
        self.lines.append(f"    {name} = {src}")
        return name

    def terms(self, terms):
        if not terms:
            return "0.0"
        parts = []
        for m, c in terms.items():
            fac = [repr(float(c))]
            for g, e in m:
                v = self.gen(g)
                fac.append(v if e == 1 else f"{v}**{e}" if e > 0 else f"{v}**({e})")
            parts.append("*".join(fac))
        return "(" + " + ".join(parts) + ")"

    def expr(self, e):
        s = self.terms(e.num)
        for p, k in e.den:
            d = self.terms(p.terms)
            s = f"({s} / {d}" + (f"**{k})" if k != 1 else ")")
        return s


@lru_cache(maxsize=4096)
def _compile(exprs: tuple, names: tuple):
    cg = _Codegen(names)
    outs = [cg.expr(e) for e in exprs]
    src = "def _f(_x):\n" + "\n".join(cg.lines) + ("\n" if cg.lines else "")
    src += f"    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})\n"
    ns = dict(_NAMESPACE)
    exec(compile(src, "<liequad-expr>", "exec"), ns)
    return ns["_f"]


def compile_exprs(exprs: Sequence[Expr], names: Sequence[str]) -> Callable[[Sequence[float]], tuple]:
    """Compile expressions into ``f(x) -> tuple`` over coordinates ``names``.

    Domain failures are re-raised as DomainError with the offending subexpression.
    """
    exprs = tuple(as_expr(e) for e in exprs)
    names = tuple(names)
    raw = _compile(exprs, names)

    def fn(x):
        try:
            return raw(x)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            point = {n: float(v) for n, v in zip(names, x)}
            for e in exprs:
                evaluate(e, point)
            raise DomainError(f"numerical failure: {exc}") from None

    return fn


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos == n:
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, coords):
        self.toks = _tokenize(text)
        self.i = 0
        self.coords = coords

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value or kind == "end":
            raise ParseError(f"expected {value!r} but found {v or 'end of input'!r}", pos)

    def parse(self):
        e = self.sum()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {v!r}", pos)
        return e

    def sum(self):
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.product()
            e = e + rhs if op == "+" else e - rhs
        return e

    def product(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            rhs = self.unary()
            if op == "*":
                e = e * rhs
            else:
                if rhs.is_zero:
                    raise ParseError("division by literal zero", pos)
                e = e / rhs
        return e

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            e = self.unary()
            return -e if v == "-" else e
        return self.power()

    def exponent(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            e = self.exponent()
            return -e if v == "-" else e
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            _, _, pos = self.take()
            ex = self.exponent()
            r = ex.const_value()
            if r is None:
                raise ParseError("exponent must be an integer or rational literal", pos)
            if base.is_zero and r < 0:
                raise ParseError("zero raised to a negative power", pos)
            return base**r
        return base

    def primary(self):
        kind, v, pos = self.take()
        if kind == "num":
            return Expr.const(Fraction(v))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if v not in _FUNCS:
                    raise UnknownIdentifierError(v, pos)
                self.take()
                arg = self.sum()
                self.expect(")")
                return _FUNCS[v](arg)
            if v not in self.coords:
                raise UnknownIdentifierError(v, pos)
            return Expr.var(v)
        if kind == "op" and v == "(":
            e = self.sum()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {v or 'end of input'!r}", pos)


def parse(text: str, coords: CoordinateSystem | Iterable[str]) -> Expr:
    """Parse ``text`` against the expression grammar; identifiers must name coordinates."""
    if not isinstance(coords, CoordinateSystem):
        coords = CoordinateSystem(tuple(coords))
    return _Parser(text, coords).parse()

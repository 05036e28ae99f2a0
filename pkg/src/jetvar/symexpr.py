"""Exact expression core over jet coordinates.

An :class:`Expr` is a finite sum of terms, each an exact rational coefficient
times a product of atoms raised to integer powers.  Every ``Expr`` is kept in
canonical form at all times, so structural equality is mathematical equality
inside the polynomial-in-atoms fragment.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from bisect import bisect_left
from fractions import Fraction

from gmpy2 import mpq
from typing import Callable, Iterable, Iterator, Mapping, Union

Number = Union[int, Fraction, "mpq"]

DEFAULT_MAX_JET_ORDER = 4


class MaxJetOrderExceeded(ValueError):
    """A total derivative would produce a jet variable above the ceiling."""


class SingularPoint(ArithmeticError):
    """A derived atom is undefined at the requested numeric point."""


class NonlinearError(ValueError):
    """An expression expected to be linear in some variables is not."""


def max_jet_order() -> int:
    raw = os.environ.get("JETVAR_MAX_JET_ORDER")
    return int(raw) if raw else DEFAULT_MAX_JET_ORDER


# --------------------------------------------------------------------------
# multi-indices


class MultiIndex(tuple):
    """Symmetric multi-index stored as per-direction derivative counts."""

    __slots__ = ()

    def __new__(cls, counts: Iterable[int]):
        counts = tuple(int(c) for c in counts)
        if any(c < 0 for c in counts):
            raise ValueError("multi-index counts must be non-negative")
        return super().__new__(cls, counts)

    @classmethod
    def zero(cls, n: int) -> MultiIndex:
        return cls((0,) * n)

    @classmethod
    def unit(cls, mu: int, n: int) -> MultiIndex:
        return cls(1 if i == mu else 0 for i in range(n))

    @classmethod
    def from_directions(cls, dirs: Iterable[int], n: int) -> MultiIndex:
        counts = [0] * n
        for d in dirs:
            counts[d] += 1
        return cls(counts)

    @property
    def n(self) -> int:
        return len(self)

    @property
    def order(self) -> int:
        return sum(self)

    def raised(self, mu: int) -> MultiIndex:
        c = list(self)
        c[mu] += 1
        return MultiIndex(c)

    def lowered(self, mu: int) -> MultiIndex | None:
        if self[mu] == 0:
            return None
        c = list(self)
        c[mu] -= 1
        return MultiIndex(c)

    def directions(self) -> tuple[int, ...]:
        """Sorted list of directions, e.g. counts (1,2) -> (0, 1, 1)."""
        return tuple(mu for mu, c in enumerate(self) for _ in range(c))

    def __add__(self, other):  # type: ignore[override]
        return MultiIndex(a + b for a, b in zip(self, other))

    def __sub__(self, other) -> MultiIndex | None:
        diff = [a - b for a, b in zip(self, other)]
        return None if min(diff, default=0) < 0 else MultiIndex(diff)

    def __repr__(self) -> str:
        return f"MultiIndex{tuple(self)}"


def multi_indices(n: int, max_order: int, min_order: int = 0) -> list[MultiIndex]:
    """All multi-indices of length n with order in [min_order, max_order]."""
    out: list[MultiIndex] = []

    def rec(prefix: list[int], left: int) -> None:
        if len(prefix) == n - 1:
            for last in range(left + 1):
                out.append(MultiIndex(prefix + [last]))
            return
        for c in range(left + 1):
            rec(prefix + [c], left - c)

    if n == 0:
        return [MultiIndex(())]
    rec([], max_order)
    out = [m for m in out if m.order >= min_order]
    out.sort(key=lambda m: (m.order, tuple(-c for c in m)))
    return out


# --------------------------------------------------------------------------
# atoms

_REGISTRY: dict[tuple, "Atom"] = {}
_ATOMS: list["Atom"] = []


class Atom:
    """Interned symbol.  Subclasses define ``key`` and derivative rules."""

    __slots__ = ("id", "key", "__weakref__")
    kind_rank = 9

    def __new__(cls, *args):
        key = (cls.kind_rank, cls.__name__) + cls._key_args(*args)
        hit = _REGISTRY.get(key)
        if hit is not None:
            return hit
        obj = super().__new__(cls)
        obj.key = key
        obj._init(*args)
        obj.id = len(_ATOMS)
        _ATOMS.append(obj)
        _REGISTRY[key] = obj
        return obj

    @classmethod
    def _key_args(cls, *args) -> tuple:
        return tuple(args)

    def _init(self, *args) -> None:
        pass

    def __reduce__(self):
        return (type(self), self._ctor_args())

    def _ctor_args(self) -> tuple:
        return self.key[2:]

    def __repr__(self) -> str:
        return self.dsl()

    def __lt__(self, other: Atom) -> bool:
        return self.key < other.key

    # derivative hooks
    def partial(self, v: JetVariable) -> Expr:
        return ZERO

    def dependencies(self) -> tuple[JetVariable, ...]:
        return ()

    def total_derivative(self, mu: int) -> Expr:
        cached = _TD_CACHE.get((self.id, mu))
        if cached is not None:
            return cached
        out = ZERO
        for v in self.dependencies():
            out = out + self.partial(v) * Expr.atom(v.shifted(mu))
        _TD_CACHE[(self.id, mu)] = out
        return out

    def evaluate(self, point: JetPoint) -> float:
        raise SingularPoint(f"no value for {self!r}")

    def dsl(self) -> str:
        return str(self.key)

    def latex(self) -> str:
        return self.dsl()


_TD_CACHE: dict[tuple[int, int], "Expr"] = {}
_PARTIAL_CACHE: dict[tuple[int, int], "Expr"] = {}


class Coord(Atom):
    """Base coordinate x^mu."""

    __slots__ = ("mu",)
    kind_rank = 0

    def _init(self, mu: int) -> None:
        self.mu = mu

    def total_derivative(self, mu: int) -> Expr:
        return ONE if mu == self.mu else ZERO

    def evaluate(self, point: JetPoint) -> float:
        return point.coord(self.mu)

    def dsl(self) -> str:
        return f"x[{self.mu}]"

    def latex(self) -> str:
        return f"x^{{{self.mu}}}"


class Param(Atom):
    """Named scalar parameter such as a coupling constant."""

    __slots__ = ("name",)
    kind_rank = 1

    def _init(self, name: str) -> None:
        self.name = name

    def total_derivative(self, mu: int) -> Expr:
        return ZERO

    def evaluate(self, point: JetPoint) -> float:
        return point.param(self.name)

    def dsl(self) -> str:
        return self.name

    def latex(self) -> str:
        from .render import param_latex

        return param_latex(self.name)


class JetVariable(Atom):
    """Field component ``field[comp]`` differentiated along ``index``."""

    __slots__ = ("field", "comp", "index")
    kind_rank = 2

    @classmethod
    def _key_args(cls, field: str, comp: tuple, index: MultiIndex) -> tuple:
        return (field, tuple(comp), MultiIndex(index))

    def _init(self, field: str, comp: tuple, index: MultiIndex) -> None:
        self.field = field
        self.comp = tuple(comp)
        self.index = MultiIndex(index)

    @property
    def order(self) -> int:
        return self.index.order

    @property
    def base(self) -> JetVariable:
        return JetVariable(self.field, self.comp, MultiIndex.zero(len(self.index)))

    def shifted(self, mu: int) -> JetVariable:
        if self.index.order + 1 > max_jet_order():
            raise MaxJetOrderExceeded(
                f"d_{mu} {self.dsl()} exceeds jet order {max_jet_order()}"
            )
        return JetVariable(self.field, self.comp, self.index.raised(mu))

    def with_index(self, index: MultiIndex) -> JetVariable:
        if index.order > max_jet_order():
            raise MaxJetOrderExceeded(f"jet order {index.order} above ceiling")
        return JetVariable(self.field, self.comp, index)

    def total_derivative(self, mu: int) -> Expr:
        return Expr.atom(self.shifted(mu))

    def evaluate(self, point: JetPoint) -> float:
        return point.value(self)

    def dsl(self) -> str:
        comp = ",".join(str(c) for c in self.comp)
        if self.index.order == 0:
            return f"{self.field}[{comp}]" if self.comp else self.field
        dirs = ",".join(str(d) for d in self.index.directions())
        return f"{self.field}[{comp}; {dirs}]"

    def latex(self) -> str:
        comp = "".join(str(c) for c in self.comp)
        dirs = "".join(str(d) for d in self.index.directions())
        sub = comp + ("," + dirs if dirs else "")
        return f"{self.field}_{{{sub}}}" if sub else self.field


def jet(field: str, comp: Iterable[int] = (), dirs: Iterable[int] = (), n: int = 1) -> JetVariable:
    """Convenience constructor from a list of derivative directions."""
    return JetVariable(field, tuple(comp), MultiIndex.from_directions(dirs, n))


# --------------------------------------------------------------------------
# expressions

Monomial = tuple  # tuple of (atom_id, exponent) pairs sorted by atom_id


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    if len(a) < len(b):
        a, b = b, a
    out = a
    for ib, eb in b:
        pos = bisect_left(out, (ib,))
        if pos < len(out) and out[pos][0] == ib:
            e = out[pos][1] + eb
            out = out[:pos] + (((ib, e),) if e else ()) + out[pos + 1:]
        else:
            out = out[:pos] + ((ib, eb),) + out[pos:]
    return out


_MPQ = type(mpq(1, 2))


def _coerce(c: Number) -> Number:
    """Normalize a coefficient: int when integral, else an exact mpq."""
    if type(c) is int:
        return c
    if type(c) is not _MPQ:
        c = mpq(c)
    return int(c.numerator) if c.denominator == 1 else c


class Expr:
    """Canonical sum of rational-coefficient monomials in atoms."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Number] | None = None):
        self.terms: dict[Monomial, Number] = dict(terms) if terms else {}
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> Expr:
        e = cls.__new__(cls)
        e.terms = terms
        e._hash = None
        return e

    # constructors
    @classmethod
    def const(cls, c: Number) -> Expr:
        c = _coerce(c)
        return cls._raw({(): c}) if c else cls._raw({})

    @classmethod
    def atom(cls, a: Atom, exp: int = 1) -> Expr:
        return cls._raw({((a.id, exp),): 1}) if exp else ONE

    # inspection
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def constant_value(self) -> Number:
        return self.terms.get((), 0)

    def atoms(self) -> set[Atom]:
        return {_ATOMS[i] for m in self.terms for i, _ in m}

    def jet_variables(self) -> set[JetVariable]:
        return {a for a in self.atoms() if isinstance(a, JetVariable)}

    def dependencies(self) -> set[JetVariable]:
        """Jet variables the expression depends on, including through derived atoms."""
        out: set[JetVariable] = set()
        for a in self.atoms():
            if isinstance(a, JetVariable):
                out.add(a)
            else:
                out.update(a.dependencies())
        return out

    def items(self) -> Iterator[tuple[tuple[tuple[Atom, int], ...], Number]]:
        for m, c in self.terms.items():
            yield tuple((_ATOMS[i], e) for i, e in m), c

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, _MPQ)):
            other = Expr.const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # arithmetic
    def __add__(self, other) -> Expr:
        if not isinstance(other, Expr):
            if other == 0:
                return self
            other = Expr.const(other)
        if len(self.terms) < len(other.terms):
            small, big = self.terms, other.terms
        else:
            small, big = other.terms, self.terms
        if not small:
            return Expr._raw(big) if big is not self.terms else self
        out = dict(big)
        for m, c in small.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            else:
                out.pop(m, None)
        return Expr._raw(out)

    __radd__ = __add__

    def __neg__(self) -> Expr:
        return Expr._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> Expr:
        if not isinstance(other, Expr):
            other = Expr.const(other)
        return self + (-other)

    def __rsub__(self, other) -> Expr:
        return (-self) + other

    def scale(self, c: Number) -> Expr:
        if not c:
            return ZERO
        if c == 1:
            return self
        return Expr._raw({m: _coerce(v * c) for m, v in self.terms.items()})

    def __mul__(self, other) -> Expr:
        if not isinstance(other, Expr):
            if isinstance(other, Atom):
                other = Expr.atom(other)
            else:
                return self.scale(other)
        a, b = self.terms, other.terms
        if not a or not b:
            return ZERO
        if len(a) < len(b):
            a, b = b, a
        out: dict = {}
        get = out.get
        for mb, cb in b.items():
            for ma, ca in a.items():
                m = _mono_mul(ma, mb)
                v = get(m, 0) + ca * cb
                if v:
                    out[m] = v
                else:
                    del out[m]
        for m in out:
            out[m] = _coerce(out[m])
        return Expr._raw(out)

    __rmul__ = __mul__

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def __pow__(self, k: int) -> Expr:
        if k < 0:
            if not self.is_monomial():
                raise ValueError("negative powers are only defined for monomials")
            (m, c), = self.terms.items()
            return Expr._raw({tuple((i, e * k) for i, e in m): _coerce(mpq(c) ** k)})
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __truediv__(self, other) -> Expr:
        if isinstance(other, Expr):
            if other.is_constant():
                return self.scale(1 / mpq(other.constant_value()))
            return self * other ** -1
        return self.scale(1 / mpq(other))

    def __repr__(self) -> str:
        from .render import to_dsl

        return f"Expr({to_dsl(self)})"

    def __str__(self) -> str:
        from .render import to_dsl

        return to_dsl(self)


ZERO = Expr._raw({})
ONE = Expr._raw({(): 1})


def atom_by_id(i: int) -> Atom:
    return _ATOMS[i]


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, Atom):
        return Expr.atom(x)
    return Expr.const(x)


def sum_exprs(items: Iterable[Expr]) -> Expr:
    """Sum many expressions with a single accumulation dict."""
    out: dict = {}
    get = out.get
    for e in items:
        for m, c in e.terms.items():
            v = get(m, 0) + c
            if v:
                out[m] = v
            else:
                del out[m]
    return Expr._raw(out)


# --------------------------------------------------------------------------
# unevaluated trees and canonicalize


@dataclass(frozen=True)
class Add:
    args: tuple


@dataclass(frozen=True)
class Mul:
    args: tuple


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


def canonicalize(e) -> Expr:
    """Expand a tree (or re-normalize an Expr) into the unique canonical form."""
    if isinstance(e, Expr):
        out: dict = {}
        for m, c in e.terms.items():
            acc: dict[int, int] = {}
            for i, k in m:
                acc[i] = acc.get(i, 0) + k
            key = tuple(sorted((i, k) for i, k in acc.items() if k))
            v = out.get(key, 0) + c
            if v:
                out[key] = _coerce(v)
            else:
                out.pop(key, None)
        return Expr._raw(out)
    if isinstance(e, Atom):
        return Expr.atom(e)
    if isinstance(e, (int, Fraction, _MPQ)):
        return Expr.const(e)
    if isinstance(e, Add):
        return sum_exprs(canonicalize(a) for a in e.args)
    if isinstance(e, Mul):
        out_e = ONE
        for a in e.args:
            out_e = out_e * canonicalize(a)
        return out_e
    if isinstance(e, Pow):
        return canonicalize(e.base) ** e.exp
    raise TypeError(f"cannot canonicalize {type(e).__name__}")


# --------------------------------------------------------------------------
# differentiation


def _atom_partial(a: Atom, v: JetVariable) -> Expr:
    if a is v:
        return ONE
    if isinstance(a, (JetVariable, Coord, Param)):
        return ZERO
    key = (a.id, v.id)
    hit = _PARTIAL_CACHE.get(key)
    if hit is None:
        hit = a.partial(v)
        _PARTIAL_CACHE[key] = hit
    return hit


def _differentiate(e: Expr, atom_derivative: Callable[[Atom], Expr]) -> Expr:
    """Generic derivation: sum over atoms of exp * atom^(exp-1) * D(atom)."""
    out: dict = {}
    get = out.get
    local: dict[int, Expr] = {}
    for m, c in e.terms.items():
        for pos, (i, k) in enumerate(m):
            d = local.get(i)
            if d is None:
                d = atom_derivative(_ATOMS[i])
                local[i] = d
            if not d.terms:
                continue
            if k == 1:
                rest = m[:pos] + m[pos + 1:]
            else:
                rest = m[:pos] + ((i, k - 1),) + m[pos + 1:]
            ck = c * k
            for md, cd in d.terms.items():
                mm = _mono_mul(rest, md)
                val = get(mm, 0) + ck * cd
                if val:
                    out[mm] = val
                else:
                    del out[mm]
    return Expr._raw({m: _coerce(c) for m, c in out.items()})


def partial(e: Expr, v: JetVariable) -> Expr:
    """Partial derivative with respect to a jet coordinate."""
    return _differentiate(e, lambda a: _atom_partial(a, v))


def total_derivative(e: Expr, mu: int) -> Expr:
    """Formal derivative d_mu, raising MaxJetOrderExceeded above the ceiling."""
    return _differentiate(e, lambda a: a.total_derivative(mu))


def total_derivative_multi(e: Expr, index: MultiIndex) -> Expr:
    for mu in index.directions():
        e = total_derivative(e, mu)
    return e


# --------------------------------------------------------------------------
# substitution and linear decomposition


def substitute(e: Expr, mapping: Mapping[Atom, Expr]) -> Expr:
    """Replace atoms by expressions (negative powers need monomial images)."""
    ids = {a.id: as_expr(v) for a, v in mapping.items()}
    if not ids:
        return e
    pow_cache: dict[tuple[int, int], Expr] = {}
    parts: list[Expr] = []
    for m, c in e.terms.items():
        keep = []
        factors = []
        for i, k in m:
            if i in ids:
                p = pow_cache.get((i, k))
                if p is None:
                    p = ids[i] ** k
                    pow_cache[(i, k)] = p
                factors.append(p)
            else:
                keep.append((i, k))
        if not factors:
            parts.append(Expr._raw({m: c}))
            continue
        term = Expr._raw({tuple(keep): c})
        for f in factors:
            term = term * f
        parts.append(term)
    return sum_exprs(parts)


def linear_coefficients(
    e: Expr, is_var: Callable[[Atom], bool]
) -> tuple[dict[Atom, Expr], Expr]:
    """Split e = sum_v coeff_v * v + rest with rest free of variables."""
    coeffs: dict[int, dict] = {}
    rest: dict = {}
    for m, c in e.terms.items():
        hits = [(pos, i, k) for pos, (i, k) in enumerate(m) if is_var(_ATOMS[i])]
        if not hits:
            rest[m] = c
            continue
        if len(hits) > 1 or hits[0][2] != 1:
            raise NonlinearError(f"term is not linear in the variables: {Expr._raw({m: c})}")
        pos, i, _ = hits[0]
        coeffs.setdefault(i, {})[m[:pos] + m[pos + 1:]] = c
    return {_ATOMS[i]: Expr._raw(t) for i, t in coeffs.items()}, Expr._raw(rest)


def substitute_jets(e: Expr, values: Mapping[tuple[str, tuple], Expr]) -> Expr:
    """Replace jets of sections ``(field, comp)`` by formal derivatives of values."""
    mapping: dict[Atom, Expr] = {}
    for a in e.atoms():
        if isinstance(a, JetVariable) and (a.field, a.comp) in values:
            mapping[a] = total_derivative_multi(as_expr(values[(a.field, a.comp)]), a.index)
    return substitute(e, mapping)


def max_order(e: Expr, fields: Iterable[str] | None = None) -> int:
    wanted = set(fields) if fields is not None else None
    best = 0
    for a in e.atoms():
        if isinstance(a, JetVariable) and (wanted is None or a.field in wanted):
            best = max(best, a.order)
    return best


# --------------------------------------------------------------------------
# numeric evaluation


def default_energy(rho: float, k: int) -> float:
    """Default internal-energy closure e(rho) = rho and its derivatives."""
    return rho if k == 0 else (1.0 if k == 1 else 0.0)


@dataclass
class JetPoint:
    """Numeric values for independent atoms; derived atoms are computed."""

    values: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    coords: tuple = ()
    energy: Callable[[float, int], float] = default_energy
    _cache: dict = field(default_factory=dict, repr=False)

    def value(self, v: JetVariable) -> float:
        try:
            return self.values[v]
        except KeyError:
            raise SingularPoint(f"no value assigned to {v.dsl()}") from None

    def param(self, name: str) -> float:
        try:
            return self.params[name]
        except KeyError:
            raise SingularPoint(f"no value for parameter {name}") from None

    def coord(self, mu: int) -> float:
        return self.coords[mu] if mu < len(self.coords) else 0.0

    def atom_value(self, a: Atom) -> float:
        hit = self._cache.get(a.id)
        if hit is None:
            hit = a.evaluate(self)
            self._cache[a.id] = hit
        return hit


def eval_terms(e: Expr, point: JetPoint) -> tuple[float, float]:
    """Return (value, sum of absolute term values) at a point."""
    vals: dict[int, float] = {}
    total = 0.0
    scale = 0.0
    for m, c in e.terms.items():
        t = float(c)
        for i, k in m:
            x = vals.get(i)
            if x is None:
                x = point.atom_value(_ATOMS[i])
                vals[i] = x
            if k < 0 and x == 0.0:
                raise SingularPoint(f"division by zero atom {_ATOMS[i]!r}")
            t *= x**k
        total += t
        scale += abs(t)
    if math.isnan(total):
        raise SingularPoint("evaluation produced NaN")
    return total, scale


def eval_numeric(e: Expr, point: JetPoint) -> float:
    return eval_terms(e, point)[0]


def relative_error(a: Expr, b: Expr, point: JetPoint) -> float:
    """|a-b| relative to the magnitude of the terms of a and b."""
    va, sa = eval_terms(a, point)
    vb, sb = eval_terms(b, point)
    denom = max(abs(va), abs(vb), sa * 1e-3, sb * 1e-3, 1e-300)
    return abs(va - vb) / denom

"""Variational morphisms, contraction, divergence, and integration by parts.

A :class:`VarMorphism` is a linear functional on the jets of an auxiliary
section ``V`` with coefficients in the jet algebra of the fields, valued in
base forms of codegree ``c``.  Its table maps
``(aux, comp, multi-index, base tuple) -> coefficient`` where the base tuple
is strictly increasing and has length ``c``.  Pairing with formal jets of the
auxiliary section gives one expression per base tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Callable, Iterable, Mapping

from .symexpr import (
    ZERO,
    Expr,
    JetVariable,
    MultiIndex,
    linear_coefficients,
    max_jet_order,
    partial,
    sum_exprs,
    total_derivative,
    total_derivative_multi,
)

if TYPE_CHECKING:
    from .modeldef import Model

Key = tuple  # (aux, comp, MultiIndex, base tuple)


class ShapeMismatch(ValueError):
    """Morphism and prolonged table do not act on the same bundle."""


def normalize_base(idx: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sort an antisymmetric index tuple; return (sign, sorted) or (0, ())."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


@dataclass(frozen=True)
class VarMorphism:
    codegree: int
    target: str
    n: int
    table: Mapping[Key, Expr] = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return max((k[2].order for k in self.table), default=0)

    def aux_var(self, aux: str, comp: tuple, index: MultiIndex) -> JetVariable:
        return JetVariable(aux, comp, index)

    def pair(self) -> dict[tuple[int, ...], Expr]:
        """Components of <M | j V> with V's jets as formal jet variables."""
        parts: dict[tuple, list] = {}
        for (aux, comp, idx, base), c in self.table.items():
            parts.setdefault(base, []).append(c * Expr.atom(JetVariable(aux, comp, idx)))
        return {b: sum_exprs(v) for b, v in parts.items()}

    def component(self, base: tuple[int, ...] = ()) -> Expr:
        return self.pair().get(tuple(base), ZERO)

    def coefficient(self, aux: str, comp: tuple, index: MultiIndex, base: tuple = ()) -> Expr:
        return self.table.get((aux, tuple(comp), MultiIndex(index), tuple(base)), ZERO)

    def __add__(self, other: VarMorphism) -> VarMorphism:
        if (self.codegree, self.target, self.n) != (other.codegree, other.target, other.n):
            raise ShapeMismatch("cannot add morphisms of different shape")
        return VarMorphism(self.codegree, self.target, self.n, _merge(self.table, other.table))

    def scale(self, c) -> VarMorphism:
        return VarMorphism(self.codegree, self.target, self.n, _clean({k: v * c for k, v in self.table.items()}))

    def __sub__(self, other: VarMorphism) -> VarMorphism:
        return self + other.scale(-1)

    def is_zero(self) -> bool:
        return not self.table

    def __eq__(self, other) -> bool:
        if not isinstance(other, VarMorphism):
            return NotImplemented
        return (self.codegree, self.target, self.n) == (other.codegree, other.target, other.n) and dict(
            self.table
        ) == dict(other.table)

    def __hash__(self) -> int:
        return hash((self.codegree, self.target, self.n, frozenset(self.table.items())))

    def map_coefficients(self, fn: Callable[[Expr], Expr]) -> VarMorphism:
        return VarMorphism(self.codegree, self.target, self.n, _clean({k: fn(v) for k, v in self.table.items()}))


def _clean(table: Mapping[Key, Expr]) -> dict[Key, Expr]:
    return {k: v for k, v in table.items() if not v.is_zero()}


def _merge(*tables: Mapping[Key, Expr]) -> dict[Key, Expr]:
    acc: dict[Key, list] = {}
    for t in tables:
        for k, v in t.items():
            acc.setdefault(k, []).append(v)
    return _clean({k: sum_exprs(v) for k, v in acc.items()})


def from_pairing(
    components: Mapping[tuple[int, ...], Expr],
    aux_fields: Iterable[str],
    codegree: int,
    target: str,
    n: int,
) -> tuple[VarMorphism, dict[tuple[int, ...], Expr]]:
    """Read a morphism off expressions linear in the jets of ``aux_fields``.

    Returns the morphism and the aux-free remainders per base tuple.
    """
    names = set(aux_fields)
    is_var = lambda a: isinstance(a, JetVariable) and a.field in names  # noqa: E731
    table: dict[Key, Expr] = {}
    rest: dict[tuple, Expr] = {}
    for base, e in components.items():
        sign, b = normalize_base(base)
        if sign == 0:
            continue
        coeffs, r = linear_coefficients(e, is_var)
        for v, c in coeffs.items():
            k = (v.field, v.comp, v.index, b)
            table[k] = table.get(k, ZERO) + c.scale(sign)
        if not r.is_zero():
            rest[b] = rest.get(b, ZERO) + r.scale(sign)
    return VarMorphism(codegree, target, n, _clean(table)), rest


# --------------------------------------------------------------------------
# first variation and parametrizations


def variation_name(field_name: str) -> str:
    return "δ" + field_name


def first_variation(L: Expr, m: Model) -> VarMorphism:
    """Coefficients dL/dy^a_nu for every field jet the Lagrangian touches."""
    names = {f.name for f in m.fields}
    table: dict[Key, Expr] = {}
    for v in sorted(L.dependencies(), key=lambda a: a.key):
        if v.field not in names:
            continue
        c = partial(L, v)
        if not c.is_zero():
            table[(variation_name(v.field), v.comp, v.index, ())] = c
    return VarMorphism(0, "fields", m.n, table)


def prolong_morphism(m: Model, k: int) -> dict[tuple[str, tuple, MultiIndex], Expr]:
    """d_nu (p^a_A eps^A + p^{a mu}_A d_mu eps^A) for all |nu| <= k.

    Values are expressions linear in the parameter jets.
    """
    from .symexpr import multi_indices

    P = m.parametrization
    if k + P.order > max_jet_order():
        from .symexpr import MaxJetOrderExceeded

        raise MaxJetOrderExceeded(f"prolongation order {k} + {P.order} above ceiling")
    out: dict = {}
    for (fname, comp), delta in P.deltas.items():
        for nu in multi_indices(m.n, k):
            out[(fname, comp, nu)] = total_derivative_multi(delta, nu)
    return out


def contract(M: VarMorphism, T: Mapping[tuple[str, tuple, MultiIndex], Expr], m: Model) -> VarMorphism:
    """Formal contraction <M | T>: new target is the parameter bundle."""
    if M.target != "fields":
        raise ShapeMismatch("contraction expects a morphism on field variations")
    by_base: dict[tuple, list] = {}
    for (aux, comp, idx, base), c in M.table.items():
        fname = aux[1:]
        t = T.get((fname, comp, idx))
        if t is None:
            if (fname, comp) in m.parametrization.deltas:
                raise ShapeMismatch(f"prolonged table lacks order {idx.order} for {fname}{comp}")
            continue
        by_base.setdefault(base, []).append(c * t)
    comps = {b: sum_exprs(v) for b, v in by_base.items()}
    morph, rest = from_pairing(comps, m.parametrization.param_names(), M.codegree, "params", M.n)
    if any(not r.is_zero() for r in rest.values()):
        raise ShapeMismatch("parametrization has a parameter-free part")
    return morph


# --------------------------------------------------------------------------
# divergence


def divergence(M: VarMorphism) -> VarMorphism:
    """(Div M)^T = sum_mu d_mu (M^{T mu}) acting on the prolonged section."""
    if M.codegree < 1:
        raise ValueError("divergence needs codegree >= 1")
    parts: dict[tuple, list] = {}
    for (aux, comp, idx, base), c in M.table.items():
        for pos, mu in enumerate(base):
            rest = base[:pos] + base[pos + 1:]
            # move mu to the last slot
            sign = (-1) ** (len(base) - 1 - pos)
            v = Expr.atom(JetVariable(aux, comp, idx))
            dv = Expr.atom(JetVariable(aux, comp, idx.raised(mu)))
            parts.setdefault(rest, []).append((total_derivative(c, mu) * v + c * dv).scale(sign))
    comps = {b: sum_exprs(v) for b, v in parts.items()}
    auxes = {k[0] for k in M.table}
    morph, _ = from_pairing(comps, auxes, M.codegree - 1, M.target, M.n)
    return morph


def divergence_of_components(components: Mapping[tuple[int, ...], Expr], n: int) -> dict[tuple, Expr]:
    """Div of plain form components (no auxiliary section)."""
    parts: dict[tuple, list] = {}
    for base, c in components.items():
        for pos, mu in enumerate(base):
            rest = base[:pos] + base[pos + 1:]
            sign = (-1) ** (len(base) - 1 - pos)
            parts.setdefault(rest, []).append(total_derivative(c, mu).scale(sign))
    return {b: sum_exprs(v) for b, v in parts.items()}


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitResult:
    volume: VarMorphism
    boundary: VarMorphism


def _pick_direction(idx: MultiIndex, strategy: str) -> int:
    dirs = [mu for mu, c in enumerate(idx) if c]
    return dirs[0] if strategy == "lex" else dirs[-1]


def split(M: VarMorphism, strategy: str = "lex") -> SplitResult:
    """Integrate by parts until the volume part has rank 0.

    Highest-order terms are processed first; each is written as
    d_mu(c V_beta) - d_mu(c) V_beta with mu the smallest direction present
    (``strategy="lex"``) or the largest (``"revlex"``).
    """
    if M.codegree != 0:
        raise ValueError("split expects a codegree-0 morphism")
    work: dict[tuple, list] = {}
    for (aux, comp, idx, _), c in M.table.items():
        work.setdefault((aux, comp, idx), []).append(c)
    boundary: dict[Key, list] = {}
    top = max((k[2].order for k in work), default=0)
    for h in range(top, 0, -1):
        keys = sorted((k for k in work if k[2].order == h), key=lambda k: (k[0], k[1], tuple(-c for c in k[2])))
        for key in keys:
            aux, comp, idx = key
            c = sum_exprs(work.pop(key))
            if c.is_zero():
                continue
            mu = _pick_direction(idx, strategy)
            beta = idx.lowered(mu)
            boundary.setdefault((aux, comp, beta, (mu,)), []).append(c)
            work.setdefault((aux, comp, beta), []).append(-total_derivative(c, mu))
    vol = _clean({(a, c, i, ()): sum_exprs(v) for (a, c, i), v in work.items()})
    bnd = _clean({k: sum_exprs(v) for k, v in boundary.items()})
    return SplitResult(VarMorphism(0, M.target, M.n, vol), VarMorphism(1, M.target, M.n, bnd))


def reduce_codegree(M: VarMorphism) -> SplitResult:
    """Move the antisymmetric part of derivative terms into a codegree+1 boundary.

    Implemented for codegree 1: a term K^{alpha mu} V_{beta + 1_mu} is split
    into its antisymmetric part in (alpha, mu), integrated by parts, and its
    symmetric part, which stays in the volume.  Orders are processed from the
    top down; coefficients of a multi-index are shared among its direction
    decompositions in proportion to multiplicity.
    """
    if M.codegree != 1:
        raise NotImplementedError("reduce_codegree is implemented for codegree 1")
    n = M.n
    work: dict[tuple, list] = {}
    for (aux, comp, idx, base), c in M.table.items():
        work.setdefault((aux, comp, idx, base), []).append(c)
    boundary: dict[Key, list] = {}
    top = max((k[2].order for k in work), default=0)
    for h in range(top, 0, -1):
        keys = [k for k in work if k[2].order == h]
        coeff = {k: sum_exprs(work.pop(k)) for k in keys}
        # K[(aux, comp, beta)][(alpha, mu)] = weighted coefficient
        K: dict[tuple, dict] = {}
        for (aux, comp, idx, base), c in coeff.items():
            (alpha,) = base
            for mu in range(n):
                if idx[mu] == 0:
                    continue
                beta = idx.lowered(mu)
                w = Fraction(idx[mu], h)
                K.setdefault((aux, comp, beta), {})[(alpha, mu)] = c.scale(w)
        for (aux, comp, beta), mat in sorted(K.items(), key=lambda kv: (kv[0][0], kv[0][1], tuple(kv[0][2]))):
            for alpha in range(n):
                for mu in range(n):
                    kam = mat.get((alpha, mu), ZERO)
                    kma = mat.get((mu, alpha), ZERO)
                    sym = (kam + kma).scale(Fraction(1, 2))
                    if alpha != mu:
                        if alpha < mu:
                            anti = (kam - kma).scale(Fraction(1, 2))
                            if not anti.is_zero():
                                boundary.setdefault((aux, comp, beta, (alpha, mu)), []).append(anti)
                                work.setdefault((aux, comp, beta, (alpha,)), []).append(-total_derivative(anti, mu))
                                work.setdefault((aux, comp, beta, (mu,)), []).append(total_derivative(anti, alpha))
                    if not sym.is_zero():
                        idx = beta.raised(mu)
                        # symmetric remainder stays with V_{beta+1_mu}
                        work.setdefault((aux, comp, idx, (alpha,), "keep"), []).append(sym)
    vol: dict[Key, list] = {}
    for k, v in work.items():
        key = k[:4]
        vol.setdefault(key, []).extend(v)
    volume = _clean({k: sum_exprs(v) for k, v in vol.items()})
    bnd = _clean({k: sum_exprs(v) for k, v in boundary.items()})
    return SplitResult(VarMorphism(1, M.target, n, volume), VarMorphism(2, M.target, n, bnd))


def reconstruction_residue(M: VarMorphism, result: SplitResult) -> dict[tuple, Expr]:
    """<M|V> - <volume|V> - Div<boundary|V>, per base tuple (should vanish)."""
    lhs = M.pair()
    vol = result.volume.pair()
    div = divergence(result.boundary).pair() if not result.boundary.is_zero() else {}
    out = {}
    for b in set(lhs) | set(vol) | set(div):
        r = lhs.get(b, ZERO) - vol.get(b, ZERO) - div.get(b, ZERO)
        if not r.is_zero():
            out[b] = r
    return out


# --------------------------------------------------------------------------
# P-Euler-Lagrange and P-Poincare-Cartan


@dataclass(frozen=True)
class Equation:
    name: str
    expr: Expr


_SPLIT_CACHE: dict = {}


def parametrized_first_variation(m: Model, L: Expr | None = None) -> VarMorphism:
    L = m.lagrangian if L is None else L
    k = _order(L, m)
    return contract(first_variation(L, m), prolong_morphism(m, k), m)


def _order(L: Expr, m: Model) -> int:
    names = {f.name for f in m.fields}
    return max((v.order for v in L.dependencies() if v.field in names), default=0)


def staged_split(m: Model, L: Expr | None = None) -> SplitResult:
    """Split in field variations first, then push the parametrization through.

    The field-level boundary dL/dy_mu dy is paired with the prolonged
    parametrization, and the Euler-Lagrange volume contracted with P is split
    again.  The volume part equals the one-pass split; the boundary keeps the
    derivative of the parameter attached to the slot it came from.
    """
    L = m.lagrangian if L is None else L
    k = _order(L, m)
    first = split(first_variation(L, m))
    inner = split(contract(first.volume, prolong_morphism(m, 0), m))
    outer = contract(first.boundary, prolong_morphism(m, max(k - 1, 0)), m)
    bnd = VarMorphism(1, "params", m.n, _merge(outer.table, inner.boundary.table))
    return SplitResult(inner.volume, bnd)


def parametrized_split(m: Model, L: Expr | None = None, strategy: str = "staged") -> SplitResult:
    """Split of the parametrized first variation.

    ``strategy`` is ``"staged"`` (default, see :func:`staged_split`) or a
    one-pass IBP order accepted by :func:`split`.
    """
    key = (m.fingerprint(), None if L is None else hash(L), strategy)
    hit = _SPLIT_CACHE.get(key)
    if hit is None:
        if strategy == "staged":
            hit = staged_split(m, L)
        else:
            hit = split(parametrized_first_variation(m, L), strategy)
        _SPLIT_CACHE[key] = hit
    return hit


def p_euler_lagrange(
    m: Model, reduced: bool = False, L: Expr | None = None, with_constraints: bool = True
) -> list[Equation]:
    """One equation per parameter component, then the constraint equations."""
    vol = parametrized_split(m, L).volume
    eqs = []
    for pf in m.parametrization.params:
        for comp in pf.components(m.n):
            e = vol.coefficient(pf.name, comp, MultiIndex.zero(m.n))
            eqs.append(Equation(f"{pf.name}{list(comp) if comp else ''}", e))
    if with_constraints:
        for i, c in enumerate(m.constraints):
            for j, phi in enumerate(c.exprs):
                eqs.append(Equation(f"constraint{i}.{j}", phi))
    if reduced:
        from .constraints import reduce_all

        eqs = [Equation(q.name, reduce_all(q.expr, m)) for q in eqs]
    return eqs


def p_poincare_cartan(m: Model, L: Expr | None = None) -> VarMorphism:
    return parametrized_split(m, L).boundary


def pair_with(M: VarMorphism, substitution: Mapping[tuple[str, tuple], Expr]) -> dict[tuple, Expr]:
    """<M | j V> with V replaced by given expressions (jets via d_nu)."""
    parts: dict[tuple, list] = {}
    cache: dict = {}
    for (aux, comp, idx, base), c in M.table.items():
        key = (aux, comp, idx)
        val = cache.get(key)
        if val is None:
            val = total_derivative_multi(substitution.get((aux, comp), ZERO), idx)
            cache[key] = val
        parts.setdefault(base, []).append(c * val)
    return {b: sum_exprs(v) for b, v in parts.items()}


def volume_orders(m: Model) -> dict[str, int]:
    """Observed maximal jet order of each field in the P-EL volume part."""
    vol = parametrized_split(m).volume
    out: dict[str, int] = {}
    for e in vol.table.values():
        for v in e.jet_variables():
            out[v.field] = max(out.get(v.field, 0), v.order)
    return out


__all__ = [
    "staged_split",
    "Equation",
    "ShapeMismatch",
    "SplitResult",
    "VarMorphism",
    "contract",
    "divergence",
    "first_variation",
    "p_euler_lagrange",
    "p_poincare_cartan",
    "prolong_morphism",
    "reduce_codegree",
    "split",
]

"""Hypothesis strategies for random expressions and morphisms."""

from __future__ import annotations

from fractions import Fraction

from hypothesis import strategies as st

from jetvar.derived import ginv, sqrtg
from jetvar.symexpr import Add, Coord, Expr, JetVariable, Mul, MultiIndex, Param, Pow, canonicalize, multi_indices

N = 2
FIELDS = ("u", "v")


def jet_vars(max_order: int = 2, n: int = N) -> list[JetVariable]:
    return [JetVariable(f, (), idx) for f in FIELDS for idx in multi_indices(n, max_order)]


def metric_jets(n: int = N) -> list[JetVariable]:
    return [JetVariable("g", (a, b), MultiIndex.zero(n)) for a in range(n) for b in range(a, n)]


LEAVES = (
    [Expr.atom(v) for v in jet_vars()]
    + [Expr.atom(Coord(mu)) for mu in range(N)]
    + [Expr.atom(Param("c"))]
    + [ginv("g", N, 0, 1), ginv("g", N, 1, 1), sqrtg("g", N)]
)

coefficients = st.fractions(min_value=-5, max_value=5, max_denominator=6)
leaves = st.sampled_from(LEAVES)


def trees(max_leaves: int = 12):
    """Unexpanded Add/Mul/Pow trees over jet, coordinate, parameter and derived atoms."""
    base = st.one_of(leaves, coefficients)
    return st.recursive(
        base,
        lambda kids: st.one_of(
            st.lists(kids, min_size=2, max_size=3).map(lambda xs: Add(tuple(xs))),
            st.lists(kids, min_size=2, max_size=3).map(lambda xs: Mul(tuple(xs))),
            st.tuples(kids, st.integers(0, 3)).map(lambda t: Pow(t[0], t[1])),
        ),
        max_leaves=max_leaves,
    )


exprs = trees().map(canonicalize)

jet_var = st.sampled_from(jet_vars() + metric_jets())
direction = st.integers(0, N - 1)


@st.composite
def morphisms(draw, aux: str = "V", max_order: int = 2):
    """Codegree-0 morphism tables over an auxiliary scalar V."""
    from jetvar.varcalc import VarMorphism

    idxs = draw(st.lists(st.sampled_from(multi_indices(N, max_order)), min_size=1, max_size=4, unique=True))
    table = {}
    for idx in idxs:
        c = draw(trees(6).map(canonicalize))
        if not c.is_zero():
            table[(aux, (), idx, ())] = c
    return VarMorphism(0, "fields", N, table)


def frac(x) -> Fraction:
    return Fraction(x)

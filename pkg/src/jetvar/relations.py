"""Zero testing modulo the algebraic relations among metric-derived atoms.

Canonical form treats ``g_ab``, ``ginv[a,b]``, ``sqrtg`` and ``norm(J)`` as
free symbols, so identities such as ``g_ab g^bc = delta_a^c`` are invisible
to it.  :func:`relation_normal_form` removes them:

1. every undifferentiated ``g_ab`` becomes ``s * adj(U)_ab * sqrtg^2`` with
   ``U`` the matrix of ``ginv`` atoms and ``s`` the sign of ``det g``;
2. terms are grouped by the parity of the ``sqrtg`` and ``norm`` exponents,
   and even powers are cleared with ``sqrtg^2 det U = s`` and
   ``norm(J)^2 det U = adj(U)(J, J)``.

The result is a polynomial in independent symbols times ``sqrtg^p norm^q``
with ``p, q`` in {0, 1}; it vanishes iff the input vanishes wherever the
metric is non-degenerate and ``J`` is timelike (dimension >= 2).  A nonzero
result is the input times a nonvanishing factor.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import TYPE_CHECKING

from .derived import SqrtAbsDet, VectorNorm, ginv, sqrtg, vector_var
from .symexpr import ONE, Expr, JetVariable, substitute, sum_exprs

if TYPE_CHECKING:
    from .modeldef import Model


def signature_sign(n: int) -> int:
    """Sign of det g for the sampler's signature (+, -, ..., -)."""
    return -1 if (n - 1) % 2 else 1


def _perm_sign(p: tuple[int, ...]) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _det(rows: list[int], cols: list[int], entry) -> Expr:
    parts = []
    for perm in itertools.permutations(range(len(cols))):
        t = Expr.const(_perm_sign(perm))
        for r, pc in zip(rows, perm):
            t = t * entry(r, cols[pc])
        parts.append(t)
    return sum_exprs(parts) if parts else ONE


@lru_cache(maxsize=None)
def det_inverse(metric: str, n: int) -> Expr:
    return _det(list(range(n)), list(range(n)), lambda a, b: ginv(metric, n, a, b))


@lru_cache(maxsize=None)
def adjugate(metric: str, n: int, a: int, b: int) -> Expr:
    rows = [r for r in range(n) if r != b]
    cols = [c for c in range(n) if c != a]
    return _det(rows, cols, lambda r, c: ginv(metric, n, r, c)).scale((-1) ** (a + b))


@lru_cache(maxsize=None)
def _norm_square(vfield: str, metric: str, n: int) -> Expr:
    return sum_exprs(
        adjugate(metric, n, a, b) * Expr.atom(vector_var(vfield, n, a)) * Expr.atom(vector_var(vfield, n, b))
        for a in range(n)
        for b in range(n)
    )


def _det_power(metric: str, n: int, k: int, cache: dict) -> Expr:
    hit = cache.get(k)
    if hit is None:
        hit = ONE if k == 0 else _det_power(metric, n, k - 1, cache) * det_inverse(metric, n)
        cache[k] = hit
    return hit


def relation_normal_form(e: Expr, metric: str | None, n: int, sign: int | None = None) -> Expr:
    if metric is None or e.is_zero():
        return e
    s = signature_sign(n) if sign is None else sign
    S = SqrtAbsDet(metric, n)
    lowered = {}
    for a in e.atoms():
        if isinstance(a, JetVariable) and a.field == metric and a.order == 0:
            i, j = a.comp
            lowered[a] = adjugate(metric, n, i, j).scale(s) * sqrtg(metric, n) * sqrtg(metric, n)
    if lowered:
        e = substitute(e, lowered)
    norms = sorted((a for a in e.atoms() if isinstance(a, VectorNorm) and a.metric == metric), key=lambda a: a.id)
    tracked = [S.id] + [a.id for a in norms]
    squares = [None] + [_norm_square(a.vfield, metric, n) for a in norms]
    # bucket by parity pattern, then by half-exponents
    buckets: dict[tuple, dict[tuple, dict]] = {}
    for mono, c in e.terms.items():
        halves = [0] * len(tracked)
        parity = [0] * len(tracked)
        rest = []
        for aid, k in mono:
            if aid in tracked:
                pos = tracked.index(aid)
                halves[pos], parity[pos] = divmod(k, 2)
            else:
                rest.append((aid, k))
        buckets.setdefault(tuple(parity), {}).setdefault(tuple(halves), {})[tuple(rest)] = c
    det_cache: dict = {}
    sq_cache: dict = {}
    out = []
    for parity, by_half in buckets.items():
        lo = [min(h[i] for h in by_half) for i in range(len(tracked))]
        hi = [max(h[i] for h in by_half) for i in range(len(tracked))]
        odd = ONE
        for pos, p in enumerate(parity):
            if p:
                odd = odd * Expr.atom(S if pos == 0 else norms[pos - 1])
        for halves, terms in by_half.items():
            factor = Expr.const(s ** (halves[0] - lo[0]))
            det_k = hi[0] - halves[0]
            for pos in range(1, len(tracked)):
                k = halves[pos] - lo[pos]
                key = (pos, k)
                q = sq_cache.get(key)
                if q is None:
                    q = squares[pos] ** k if k else ONE
                    sq_cache[key] = q
                factor = factor * q
                det_k += hi[pos] - halves[pos]
            factor = factor * _det_power(metric, n, det_k, det_cache)
            out.append(Expr._raw(dict(terms)) * factor * odd)
    return sum_exprs(out)


def model_normal_form(e: Expr, m: Model) -> Expr:
    """Reduce modulo the constraints, then modulo the metric relations."""
    from .constraints import reduce_all

    return relation_normal_form(reduce_all(e, m), m.metric, m.n)


def is_zero(e: Expr, m: Model) -> bool:
    return model_normal_form(e, m).is_zero()


__all__ = ["det_inverse", "adjugate", "is_zero", "model_normal_form", "relation_normal_form", "signature_sign"]

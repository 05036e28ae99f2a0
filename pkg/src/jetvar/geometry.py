"""Component formulas for Levi-Civita geometry of a declared metric field.

Everything is expanded into jet variables of the metric and inverse-metric
atoms; covariant derivatives become partials plus Christoffel terms.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

from .derived import ginv, metric_var, sqrtg
from .symexpr import ZERO, Expr, MultiIndex, sum_exprs, total_derivative


def dmetric(metric: str, n: int, a: int, b: int, *dirs: int) -> Expr:
    return Expr.atom(metric_var(metric, n, a, b, MultiIndex.from_directions(dirs, n)))


@lru_cache(maxsize=None)
def christoffel_lower(metric: str, n: int, c: int, a: int, b: int) -> Expr:
    """Gamma_{c a b} = 1/2 (g_{ca,b} + g_{cb,a} - g_{ab,c})."""
    e = dmetric(metric, n, c, a, b) + dmetric(metric, n, c, b, a) - dmetric(metric, n, a, b, c)
    return e / 2


@lru_cache(maxsize=None)
def christoffel(metric: str, n: int, l: int, a: int, b: int) -> Expr:
    """Gamma^l_{ab} with the inverse metric kept as atoms."""
    if a > b:
        return christoffel(metric, n, l, b, a)
    return sum_exprs(ginv(metric, n, l, c) * christoffel_lower(metric, n, c, a, b) for c in range(n))


@lru_cache(maxsize=None)
def ricci(metric: str, n: int, a: int, b: int) -> Expr:
    """R_{ab} = d_c G^c_{ab} - d_b G^c_{ac} + G^c_{cd} G^d_{ab} - G^c_{bd} G^d_{ac}."""
    if a > b:
        return ricci(metric, n, b, a)
    G = lambda l, i, j: christoffel(metric, n, l, i, j)  # noqa: E731
    parts = []
    for c in range(n):
        parts.append(total_derivative(G(c, a, b), c))
        parts.append(-total_derivative(G(c, a, c), b))
        for d in range(n):
            parts.append(G(c, c, d) * G(d, a, b))
            parts.append(-(G(c, b, d) * G(d, a, c)))
    return sum_exprs(parts)


@lru_cache(maxsize=None)
def ricci_scalar(metric: str, n: int) -> Expr:
    return sum_exprs(ginv(metric, n, a, b) * ricci(metric, n, a, b) for a in range(n) for b in range(n))


@lru_cache(maxsize=None)
def ricci_mixed(metric: str, n: int, a: int, b: int) -> Expr:
    """R^a_b = g^{ac} R_{cb}."""
    return sum_exprs(ginv(metric, n, a, c) * ricci(metric, n, c, b) for c in range(n))


@lru_cache(maxsize=None)
def ricci_upper(metric: str, n: int, a: int, b: int) -> Expr:
    if a > b:
        return ricci_upper(metric, n, b, a)
    return sum_exprs(ginv(metric, n, b, d) * ricci_mixed(metric, n, a, d) for d in range(n))


@lru_cache(maxsize=None)
def einstein_upper(metric: str, n: int, a: int, b: int) -> Expr:
    """G^{ab} = R^{ab} - 1/2 g^{ab} R."""
    return ricci_upper(metric, n, a, b) - ginv(metric, n, a, b) * ricci_scalar(metric, n) / 2


def hilbert_density(metric: str, n: int) -> Expr:
    return sqrtg(metric, n) * ricci_scalar(metric, n)


def covariant_derivative(
    component: Callable[[tuple[int, ...]], Expr],
    variances: Sequence[str],
    idx: tuple[int, ...],
    m: int,
    metric: str,
    n: int,
    weight: int = 0,
) -> Expr:
    """nabla_m of a tensor (density) component.

    ``variances`` lists 'u' (contravariant) or 'd' (covariant) per slot and
    ``weight`` is the density weight (1 for a vector density).
    """
    parts = [total_derivative(component(idx), m)]
    for slot, var in enumerate(variances):
        for lam in range(n):
            moved = idx[:slot] + (lam,) + idx[slot + 1:]
            if var == "u":
                parts.append(christoffel(metric, n, idx[slot], m, lam) * component(moved))
            else:
                parts.append(-(christoffel(metric, n, lam, m, idx[slot]) * component(moved)))
    if weight:
        trace = sum_exprs(christoffel(metric, n, lam, lam, m) for lam in range(n))
        parts.append(-(trace * component(idx)).scale(weight))
    return sum_exprs(parts)


def field_strength(potential: str, n: int, a: int, b: int) -> Expr:
    """F_{ab} = d_a A_b - d_b A_a."""
    if a == b:
        return ZERO
    from .symexpr import JetVariable

    def dA(c: int, d: int) -> Expr:
        return Expr.atom(JetVariable(potential, (c,), MultiIndex.unit(d, n)))

    return dA(b, a) - dA(a, b)

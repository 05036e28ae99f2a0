"""Constraints on jets, reduction modulo the prolonged constraint, adaptedness.

Membership in the constraint ideal is decided by substituting leading
coordinates: every constraint expression is solved for one jet variable
(its *lead*), and every formal derivative of a lead is solved from the
matching prolongation.  This is complete for quasilinear constraints such
as a divergence condition, which is the case the built-in models need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .derived import SqrtAbsDet, VectorNorm
from .report import CheckReport
from .symexpr import (
    Expr,
    JetVariable,
    MaxJetOrderExceeded,
    MultiIndex,
    Param,
    max_jet_order,
    multi_indices,
    partial,
    substitute,
    sum_exprs,
    total_derivative_multi,
)

if TYPE_CHECKING:
    from .modeldef import Model, Parametrization


class UnsolvableLeading(ValueError):
    """A constraint cannot be solved for its declared leading coordinate."""


# atoms assumed never to vanish on the sampled domain
_NONVANISHING = (SqrtAbsDet, VectorNorm, Param)


def default_lead(phi: Expr) -> JetVariable:
    """Highest-order jet variable, ties broken by the largest count tuple."""
    vs = phi.jet_variables()
    if not vs:
        raise UnsolvableLeading("constraint has no jet variables")
    return max(vs, key=lambda v: (v.order, tuple(v.index), tuple(-c for c in v.comp), v.field))


def _inverse_coefficient(c: Expr) -> Expr:
    if c.is_zero():
        raise UnsolvableLeading("leading coordinate does not occur")
    if c.is_constant():
        return Expr.const(1) / c
    if c.is_monomial():
        (atoms, _), = c.items()
        if all(isinstance(a, _NONVANISHING) for a, _ in atoms):
            return c ** -1
    raise UnsolvableLeading(f"coefficient {c} of the leading coordinate is not invertible")


@dataclass(frozen=True)
class Constraint:
    exprs: tuple[Expr, ...]
    leads: tuple[JetVariable, ...]
    faithful: bool = False

    @classmethod
    def build(cls, exprs: Iterable[Expr], leads: Iterable[JetVariable | None] | None = None,
              faithful: bool = False) -> Constraint:
        exprs = tuple(exprs)
        leads = list(leads) if leads is not None else [None] * len(exprs)
        fixed = []
        for phi, lead in zip(exprs, leads):
            lead = lead if lead is not None else default_lead(phi)
            c = partial(phi, lead)
            if lead in c.dependencies():
                raise UnsolvableLeading(f"constraint is nonlinear in its lead {lead.dsl()}")
            _inverse_coefficient(c)
            fixed.append(lead)
        return cls(exprs, tuple(fixed), faithful)

    @property
    def order(self) -> int:
        return max((v.order for e in self.exprs for v in e.jet_variables()), default=0)

    @property
    def codimension(self) -> int:
        return len(self.exprs)


def prolong_constraint(c: Constraint, q: int) -> list[Expr]:
    """All d_alpha Phi_i with |alpha| <= q."""
    if c.order + q > max_jet_order():
        raise MaxJetOrderExceeded(f"prolongation to order {c.order + q} above ceiling")
    out = []
    for phi in c.exprs:
        n = len(next(iter(phi.jet_variables())).index) if phi.jet_variables() else 0
        for alpha in multi_indices(n, q):
            out.append(total_derivative_multi(phi, alpha))
    return out


_SOLVED: dict[tuple, Expr] = {}


def _leading_shift(v: JetVariable, lead: JetVariable) -> MultiIndex | None:
    if v.field != lead.field or v.comp != lead.comp:
        return None
    return v.index - lead.index


def _solve(phi: Expr, lead: JetVariable, beta: MultiIndex) -> Expr:
    key = (phi, lead.id, beta)
    hit = _SOLVED.get(key)
    if hit is not None:
        return hit
    target = lead.with_index(lead.index + beta)
    dphi = total_derivative_multi(phi, beta)
    c = partial(dphi, target)
    inv = _inverse_coefficient(c)
    rest = dphi - c * Expr.atom(target)
    sol = -(rest * inv)
    _SOLVED[key] = sol
    return sol


def reduce_mod_constraint(e: Expr, c: Constraint, q: int | None = None) -> Expr:
    """Substitute all leads (and their derivatives up to shift order q)."""
    for _ in range(64):
        mapping = {}
        for v in e.jet_variables():
            for phi, lead in zip(c.exprs, c.leads):
                beta = _leading_shift(v, lead)
                if beta is None or (q is not None and beta.order > q):
                    continue
                mapping[v] = _solve(phi, lead, beta)
                break
        if not mapping:
            return e
        e = substitute(e, mapping)
    raise UnsolvableLeading("constraint reduction did not terminate")


def reduce_all(e: Expr, m: Model) -> Expr:
    for c in m.constraints:
        e = reduce_mod_constraint(e, c)
    return e


def variation_of(phi: Expr, P: Parametrization) -> Expr:
    """sum_alpha dPhi/dy^a_alpha d_alpha(delta y^a) for the parametrized delta."""
    parts = []
    for v in phi.dependencies():
        delta = P.deltas.get((v.field, v.comp))
        if delta is None:
            continue
        parts.append(partial(phi, v) * total_derivative_multi(delta, v.index))
    return sum_exprs(parts)


def check_adapted(P: Parametrization, c: Constraint | None, m: Model) -> CheckReport:
    rep = CheckReport("adapted")
    if c is None:
        return rep
    for i, phi in enumerate(c.exprs):
        rep.residues[f"constraint{i}"] = reduce_mod_constraint(variation_of(phi, P), c)
    rep.notes["faithful_declared"] = c.faithful
    return rep


__all__ = [
    "Constraint",
    "UnsolvableLeading",
    "check_adapted",
    "default_lead",
    "prolong_constraint",
    "reduce_all",
    "reduce_mod_constraint",
]

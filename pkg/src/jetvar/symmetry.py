"""Generator lifts, Lie derivatives, covariance, Noether currents, superpotentials.

A generator is a base vector field ``xi`` plus an abelian gauge function
``zeta``, both treated as auxiliary jet fields.  The Lie derivative of a
field component is ``xi^mu y_mu - Xi_hat`` where ``Xi_hat`` comes from the
field kind (or a per-component override in the model).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from gmpy2 import mpq
from typing import Mapping

from .constraints import _NONVANISHING, prolong_constraint
from .modeldef import GeneratorLift, Model
from .relations import model_normal_form
from .report import CheckReport
from .symexpr import (
    ZERO,
    Expr,
    JetVariable,
    MaxJetOrderExceeded,
    MultiIndex,
    atom_by_id,
    max_jet_order,
    partial,
    sum_exprs,
    total_derivative,
    total_derivative_multi,
)
from .varcalc import (
    VarMorphism,
    divergence_of_components,
    from_pairing,
    pair_with,
    p_poincare_cartan,
    parametrized_split,
    reduce_codegree,
    split,
)


class NotCovariant(ValueError):
    """The covariance residue does not vanish (modulo constraints)."""


class NoConnectionField(ValueError):
    """Splitting a generator needs a gauge-potential field as connection."""


class OnShellDecompositionFailed(ValueError):
    """The on-shell part is not a combination of the field equations."""

    def __init__(self, msg: str, remainder: Expr | None = None):
        super().__init__(msg)
        self.remainder = remainder


# --------------------------------------------------------------------------
# Lie derivatives


def _jet(name: str, comp: tuple, n: int) -> Expr:
    return Expr.atom(JetVariable(name, comp, MultiIndex.zero(n)))


def lift_template(kind: str, name: str, comp: tuple, g: GeneratorLift, n: int) -> Expr:
    """Vertical lift coefficient Xi_hat for a field component of a given kind."""
    dxi = lambda mu, s: total_derivative(g.xi(mu, n), s)  # noqa: E731
    if kind == "scalar":
        return ZERO
    if kind in ("covector", "gauge-potential"):
        (s,) = comp
        out = -sum_exprs(_jet(name, (mu,), n) * dxi(mu, s) for mu in range(n))
        if kind == "gauge-potential":
            out = out - total_derivative(g.zeta(n), s)
        return out
    if kind in ("vector", "vector-density"):
        (mu,) = comp
        out = sum_exprs(_jet(name, (nu,), n) * dxi(mu, nu) for nu in range(n))
        if kind == "vector-density":
            out = out - _jet(name, (mu,), n) * sum_exprs(dxi(nu, nu) for nu in range(n))
        return out
    if kind == "symmetric-2-cotensor":
        a, b = comp
        sym = lambda i, j: _jet(name, tuple(sorted((i, j))), n)  # noqa: E731
        return -sum_exprs(sym(mu, b) * dxi(mu, a) + sym(a, mu) * dxi(mu, b) for mu in range(n))
    raise ValueError(f"no lift template for kind {kind}")


def vertical_lift(m: Model, g: GeneratorLift) -> dict[tuple[str, tuple], Expr]:
    out = {}
    for f in m.fields:
        for c in f.components(m.n):
            key = (f.name, c)
            out[key] = g.lifts[key] if key in g.lifts else lift_template(f.kind, f.name, c, g, m.n)
    return out


def lie_derivative_section(m: Model, g: GeneratorLift) -> dict[tuple[str, tuple], Expr]:
    """L_Xi y^a = xi^mu y^a_mu - Xi_hat^a for every field component."""
    n = m.n
    out = {}
    for (name, c), hat in vertical_lift(m, g).items():
        transport = sum_exprs(
            g.xi(mu, n) * Expr.atom(JetVariable(name, c, MultiIndex.unit(mu, n))) for mu in range(n)
        )
        out[(name, c)] = transport - hat
    return out


def lie_derivative_jet(m: Model, g: GeneratorLift, name: str, comp: tuple, index: MultiIndex) -> Expr:
    """d_nu (L_Xi y^a): the holonomic prolongation of the Lie derivative."""
    index = MultiIndex(index)
    if index.order + 1 > max_jet_order():
        raise MaxJetOrderExceeded(f"Lie derivative of order {index.order} needs jets above the ceiling")
    return total_derivative_multi(lie_derivative_section(m, g)[(name, tuple(comp))], index)


def generator_aux(g: GeneratorLift) -> set[str]:
    return g.aux_fields()


# --------------------------------------------------------------------------
# covariance


@dataclass
class CovarianceReport(CheckReport):
    alpha: VarMorphism | None = None
    raw_volume: VarMorphism | None = None


def lie_dragged_lagrangian(m: Model, g: GeneratorLift, L: Expr | None = None) -> Expr:
    """<dL | j^k L_Xi y> - d_mu(xi^mu L), linear in the jets of (xi, zeta)."""
    L = m.lagrangian if L is None else L
    lie = lie_derivative_section(m, g)
    names = m.field_names()
    parts = []
    cache: dict = {}
    for v in L.dependencies():
        if v.field not in names:
            continue
        key = (v.field, v.comp)
        d = cache.get((key, v.index))
        if d is None:
            d = total_derivative_multi(lie[key], v.index)
            cache[(key, v.index)] = d
        parts.append(partial(L, v) * d)
    for mu in range(m.n):
        parts.append(-total_derivative(g.xi(mu, m.n) * L, mu))
    return sum_exprs(parts)


def check_covariance(m: Model, g: GeneratorLift | str, L: Expr | None = None) -> CovarianceReport:
    """Split the Lie-dragged Lagrangian with (xi, zeta) as auxiliary fields.

    The volume part, reduced modulo the constraints, is the residue; the
    boundary part is alpha.
    """
    g = m.generator(g) if isinstance(g, str) else g
    X = lie_dragged_lagrangian(m, g, L)
    morph, rest = from_pairing({(): X}, g.aux_fields(), 0, "generator", m.n)
    rep = CovarianceReport("covariance")
    if rest.get((), ZERO) != ZERO:
        rep.residues["generator-free"] = rest[()]
    sp = split(morph)
    rep.alpha = sp.boundary
    rep.raw_volume = sp.volume
    comps = set()
    for (aux, comp, _, _) in morph.table:
        comps.add((aux, comp))
    for aux, comp in sorted(comps):
        c = sp.volume.coefficient(aux, comp, MultiIndex.zero(m.n))
        rep.residues[f"{aux}{list(comp) if comp else ''}"] = model_normal_form(c, m)
    rep.notes["generator"] = g.name
    return rep


# --------------------------------------------------------------------------
# currents


@dataclass(frozen=True)
class Current:
    """Codegree-1 density components E^alpha."""

    components: tuple[Expr, ...]

    @classmethod
    def zero(cls, n: int) -> Current:
        return cls(tuple(ZERO for _ in range(n)))

    @classmethod
    def from_dict(cls, comps: Mapping[tuple, Expr], n: int) -> Current:
        return cls(tuple(comps.get((a,), ZERO) for a in range(n)))

    @property
    def n(self) -> int:
        return len(self.components)

    def __getitem__(self, a: int) -> Expr:
        return self.components[a]

    def __add__(self, other: Current) -> Current:
        return Current(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: Current) -> Current:
        return Current(tuple(a - b for a, b in zip(self.components, other.components)))

    def scale(self, c) -> Current:
        return Current(tuple(a * c for a in self.components))

    def map(self, fn) -> Current:
        return Current(tuple(fn(a) for a in self.components))

    def is_zero(self) -> bool:
        return all(a.is_zero() for a in self.components)

    def divergence(self) -> Expr:
        return sum_exprs(total_derivative(a, mu) for mu, a in enumerate(self.components))

    def as_dict(self) -> dict[tuple, Expr]:
        return {(a,): e for a, e in enumerate(self.components)}


def generator_values(m: Model, g: GeneratorLift) -> dict[tuple[str, tuple], Expr]:
    """Aux-section values of a (possibly split) generator in terms of (Y, y)."""
    vals = {(g.base, (mu,)): g.xi(mu, m.n) for mu in range(m.n)}
    if g.gauge:
        vals[(g.gauge, ())] = g.zeta(m.n)
    return vals


def jmap_values(m: Model, g: GeneratorLift) -> dict[tuple[str, tuple], Expr]:
    """Parameter section J(Xi) for g, including split generators."""
    from .symexpr import substitute_jets

    if g.name not in m.jmaps:
        raise KeyError(f"no jmap declared for generator {g.name}")
    vals = generator_values(m, g)
    return {k: substitute_jets(e, vals) for k, e in m.jmaps[g.name].items()}


def noether_current(m: Model, g: GeneratorLift | str, L: Expr | None = None, check: bool = True) -> Current:
    """E = <F | j J(Xi)> - xi L - <alpha | j Xi>."""
    g = m.generator(g) if isinstance(g, str) else g
    Lx = m.lagrangian if L is None else L
    cov = check_covariance(m, g, L)
    if check and not cov.passed:
        bad = ", ".join(sorted(cov.failures()))
        raise NotCovariant(f"covariance residue does not vanish for {bad}")
    F = pair_with(p_poincare_cartan(m, L), jmap_values(m, g))
    alpha = cov.alpha.pair()
    comps = []
    for a in range(m.n):
        comps.append(F.get((a,), ZERO) - g.xi(a, m.n) * Lx - alpha.get((a,), ZERO))
    return Current(tuple(comps))


def offshell_residue(m: Model, g: GeneratorLift, E: Current, L: Expr | None = None) -> tuple[Expr, Expr]:
    """(Div E, <E_vol | J(Xi)>) before any constraint reduction."""
    vol = pair_with(parametrized_split(m, L).volume, jmap_values(m, g)).get((), ZERO)
    return E.divergence(), vol


def check_offshell_identity(m: Model, g: GeneratorLift | str, E: Current, L: Expr | None = None,
                            seed: int = 0, samples: int = 20, tol: float = 1e-9) -> CheckReport:
    """Div E + <E_vol | J(Xi)> = 0, symbolically modulo constraints and numerically."""
    from .numeric import sample_points
    from .symexpr import eval_terms

    g = m.generator(g) if isinstance(g, str) else g
    div, vol = offshell_residue(m, g, E, L)
    rep = CheckReport("offshell")
    rep.residues["identity"] = model_normal_form(div + vol, m)
    worst = 0.0
    for p in sample_points(m, seed, samples, vector_fields=g.aux_fields()):
        a, sa = eval_terms(div, p)
        b, sb = eval_terms(vol, p)
        worst = max(worst, abs(a + b) / max(abs(a), abs(b), 1e-3 * (sa + sb), 1e-300))
    rep.notes["numeric"] = {"samples": samples, "seed": seed, "max_relative_error": worst, "tolerance": tol}
    if worst >= tol:
        rep.residues["numeric"] = div + vol
    return rep


# --------------------------------------------------------------------------
# generator splitting


def split_generator(g: GeneratorLift, m: Model) -> tuple[GeneratorLift, GeneratorLift]:
    """Horizontal xi^mu(d_mu - A_mu d_theta) and vertical (zeta + A_rho xi^rho) d_theta."""
    A = m.gauge_potential()
    if A is None:
        raise NoConnectionField("model declares no gauge-potential field")
    n = m.n
    xi = {mu: g.xi(mu, n) for mu in range(n)}
    contraction = sum_exprs(_jet(A, (r,), n) * xi[r] for r in range(n))
    hor = replace(g, base_exprs=xi, gauge_expr=-contraction, lifts={})
    ver = replace(g, base_exprs={}, gauge_expr=g.zeta(n) + contraction, lifts={})
    return hor, ver


def combine_generators(a: GeneratorLift, b: GeneratorLift, n: int) -> GeneratorLift:
    """Sum of two generators acting on the same auxiliary fields."""
    xi = {mu: a.xi(mu, n) + b.xi(mu, n) for mu in range(n)}
    return replace(a, base_exprs=xi, gauge_expr=a.zeta(n) + b.zeta(n), lifts={})


def same_generator(a: GeneratorLift, b: GeneratorLift, n: int) -> bool:
    return all(a.xi(mu, n) == b.xi(mu, n) for mu in range(n)) and a.zeta(n) == b.zeta(n)


# --------------------------------------------------------------------------
# on-shell decomposition and superpotential


def _lex_cmp(a: tuple, b: tuple) -> int:
    da, db = dict(a), dict(b)
    for i in sorted(set(da) | set(db)):
        x, y = da.get(i, 0), db.get(i, 0)
        if x != y:
            return 1 if x > y else -1
    return 0


_lex_key = functools.cmp_to_key(_lex_cmp)


def _leading(e: Expr) -> tuple:
    return max(e.terms, key=_lex_key)


def _quotient(t: tuple, s: tuple) -> tuple | None:
    q = dict(t)
    for i, k in s:
        q[i] = q.get(i, 0) - k
    out = []
    for i in sorted(q):
        k = q[i]
        if k == 0:
            continue
        if k < 0 and not isinstance(atom_by_id(i), _NONVANISHING):
            return None
        out.append((i, k))
    return tuple(out)


def decompose(e: Expr, equations: Mapping[str, Expr], max_steps: int = 20000) -> tuple[dict[str, Expr], Expr]:
    """Multipliers with e = sum_i lambda_i EQ_i + remainder.

    Tries exact division by each single equation first, then multivariate
    division under the lexicographic order on exponent vectors.
    """
    eqs = {k: v for k, v in equations.items() if not v.is_zero()}
    if e.is_zero():
        return {}, ZERO
    for name, q in eqs.items():
        lam, rem = _divide(e, {name: q}, max_steps)
        if rem.is_zero():
            return lam, rem
    return _divide(e, eqs, max_steps)


def _divide(e: Expr, eqs: Mapping[str, Expr], max_steps: int) -> tuple[dict[str, Expr], Expr]:
    leads = {k: (_leading(v), v.terms[_leading(v)]) for k, v in eqs.items()}
    lam: dict[str, list] = {}
    rem = e
    stuck: dict = {}
    for _ in range(max_steps):
        if rem.is_zero():
            break
        lt = _leading(rem)
        c = rem.terms[lt]
        done = False
        for name, (lm, lc) in leads.items():
            q = _quotient(lt, lm)
            if q is None:
                continue
            term = Expr.const(mpq(c) / mpq(lc)) * Expr._raw({q: 1})
            lam.setdefault(name, []).append(term)
            rem = rem - term * eqs[name]
            done = True
            break
        if not done:
            stuck[lt] = c
            rem = rem - Expr._raw({lt: c})
    rem = rem + Expr._raw(stuck)
    return {k: sum_exprs(v) for k, v in lam.items()}, rem


@dataclass(frozen=True)
class Superpotential:
    """Antisymmetric components U^{alpha mu}, stored for alpha < mu."""

    n: int
    stored: Mapping[tuple[int, int], Expr] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> Expr:
        a, b = key
        if a == b:
            return ZERO
        if a < b:
            return self.stored.get((a, b), ZERO)
        return -self.stored.get((b, a), ZERO)

    def divergence(self) -> Current:
        """(Div U)^alpha = sum_mu d_mu U^{alpha mu}."""
        return Current.from_dict(divergence_of_components(dict(self.stored), self.n), self.n)

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self.stored.values())

    def atoms(self) -> set:
        return set().union(*(v.atoms() for v in self.stored.values())) if self.stored else set()


@dataclass(frozen=True)
class SuperpotentialResult:
    onshell: Current
    multipliers: Mapping[int, Mapping[str, Expr]]
    U: Superpotential


def field_equations(m: Model, L: Expr | None = None) -> dict[str, Expr]:
    """P-EL volume expressions plus prolonged constraints, keyed by name."""
    from .varcalc import p_euler_lagrange

    out = {q.name: q.expr for q in p_euler_lagrange(m, L=L, with_constraints=False)}
    for i, c in enumerate(m.constraints):
        q = max(0, min(1, max_jet_order() - c.order))
        for j, phi in enumerate(prolong_constraint(c, q)):
            out[f"constraint{i}.d{j}"] = phi
    return out


def superpotential(m: Model, E: Current, g: GeneratorLift | str, L: Expr | None = None) -> SuperpotentialResult:
    """E = onshell + Div U with the on-shell part decomposed over the field equations."""
    g = m.generator(g) if isinstance(g, str) else g
    aux = g.aux_fields()
    morph, rest = from_pairing(E.as_dict(), aux, 1, "generator", m.n)
    if any(not r.is_zero() for r in rest.values()):
        raise OnShellDecompositionFailed("current is not linear in the generator", next(iter(rest.values())))
    sp = reduce_codegree(morph)
    U = Superpotential(m.n, {k: v for k, v in sp.boundary.pair().items()})
    vol = sp.volume.pair()
    onshell = Current.from_dict(vol, m.n)
    eqs = field_equations(m, L)
    multipliers: dict[int, dict[str, Expr]] = {}
    for a in range(m.n):
        coeffs: dict[str, list] = {}
        for (aux_name, comp, idx, base), c in sp.volume.table.items():
            if base != (a,):
                continue
            lam, rem = decompose(c, eqs)
            if not rem.is_zero():
                raise OnShellDecompositionFailed(
                    f"on-shell part of component {a} is not in the span of the field equations", rem)
            v = Expr.atom(JetVariable(aux_name, comp, idx))
            for k, x in lam.items():
                coeffs.setdefault(k, []).append(x * v)
        multipliers[a] = {k: sum_exprs(v) for k, v in sorted(coeffs.items())}
    return SuperpotentialResult(onshell, multipliers, U)


__all__ = [
    "CovarianceReport",
    "Current",
    "NoConnectionField",
    "NotCovariant",
    "OnShellDecompositionFailed",
    "Superpotential",
    "SuperpotentialResult",
    "check_covariance",
    "check_offshell_identity",
    "combine_generators",
    "decompose",
    "lie_derivative_jet",
    "lie_derivative_section",
    "noether_current",
    "split_generator",
    "superpotential",
]

"""Random first-order two-field models with symbolic coefficients."""

from __future__ import annotations

import random
from dataclasses import dataclass

from jetvar.modeldef import Model, parse_expression, parse_model
from jetvar.symexpr import Expr, JetVariable, MultiIndex, partial, sum_exprs, total_derivative

FIELDS = ("u", "v")


@dataclass(frozen=True)
class GenericModel:
    model: Model
    lagrangian: str
    p0: dict[str, str]
    p1: dict[tuple[str, int], str]


def _atoms(n: int) -> list[str]:
    out = list(FIELDS)
    out += [f"{f}[; {m}]" for f in FIELDS for m in range(n)]
    out += [f"x[{m}]" for m in range(n)]
    return out


def _poly(rng: random.Random, n: int, coeffs: list[str], terms: int, degree: int) -> str:
    atoms = _atoms(n)
    parts = []
    for _ in range(terms):
        c = f"c{len(coeffs)}"
        coeffs.append(c)
        factors = [rng.choice(atoms) for _ in range(rng.randint(0, degree))]
        parts.append(" * ".join([c] + factors))
    return " + ".join(parts)


def random_generic(seed: int, n: int = 2) -> GenericModel:
    rng = random.Random(seed)
    coeffs: list[str] = []
    L = _poly(rng, n, coeffs, 4, 3)
    p0 = {f: _poly(rng, n, coeffs, 2, 2) for f in FIELDS}
    p1 = {(f, m): _poly(rng, n, coeffs, 1, 1) for f in FIELDS for m in range(n)}
    deltas = "\n".join(
        f"  delta {f} = ({p0[f]}) * E + " + " + ".join(f"({p1[f, m]}) * E[; {m}]" for m in range(n)) + ";"
        for f in FIELDS
    )
    text = (
        f"model generic\ndim {n}\nparam {', '.join(coeffs)}\n"
        + "".join(f"field {f} : scalar\n" for f in FIELDS)
        + f"lagrangian {{\n  L: {L};\n}}\n"
        + f"parametrization {{\n  eps E : scalar;\n{deltas}\n}}\n"
    )
    return GenericModel(parse_model(text), L, p0, p1)


def eps(n: int, *dirs: int) -> Expr:
    return Expr.atom(JetVariable("E", (), MultiIndex.from_directions(dirs, n)))


def displayed_E_F(g: GenericModel) -> tuple[Expr, dict[int, Expr]]:
    """The k = l = s = 1 closed forms: E coefficient of eps and F^mu components."""
    m = g.model
    n = m.n
    L = parse_expression(g.lagrangian, m)
    E, F = [], {mu: [] for mu in range(n)}
    for f in FIELDS:
        y = JetVariable(f, (), MultiIndex.zero(n))
        dy = [JetVariable(f, (), MultiIndex.from_directions((nu,), n)) for nu in range(n)]
        el = partial(L, y) - sum_exprs(total_derivative(partial(L, dy[nu]), nu) for nu in range(n))
        p = parse_expression(g.p0[f], m)
        pm = [parse_expression(g.p1[f, mu], m) for mu in range(n)]
        E.append(el * p)
        for mu in range(n):
            E.append(-total_derivative(el * pm[mu], mu))
            F[mu].append(el * pm[mu] * eps(n))
            F[mu].append(partial(L, dy[mu]) * (p * eps(n) + sum_exprs(pm[nu] * eps(n, nu) for nu in range(n))))
    return sum_exprs(E), {mu: sum_exprs(v) for mu, v in F.items()}

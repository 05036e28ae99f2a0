"""Closed-form field equations and currents, written without the variational engine.

These are hand-derived formulas for the built-in models, assembled from the
geometry helpers and derived atoms only.  Index placement follows the
stored-metric convention: the metric equation for a stored off-diagonal
component carries a factor 2.
"""

from __future__ import annotations

from fractions import Fraction

from jetvar import geometry
from jetvar.derived import energy, ginv, norm, rho, sqrtg
from jetvar.symexpr import ONE, ZERO, Expr, JetVariable, MultiIndex, Param, sum_exprs, total_derivative


def jv(name, comp, n, dirs=()):
    return Expr.atom(JetVariable(name, tuple(comp), MultiIndex.from_directions(dirs, n)))


def gl(n, a, b):
    """Undifferentiated lower metric component."""
    return jv("g", sorted((a, b)), n)


def F(n, a, b):
    return geometry.field_strength("A", n, a, b)


def F_upper(n, a, b):
    return sum_exprs(ginv("g", n, a, i) * ginv("g", n, b, j) * F(n, i, j) for i in range(n) for j in range(n))


def fluid(n):
    r = rho("J", "g", n)
    e0, e1 = energy("J", "g", n, 0), energy("J", "g", n, 1)
    mu = r * (ONE + e0)
    P = r * r * e1
    return r, mu, P


def u_upper(n, a):
    return jv("J", (a,), n) * norm("J", "g", n) ** -1


def u_lower(n, a):
    return sum_exprs(gl(n, a, b) * jv("J", (b,), n) for b in range(n)) * norm("J", "g", n) ** -1


def H_EM_upper(n, a, b):
    F2 = sum_exprs(F(n, i, j) * F_upper(n, i, j) for i in range(n) for j in range(n))
    t = sum_exprs(
        ginv("g", n, a, i) * ginv("g", n, b, j) * ginv("g", n, c, d) * F(n, i, c) * F(n, j, d)
        for i in range(n) for j in range(n) for c in range(n) for d in range(n)
    )
    return t - ginv("g", n, a, b) * F2 * Fraction(1, 4)


def H_F_upper(n, a, b):
    _, mu, P = fluid(n)
    return P * ginv("g", n, a, b) - (mu + P) * u_upper(n, a) * u_upper(n, b)


def metric_equation(n, a, b, terms=("H", "EM", "F")):
    """-(sqrtg/2kappa)[G - kappa(H_EM + H_F)] for stored component (a, b)."""
    kappa = Expr.atom(Param("kappa"))
    s = sqrtg("g", n)
    out = ZERO
    if "H" in terms:
        out = out - s * geometry.einstein_upper("g", n, a, b) * kappa ** -1 * Fraction(1, 2)
    if "EM" in terms:
        out = out + s * H_EM_upper(n, a, b) * Fraction(1, 2)
    if "F" in terms:
        out = out + s * H_F_upper(n, a, b) * Fraction(1, 2)
    return out * (2 if a != b else 1)


def maxwell_equation(n, nu, with_source=True):
    """d_mu(sqrtg F^{mu nu}) + q J^nu."""
    out = sum_exprs(total_derivative(sqrtg("g", n) * F_upper(n, m, nu), m) for m in range(n))
    if with_source:
        out = out + Expr.atom(Param("q")) * jv("J", (nu,), n)
    return out


def fluid_equation(n, a):
    """-sqrtg[(u_a u^v - delta)d_v P + (mu+P) u^v nabla_v u_a] + q J^v F_{va} (on the constraint).

    Signature is mostly-minus with u.u = +1, so the spatial projector is
    delta - u u and enters with a minus sign.
    """
    _, mu, P = fluid(n)
    s = sqrtg("g", n)
    q = Expr.atom(Param("q"))
    parts = []
    for v in range(n):
        coeff = u_lower(n, a) * u_upper(n, v) - (ONE if v == a else ZERO)
        parts.append(coeff * total_derivative(P, v))
        cov = total_derivative(u_lower(n, a), v) - sum_exprs(
            geometry.christoffel("g", n, l, v, a) * u_lower(n, l) for l in range(n)
        )
        parts.append((mu + P) * u_upper(n, v) * cov)
    lorentz = sum_exprs(jv("J", (v,), n) * F(n, v, a) for v in range(n))
    return -(s * sum_exprs(parts)) + q * lorentz


def fluid_equation_vorticity(n, a):
    """J^v(d_v Pi_a - d_a Pi_v) + Pi_a d_v J^v with Pi = -mu'(rho) u_lower + q A."""
    r = rho("J", "g", n)
    dmu = ONE + energy("J", "g", n, 0) + r * energy("J", "g", n, 1)
    q = Expr.atom(Param("q"))
    Pi = [-(dmu * u_lower(n, b)) + q * jv("A", (b,), n) for b in range(n)]
    out = sum_exprs(jv("J", (v,), n) * (total_derivative(Pi[a], v) - total_derivative(Pi[v], a)) for v in range(n))
    return out + Pi[a] * sum_exprs(jv("J", (v,), n, (v,)) for v in range(n))


# --------------------------------------------------------------------------
# Noether currents for the generator Xi = Y^mu d_mu + y d_theta


def Y(n, a, dirs=()):
    return jv("Y", (a,), n, dirs)


def y_gauge(n, dirs=()):
    return jv("y", (), n, dirs)


def F_mixed(n, a, b):
    """F^a_b = g^{ac} F_{cb}."""
    return sum_exprs(ginv("g", n, a, c) * F(n, c, b) for c in range(n))


def gauge_parameter(n):
    """zeta' = y + A_rho Y^rho."""
    return y_gauge(n) + sum_exprs(jv("A", (r,), n) * Y(n, r) for r in range(n))


def _lower_first(n, T, a, b):
    """T^{a}{}_{b} from a contravariant T^{ab}."""
    return sum_exprs(T(n, a, c) * gl(n, c, b) for c in range(n))


def em_current(n, a):
    """-sqrtg [ H_EM^a_s Y^s + F^{a m} d_m zeta' ]."""
    s = sqrtg("g", n)
    zp = gauge_parameter(n)
    t1 = sum_exprs(_lower_first(n, H_EM_upper, a, c) * Y(n, c) for c in range(n))
    t2 = sum_exprs(F_upper(n, a, m) * total_derivative(zp, m) for m in range(n))
    return -(s * (t1 + t2))


def fluid_current(n, a):
    """-sqrtg H_F^a_s Y^s."""
    return -(sqrtg("g", n) * sum_exprs(_lower_first(n, H_F_upper, a, c) * Y(n, c) for c in range(n)))


def interaction_current(n, a):
    """-q zeta' J^a."""
    return -(Expr.atom(Param("q")) * gauge_parameter(n) * jv("J", (a,), n))


def vertical_em_current(n, a):
    """-sqrtg F^{a m} d_m zeta' - zeta' q J^a."""
    s = sqrtg("g", n)
    zp = gauge_parameter(n)
    return -(s * sum_exprs(F_upper(n, a, m) * total_derivative(zp, m) for m in range(n))) - (
        zp * Expr.atom(Param("q")) * jv("J", (a,), n)
    )


def _cov_Y(n, lam, g):
    """nabla_g Y^lam."""
    G = geometry.christoffel
    return Y(n, lam, (g,)) + sum_exprs(G("g", n, lam, g, k) * Y(n, k) for k in range(n))


def _cov2_Y(n, lam, b, g):
    """nabla_b nabla_g Y^lam."""
    G = geometry.christoffel
    out = total_derivative(_cov_Y(n, lam, g), b)
    out = out + sum_exprs(G("g", n, lam, b, k) * _cov_Y(n, k, g) for k in range(n))
    return out - sum_exprs(G("g", n, k, b, g) * _cov_Y(n, lam, k) for k in range(n))


def hilbert_current(n, a, ricci_coeff=Fraction(3, 2)):
    """(sqrtg/2k)[(c R^a_l - R d^a_l) Y^l + (g^{bc} d^a_l - g^{a(c} d^{b)}_l) nabla_(bc) Y^l]."""
    kappa = Expr.atom(Param("kappa"))
    R = geometry.ricci_scalar("g", n)
    t1 = sum_exprs(geometry.ricci_mixed("g", n, a, l) * Y(n, l) for l in range(n)) * ricci_coeff - R * Y(n, a)
    sym = lambda l, b, c: (_cov2_Y(n, l, b, c) + _cov2_Y(n, l, c, b)) * Fraction(1, 2)  # noqa: E731
    t2 = sum_exprs(ginv("g", n, b, c) * sym(a, b, c) for b in range(n) for c in range(n))
    t3 = sum_exprs(ginv("g", n, a, c) * sym(l, l, c) for l in range(n) for c in range(n))
    return sqrtg("g", n) * kappa ** -1 * Fraction(1, 2) * (t1 + t2 - t3)

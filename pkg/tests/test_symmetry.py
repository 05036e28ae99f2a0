from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from jetvar import geometry
from jetvar.derived import ginv, sqrtg
from jetvar.modeldef import parse_model
from jetvar.models import build, model_source
from jetvar.numeric import max_relative_error, sample_points
from jetvar.relations import model_normal_form
from jetvar.symexpr import (
    ZERO,
    Coord,
    Expr,
    JetVariable,
    MultiIndex,
    Param,
    eval_terms,
    sum_exprs,
    total_derivative,
)
from jetvar.symmetry import (
    Current,
    NoConnectionField,
    NotCovariant,
    OnShellDecompositionFailed,
    check_covariance,
    check_offshell_identity,
    combine_generators,
    decompose,
    lie_derivative_jet,
    lie_derivative_section,
    noether_current,
    offshell_residue,
    same_generator,
    split_generator,
    superpotential,
)

N = 2


def zero_generator(g):
    return replace(g, base_exprs={}, gauge_expr=ZERO, lifts={})


def nf(e, m):
    return model_normal_form(e, m)


# --------------------------------------------------------------------------
# Lie derivatives


class TestLieDerivative:
    def test_metric(self, fluid2):
        """L_X g_ab = nabla_a Y_b + nabla_b Y_a."""
        n = N
        lie = lie_derivative_section(fluid2, fluid2.generator("Xi"))
        Ylow = lambda b: sum_exprs(O.gl(n, b, c) * O.Y(n, c) for c in range(n))  # noqa: E731
        G = lambda *i: geometry.christoffel("g", n, *i)  # noqa: E731
        nabla = lambda a, b: total_derivative(Ylow(b), a) - sum_exprs(G(c, a, b) * Ylow(c) for c in range(n))  # noqa: E731
        for a in range(n):
            for b in range(a, n):
                assert nf(lie[("g", (a, b))] - nabla(a, b) - nabla(b, a), fluid2).is_zero()

    def test_gauge_potential(self, fluid2):
        """L_Xi A_s = Y^r F_rs + d_s(y + A_r Y^r)."""
        n = N
        lie = lie_derivative_section(fluid2, fluid2.generator("Xi"))
        for s in range(n):
            expected = sum_exprs(O.Y(n, r) * O.F(n, r, s) for r in range(n)) + total_derivative(O.gauge_parameter(n), s)
            assert lie[("A", (s,))] == expected

    def test_vector_density(self, fluid2):
        """L_Y J = [Y, J] + J div Y, the same operator as the hydro parametrization."""
        n = N
        lie = lie_derivative_section(fluid2, fluid2.generator("Xi"))
        J = lambda a, *d: O.jv("J", (a,), n, d)  # noqa: E731
        for i in range(n):
            expected = sum_exprs(O.Y(n, m) * J(i, m) - J(m) * O.Y(n, i, (m,)) + J(i) * O.Y(n, m, (m,)) for m in range(n))
            assert lie[("J", (i,))] == expected

    def test_zero_generator(self, fluid2):
        g = zero_generator(fluid2.generator("Xi"))
        assert all(e.is_zero() for e in lie_derivative_section(fluid2, g).values())

    def test_empty_index_is_section(self, fluid2):
        g = fluid2.generator("Xi")
        assert lie_derivative_jet(fluid2, g, "A", (0,), MultiIndex.zero(N)) == lie_derivative_section(fluid2, g)[("A", (0,))]

    def test_scalar_jet_formula(self):
        """Scalar field: L y_mu = d_mu(y_nu xi^nu), the r_h formula with a zero vertical lift."""
        m = parse_model(
            "model s\ndim 2\nfield u : scalar\nlagrangian { u; }\ngenerator Xi {\n  vector Y;\n}\n"
        )
        g = m.generator("Xi")
        u = lambda *d: O.jv("u", (), N, d)  # noqa: E731
        for mu in range(N):
            expected = sum_exprs(u(mu, nu) * O.Y(N, nu) + u(nu) * O.Y(N, nu, (mu,)) for nu in range(N))
            assert lie_derivative_jet(m, g, "u", (), MultiIndex.unit(mu, N)) == expected

    @settings(max_examples=30)
    @given(st.sampled_from([("g", (0, 1)), ("A", (1,)), ("J", (0,))]), st.lists(st.integers(0, N - 1), max_size=2), st.integers(0, N - 1))
    def test_d_commutation(self, fluid2, key, dirs, mu):
        g = fluid2.generator("Xi")
        idx = MultiIndex.from_directions(tuple(dirs), N)
        lhs = lie_derivative_jet(fluid2, g, key[0], key[1], idx.raised(mu))
        assert lhs == total_derivative(lie_derivative_jet(fluid2, g, key[0], key[1], idx), mu)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4), st.integers(-3, 3))
def test_lie_derivative_is_additive(coeffs, c):
    m = build("charged_fluid", N)
    g = m.generator("Xi")
    x = lambda i: Expr.atom(Coord(i))  # noqa: E731
    a = replace(g, base_exprs={mu: O.Y(N, mu) * coeffs[mu] for mu in range(N)}, gauge_expr=O.y_gauge(N), lifts={})
    b = replace(g, base_exprs={mu: x(mu) * x(1 - mu) * coeffs[N + mu] for mu in range(N)},
                gauge_expr=x(0) * c, lifts={})
    la, lb = lie_derivative_section(m, a), lie_derivative_section(m, b)
    lab = lie_derivative_section(m, combine_generators(a, b, N))
    assert all(lab[k] == la[k] + lb[k] for k in lab)


# --------------------------------------------------------------------------
# covariance


COVARIANT = [("maxwell", "EM"), ("hilbert", "H"), ("charged_fluid", "H"), ("charged_fluid", "EM"),
             ("charged_fluid", "F"), ("charged_fluid", "int")]


class TestCovariance:
    @pytest.mark.parametrize("mid,label", COVARIANT)
    def test_residue_vanishes(self, mid, label):
        m = build(mid, N)
        rep = check_covariance(m, m.generators[0], m.term(label))
        assert rep.passed, rep.failures()

    @pytest.mark.parametrize("label", ["H", "EM", "F", "int"])
    def test_residue_vanishes_n3(self, fluid3, label):
        assert check_covariance(fluid3, "Xi", fluid3.term(label)).passed

    def test_interaction_needs_constraint(self, fluid2):
        """Without reduction modulo d_m J^m the interaction residue survives."""
        from jetvar.relations import relation_normal_form

        rep = check_covariance(fluid2, "Xi", fluid2.term("int"))
        assert rep.passed
        raw = rep.raw_volume.coefficient("y", (), MultiIndex.zero(N))
        q = Expr.atom(Param("q"))
        divJ = sum_exprs(O.jv("J", (m,), N, (m,)) for m in range(N))
        assert raw == -(q * divJ)
        assert not relation_normal_form(raw, "g", N).is_zero()

    def test_broken_lift(self):
        src = model_source("charged_fluid", N).replace(
            "  gauge y;\n", "  gauge y;\n  lift J[i] = sum(m: J[m] * Y[i; m]);\n"
        )
        m = parse_model(src)
        rep = check_covariance(m, "Xi", m.term("F"))
        assert not rep.passed

    def test_non_covariant_lagrangian(self, fluid2):
        L = ginv("g", N, 0, 0) * sqrtg("g", N)
        assert not check_covariance(fluid2, "Xi", L).passed

    def test_symmetry_breaking(self):
        m = parse_model("model s\ndim 2\nfield u : scalar\nlagrangian { u; }\ngenerator T {\n  vector Y;\n}\n")
        rep = check_covariance(m, "T")
        assert not rep.passed

    def test_noether_refuses_non_covariant(self, fluid2):
        with pytest.raises(NotCovariant):
            noether_current(fluid2, "Xi", ginv("g", N, 0, 0) * sqrtg("g", N))


# --------------------------------------------------------------------------
# currents


class TestCurrents:
    @pytest.mark.parametrize(
        "label,oracle",
        [("EM", O.em_current), ("F", O.fluid_current), ("int", O.interaction_current)],
    )
    def test_term_current(self, fluid2, label, oracle):
        E = noether_current(fluid2, "Xi", fluid2.term(label))
        for a in range(N):
            assert nf(E[a] - oracle(N, a), fluid2).is_zero()

    @pytest.mark.parametrize("label", ["EM", "F", "int"])
    def test_term_current_n3_numeric(self, fluid3, label):
        oracle = {"EM": O.em_current, "F": O.fluid_current, "int": O.interaction_current}[label]
        g = fluid3.generator("Xi")
        E = noether_current(fluid3, g, fluid3.term(label))
        pts = sample_points(fluid3, 11, 20, vector_fields=g.aux_fields())
        assert max(max_relative_error(E[a], oracle(3, a), pts) for a in range(3)) < 1e-9

    @pytest.mark.parametrize("n", [2, 3])
    def test_hilbert_current(self, n):
        """The closed-form E_H and the engine current both satisfy the off-shell identity.

        They differ by an identically conserved term coming from the order of
        integration by parts on mixed second derivatives.
        """
        m = build("charged_fluid", n)
        g = m.generator("Xi")
        L = m.term("H")
        pts = sample_points(m, 5, 20, vector_fields=g.aux_fields())
        engine = noether_current(m, g, L)

        def worst(E):
            div, vol = offshell_residue(m, g, E, L)
            out = 0.0
            for p in pts:
                a, sa = eval_terms(div, p)
                b, sb = eval_terms(vol, p)
                out = max(out, abs(a + b) / max(sa + sb, 1e-300))
            return out

        closed = Current(tuple(O.hilbert_current(n, a) for a in range(n)))
        assert worst(engine) < 1e-9
        assert worst(closed) < 1e-9
        if n == 3:
            for c in (Fraction(1), Fraction(2)):
                assert worst(Current(tuple(O.hilbert_current(n, a, c) for a in range(n)))) > 1e-3

    def test_horizontal_current(self, fluid2):
        """E_hor = E_H - sqrtg g^{am} (H_F + H_EM)_{mn} Y^n."""
        hor, _ = split_generator(fluid2.generator("Xi"), fluid2)
        E = noether_current(fluid2, hor)
        EH = noether_current(fluid2, hor, fluid2.term("H"))
        s = sqrtg("g", N)
        for a in range(N):
            Hsum = sum_exprs(
                (O._lower_first(N, O.H_F_upper, a, c) + O._lower_first(N, O.H_EM_upper, a, c)) * O.Y(N, c)
                for c in range(N)
            )
            assert nf(E[a] - EH[a] + s * Hsum, fluid2).is_zero()

    def test_vertical_current(self, fluid2):
        _, ver = split_generator(fluid2.generator("Xi"), fluid2)
        E = noether_current(fluid2, ver)
        for a in range(N):
            assert nf(E[a] - O.vertical_em_current(N, a), fluid2).is_zero()

    def test_zero_generator_gives_zero_current(self, fluid2):
        g = zero_generator(fluid2.generator("Xi"))
        assert noether_current(fluid2, g).is_zero()

    def test_current_is_additive(self, fluid2):
        hor, ver = split_generator(fluid2.generator("Xi"), fluid2)
        E = noether_current(fluid2, "Xi")
        Eh, Ev = noether_current(fluid2, hor), noether_current(fluid2, ver)
        for a in range(N):
            assert nf(E[a] - Eh[a] - Ev[a], fluid2).is_zero()


class TestOffshell:
    def test_identity(self, fluid2):
        E = noether_current(fluid2, "Xi")
        rep = check_offshell_identity(fluid2, "Xi", E)
        assert rep.passed, rep.failures()
        assert rep.notes["numeric"]["max_relative_error"] < 1e-9

    def test_zero_generator(self, fluid2):
        g = zero_generator(fluid2.generator("Xi"))
        assert check_offshell_identity(fluid2, g, Current.zero(N)).passed

    def test_dropping_interaction_breaks_it(self, fluid2):
        E = noether_current(fluid2, "Xi") - noether_current(fluid2, "Xi", fluid2.term("int"))
        rep = check_offshell_identity(fluid2, "Xi", E)
        assert not rep.passed
        assert Param("q") in rep.residues["identity"].atoms()


class TestSplitGenerator:
    def test_components(self, fluid2):
        hor, ver = split_generator(fluid2.generator("Xi"), fluid2)
        for mu in range(N):
            assert hor.xi(mu, N) == O.Y(N, mu)
            assert ver.xi(mu, N).is_zero()
        assert ver.zeta(N) == O.gauge_parameter(N)
        assert hor.zeta(N) == O.y_gauge(N) - O.gauge_parameter(N)

    def test_recombination(self, fluid2):
        g = fluid2.generator("Xi")
        assert same_generator(combine_generators(*split_generator(g, fluid2), N), g, N)

    def test_purely_vertical(self, fluid2):
        _, ver = split_generator(fluid2.generator("Xi"), fluid2)
        hor2, ver2 = split_generator(ver, fluid2)
        assert same_generator(hor2, zero_generator(ver), N)
        assert same_generator(ver2, ver, N)

    def test_needs_connection(self):
        m = build("hilbert", 2)
        with pytest.raises(NoConnectionField):
            split_generator(m.generators[0], m)


@pytest.fixture(scope="module")
def result():
    m = build("charged_fluid", N)
    _, ver = split_generator(m.generator("Xi"), m)
    return m, superpotential(m, noether_current(m, ver), ver)


class TestSuperpotential:
    def test_U(self, result):
        """U^{01} = -sqrtg F^{01} zeta' (the 1/2 over ordered pairs is absorbed)."""
        m, r = result
        expected = -(sqrtg("g", N) * O.F_upper(N, 0, 1) * O.gauge_parameter(N))
        assert nf(r.U[0, 1] - expected, m).is_zero()
        assert r.U[1, 0] == -r.U[0, 1]
        assert r.U[0, 0].is_zero()

    def test_no_charge_in_U(self, result):
        _, r = result
        assert Param("q") not in r.U.atoms()

    def test_multiplier_is_maxwell(self, result):
        """On-shell part: -zeta' times the Maxwell equation with source."""
        m, r = result
        for a in range(N):
            assert set(r.multipliers[a]) == {f"a[{a}]"}
            lam = r.multipliers[a][f"a[{a}]"]
            assert nf(lam + O.gauge_parameter(N), m).is_zero()
            assert nf(r.onshell[a] + O.gauge_parameter(N) * O.maxwell_equation(N, a), m).is_zero()

    def test_div_div_vanishes(self, result):
        _, r = result
        assert r.U.divergence().divergence().is_zero()

    def test_zero_current(self, fluid2):
        _, ver = split_generator(fluid2.generator("Xi"), fluid2)
        r = superpotential(fluid2, Current.zero(N), ver)
        assert r.U.is_zero() and r.onshell.is_zero()

    def test_off_span_fails(self, fluid2):
        _, ver = split_generator(fluid2.generator("Xi"), fluid2)
        E = Current((O.y_gauge(N) * O.jv("A", (0,), N), ZERO))
        with pytest.raises(OnShellDecompositionFailed):
            superpotential(fluid2, E, ver)


class TestDecompose:
    def test_exact_combination(self):
        u = lambda *d: Expr.atom(JetVariable("u", (), MultiIndex.from_directions(d, 2)))  # noqa: E731
        eqs = {"p": u(0) + u(), "r": u(1) * u(1) - 2}
        e = u(1) * eqs["p"] * 3 - eqs["r"] * Fraction(1, 2)
        lam, rem = decompose(e, eqs)
        assert rem.is_zero()
        assert sum_exprs(lam[k] * eqs[k] for k in lam) == e

    def test_remainder(self):
        u = Expr.atom(JetVariable("u", (), MultiIndex.zero(2)))
        lam, rem = decompose(u + 1, {"p": u * u})
        assert rem == u + 1


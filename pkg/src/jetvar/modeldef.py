"""Model DSL: parsing, validation, rendering, and the jmap check.

The grammar lives in ``grammar.lark`` (also reproduced in ``docs/dsl.md``).
Expressions use explicit component indices; ``sum(a, b: ...)`` loops an
index over ``0..n-1`` and ``nabla(T, m)`` expands a covariant derivative of a
field reference into partials plus Christoffel symbols of the declared metric.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from importlib import resources
from typing import Callable, Iterable, Mapping

import lark

from . import geometry
from .constraints import Constraint, UnsolvableLeading
from .derived import energy, ginv, norm, rho, sqrtg
from .render import to_dsl
from .report import CheckReport
from .symexpr import (
    ONE,
    ZERO,
    Coord,
    Expr,
    JetVariable,
    MultiIndex,
    NonlinearError,
    Param,
    linear_coefficients,
    substitute_jets,
    sum_exprs,
    total_derivative,
)

# kind -> (slot variances, density weight)
KINDS: dict[str, tuple[tuple[str, ...], int]] = {
    "scalar": ((), 0),
    "covector": (("d",), 0),
    "gauge-potential": (("d",), 0),
    "vector": (("u",), 0),
    "vector-density": (("u",), 1),
    "symmetric-2-cotensor": (("d", "d"), 0),
}

RESERVED = {
    "x", "ginv", "Ric", "F", "delta", "Gamma", "sqrtg", "R", "d", "nabla",
    "norm", "rho", "e", "ediff", "sum",
}

MAX_LAGRANGIAN_ORDER = 2
MAX_PARAM_RANK = 1
MAX_PARAM_ORDER = 1


class DSLSyntaxError(SyntaxError):
    """Malformed DSL text; carries line, column and the expected tokens."""

    def __init__(self, msg: str, line: int, column: int, expected: Iterable[str] = ()):
        self.line, self.column = line, column
        self.expected = sorted(set(expected))
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"line {line}, column {column}: {msg}{exp}")


class ValidationError(ValueError):
    """Well-formed DSL that does not describe a valid model."""

    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + msg)


# --------------------------------------------------------------------------
# model types


def components(kind: str, n: int) -> list[tuple[int, ...]]:
    if kind == "scalar":
        return [()]
    if kind == "symmetric-2-cotensor":
        return [(a, b) for a in range(n) for b in range(a, n)]
    return [(a,) for a in range(n)]


def normalize_comp(kind: str, comp: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(sorted(comp)) if kind == "symmetric-2-cotensor" else tuple(comp)


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: str

    def components(self, n: int) -> list[tuple[int, ...]]:
        return components(self.kind, n)


@dataclass(frozen=True, eq=False)
class Parametrization:
    params: tuple[FieldDecl, ...]
    deltas: Mapping[tuple[str, tuple], Expr]
    trivial: bool = False

    def param_names(self) -> set[str]:
        return {p.name for p in self.params}

    def _is_param_jet(self, a) -> bool:
        return isinstance(a, JetVariable) and a.field in self.param_names()

    @property
    def rank(self) -> int:
        return max((v.order for e in self.deltas.values() for v in e.jet_variables()
                    if v.field in self.param_names()), default=0)

    @property
    def order(self) -> int:
        field_order = max((v.order for e in self.deltas.values() for v in e.jet_variables()
                           if v.field not in self.param_names()), default=0)
        return max(self.rank, field_order)

    def coefficient_table(self) -> dict[tuple, Expr]:
        """(field, comp, param, pcomp, multi-index) -> p coefficient."""
        out = {}
        for (f, c), e in self.deltas.items():
            coeffs, _ = linear_coefficients(e, self._is_param_jet)
            for v, k in coeffs.items():
                out[(f, c, v.field, v.comp, v.index)] = k
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Parametrization):
            return NotImplemented
        return (self.params, self.trivial) == (other.params, other.trivial) and dict(self.deltas) == dict(other.deltas)

    __hash__ = None  # type: ignore[assignment]


def trivial_parametrization(fields: Iterable[FieldDecl], n: int) -> Parametrization:
    params = tuple(FieldDecl("eps" + f.name, f.kind) for f in fields)
    deltas = {}
    for f, p in zip(fields, params):
        for c in f.components(n):
            deltas[(f.name, c)] = Expr.atom(JetVariable(p.name, c, MultiIndex.zero(n)))
    return Parametrization(params, deltas, trivial=True)


@dataclass(frozen=True, eq=False)
class GeneratorLift:
    """Infinitesimal generator: base vector field plus optional U(1) gauge part.

    ``lifts`` overrides the kind template for selected field components and
    gives the vertical lift coefficient (the term subtracted from the
    transport part of the Lie derivative).
    """

    name: str
    base: str
    gauge: str | None = None
    lifts: Mapping[tuple[str, tuple], Expr] = field(default_factory=dict)
    base_exprs: Mapping[int, Expr] | None = None
    gauge_expr: Expr | None = None

    def xi(self, mu: int, n: int) -> Expr:
        if self.base_exprs is not None:
            return self.base_exprs.get(mu, ZERO)
        return Expr.atom(JetVariable(self.base, (mu,), MultiIndex.zero(n)))

    def zeta(self, n: int) -> Expr:
        if self.gauge_expr is not None:
            return self.gauge_expr
        if self.gauge is None:
            return ZERO
        return Expr.atom(JetVariable(self.gauge, (), MultiIndex.zero(n)))

    def aux_fields(self) -> set[str]:
        return {self.base} | ({self.gauge} if self.gauge else set())

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeneratorLift):
            return NotImplemented
        return (
            (self.name, self.base, self.gauge) == (other.name, other.base, other.gauge)
            and dict(self.lifts) == dict(other.lifts)
            and self.base_exprs == other.base_exprs
            and self.gauge_expr == other.gauge_expr
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    n: int
    fields: tuple[FieldDecl, ...]
    params: tuple[str, ...]
    lagrangian_terms: tuple[tuple[str, Expr], ...]
    parametrization: Parametrization
    constraints: tuple[Constraint, ...] = ()
    generators: tuple[GeneratorLift, ...] = ()
    jmaps: Mapping[str, Mapping[tuple[str, tuple], Expr]] = field(default_factory=dict)
    metric: str | None = None

    @cached_property
    def lagrangian(self) -> Expr:
        return sum_exprs(e for _, e in self.lagrangian_terms)

    def term(self, label: str) -> Expr:
        for k, e in self.lagrangian_terms:
            if k == label:
                return e
        raise KeyError(label)

    def field(self, name: str) -> FieldDecl:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def generator(self, name: str) -> GeneratorLift:
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(f"unknown generator {name!r}")

    def field_names(self) -> set[str]:
        return {f.name for f in self.fields}

    def gauge_potential(self) -> str | None:
        return next((f.name for f in self.fields if f.kind == "gauge-potential"), None)

    def lagrangian_order(self) -> int:
        names = self.field_names()
        return max((v.order for v in self.lagrangian.jet_variables() if v.field in names), default=0)

    def with_lagrangian(self, terms: Iterable[tuple[str, Expr]]) -> Model:
        return Model(self.name, self.n, self.fields, self.params, tuple(terms), self.parametrization,
                     self.constraints, self.generators, self.jmaps, self.metric)

    def with_parametrization(self, P: Parametrization, jmaps=None) -> Model:
        return Model(self.name, self.n, self.fields, self.params, self.lagrangian_terms, P,
                     self.constraints, self.generators, self.jmaps if jmaps is None else jmaps, self.metric)

    def with_generators(self, gens: Iterable[GeneratorLift], jmaps=None) -> Model:
        return Model(self.name, self.n, self.fields, self.params, self.lagrangian_terms,
                     self.parametrization, self.constraints, tuple(gens),
                     self.jmaps if jmaps is None else jmaps, self.metric)

    def with_constraints(self, cons: Iterable[Constraint]) -> Model:
        return Model(self.name, self.n, self.fields, self.params, self.lagrangian_terms,
                     self.parametrization, tuple(cons), self.generators, self.jmaps, self.metric)

    @cached_property
    def fingerprint_full(self) -> str:
        return hashlib.sha256(render_model(self).encode("utf-8")).hexdigest()

    def fingerprint(self) -> str:
        return self.fingerprint_full[:16]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Model):
            return NotImplemented
        return (
            (self.name, self.n, self.fields, self.params, self.metric)
            == (other.name, other.n, other.fields, other.params, other.metric)
            and self.lagrangian_terms == other.lagrangian_terms
            and self.parametrization == other.parametrization
            and self.constraints == other.constraints
            and self.generators == other.generators
            and {k: dict(v) for k, v in self.jmaps.items()} == {k: dict(v) for k, v in other.jmaps.items()}
        )

    def __hash__(self) -> int:
        return hash(self.fingerprint_full)


# --------------------------------------------------------------------------
# parsing


@lru_cache(maxsize=1)
def grammar_text() -> str:
    return resources.files("jetvar").joinpath("grammar.lark").read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def _parser() -> lark.Lark:
    return lark.Lark(grammar_text(), parser="lalr", propagate_positions=True, maybe_placeholders=True)


def _syntax_tree(text: str, start: str | None = None) -> lark.Tree:
    try:
        return _parser().parse(text)
    except lark.UnexpectedInput as exc:
        expected = getattr(exc, "expected", None) or getattr(exc, "allowed", None) or ()
        msg = "unexpected input"
        if isinstance(exc, lark.UnexpectedCharacters):
            msg = f"unexpected character {exc.char!r}"
        elif isinstance(exc, lark.UnexpectedToken):
            msg = f"unexpected token {exc.token!r}"
        elif isinstance(exc, lark.UnexpectedEOF):
            msg = "unexpected end of input"
        raise DSLSyntaxError(msg, exc.line, exc.column, expected) from None


def _pos(node) -> tuple[int | None, int | None]:
    meta = getattr(node, "meta", None)
    if meta is None or getattr(meta, "empty", True):
        return getattr(node, "line", None), getattr(node, "column", None)
    return meta.line, meta.column


class _Scope:
    """Declarations visible to expressions, plus the expression evaluator."""

    def __init__(self, n: int, kinds: dict[str, str], params: set[str], metric: str | None,
                 gauge: str | None):
        self.n = n
        self.kinds = kinds
        self.params = params
        self.metric = metric
        self.gauge = gauge

    def fail(self, node, msg: str):
        line, col = _pos(node)
        raise ValidationError(msg, line, col)

    def need_metric(self, node) -> str:
        if self.metric is None:
            self.fail(node, "a metric declaration is required here")
        return self.metric

    # indices
    def index(self, node, env: dict[str, int]) -> int:
        if isinstance(node, lark.Token):
            if node.type == "INT":
                return self._check_range(node, int(node))
            if str(node) in env:
                return env[str(node)]
            self.fail(node, f"unbound index {node}")
        kind = node.data
        if kind in ("int_index", "number"):
            return self._check_range(node, int(str(node.children[0])))
        if kind in ("var_index", "ref"):
            name = str(node.children[0])
            if name in env:
                return env[name]
            self.fail(node, f"unbound index {name}")
        self.fail(node, "expected an index")

    def _check_range(self, node, v: int) -> int:
        if not 0 <= v < self.n:
            self.fail(node, f"index {v} out of range 0..{self.n - 1}")
        return v

    def indices(self, node, env) -> tuple[int, ...]:
        if node is None:
            return ()
        return tuple(self.index(c, env) for c in node.children)

    # expressions
    def eval(self, node, env: dict[str, int]) -> Expr:
        kind = node.data
        ch = node.children
        if kind == "number":
            return Expr.const(Fraction(str(ch[0])))
        if kind in ("add", "sub"):
            # walk the left spine iteratively; long sums would overflow recursion
            parts = []
            while node.data in ("add", "sub"):
                right = self.eval(node.children[1], env)
                parts.append(right if node.data == "add" else -right)
                node = node.children[0]
            parts.append(self.eval(node, env))
            return sum_exprs(parts)
        if kind == "mul":
            factors = []
            while node.data == "mul":
                factors.append(node.children[1])
                node = node.children[0]
            out = self.eval(node, env)
            for f in reversed(factors):
                out = out * self.eval(f, env)
            return out
        if kind == "div":
            num, den = self.eval(ch[0], env), self.eval(ch[1], env)
            if den.is_zero():
                self.fail(node, "division by zero")
            if not (den.is_constant() or den.is_monomial()):
                self.fail(node, "division is only allowed by a constant or a single monomial")
            return num / den
        if kind == "neg":
            return -self.eval(ch[0], env)
        if kind == "unary":
            return self.eval(ch[0], env)
        if kind == "pow":
            base = self.eval(ch[0], env)
            k = self._exponent(ch[1])
            if k < 0 and not base.is_monomial():
                self.fail(node, "negative powers are only allowed for monomials")
            return base ** k
        if kind == "summation":
            names = [str(t) for t in ch[:-1]]
            body = ch[-1]
            parts = []
            for vals in itertools.product(range(self.n), repeat=len(names)):
                parts.append(self.eval(body, {**env, **dict(zip(names, vals))}))
            return sum_exprs(parts)
        if kind == "call":
            return self._call(node, env)
        if kind == "ref":
            return self._bare(node, env)
        if kind == "component":
            return self._component(node, env)
        if kind == "jet":
            return self._jet(node, env)
        self.fail(node, f"unsupported construct {kind}")

    def _exponent(self, node) -> int:
        if node.data == "exponent":
            return int(str(node.children[0]))
        if node.data == "neg_exponent":
            return -int(str(node.children[0]))
        return int(str(node.children[0]))

    def _bare(self, node, env) -> Expr:
        name = str(node.children[0])
        if name in env:
            self.fail(node, f"index {name} used as a value")
        if name in self.params:
            return Expr.atom(Param(name))
        if name == "sqrtg":
            return sqrtg(self.need_metric(node), self.n)
        if name == "R":
            return geometry.ricci_scalar(self.need_metric(node), self.n)
        kind = self.kinds.get(name)
        if kind == "scalar":
            return Expr.atom(JetVariable(name, (), MultiIndex.zero(self.n)))
        if kind is not None:
            self.fail(node, f"{name} needs component indices")
        self.fail(node, f"unknown symbol {name}")

    def _field_jet(self, node, name: str, comp: tuple, dirs: tuple) -> Expr:
        kind = self.kinds.get(name)
        if kind is None:
            self.fail(node, f"unknown symbol {name}")
        if len(comp) != len(KINDS[kind][0]):
            self.fail(node, f"{name} has {len(KINDS[kind][0])} component indices")
        comp = normalize_comp(kind, comp)
        idx = MultiIndex.from_directions(dirs, self.n)
        from .symexpr import max_jet_order

        if idx.order > max_jet_order():
            self.fail(node, f"jet order {idx.order} above the ceiling {max_jet_order()}")
        return Expr.atom(JetVariable(name, comp, idx))

    def _component(self, node, env) -> Expr:
        name = str(node.children[0])
        idx = self.indices(node.children[1], env)
        n = self.n
        if name == "x":
            return Expr.atom(Coord(idx[0]))
        if name == "ginv":
            return ginv(self.need_metric(node), n, *idx)
        if name == "Ric":
            return geometry.ricci(self.need_metric(node), n, *idx)
        if name == "F":
            if self.gauge is None:
                self.fail(node, "F needs a gauge-potential field")
            return geometry.field_strength(self.gauge, n, *idx)
        if name == "delta":
            return ONE if idx[0] == idx[1] else ZERO
        return self._field_jet(node, name, idx, ())

    def _jet(self, node, env) -> Expr:
        name = str(node.children[0])
        comp = self.indices(node.children[1], env)
        dirs = self.indices(node.children[2], env)
        if name == "Gamma":
            return geometry.christoffel(self.need_metric(node), self.n, comp[0], *dirs)
        return self._field_jet(node, name, comp, dirs)

    def _vector_arg(self, node) -> str:
        if node.data != "ref" or self.kinds.get(str(node.children[0])) not in ("vector", "vector-density"):
            self.fail(node, "expected the name of a vector or vector-density field")
        return str(node.children[0])

    def _call(self, node, env) -> Expr:
        name = str(node.children[0])
        args = node.children[1:]
        n = self.n
        if name == "d":
            if len(args) != 2:
                self.fail(node, "d(expr, index) takes two arguments")
            return total_derivative(self.eval(args[0], env), self.index(args[1], env))
        if name == "nabla":
            if len(args) != 2:
                self.fail(node, "nabla(expr, index) takes two arguments")
            t = self._tensor(args[0], env)
            m = self.index(args[1], env)
            if t is None:
                return total_derivative(self.eval(args[0], env), m)
            fn, var, weight, idx = t
            return geometry.covariant_derivative(fn, var, idx, m, self.need_metric(node), n, weight)
        if name == "norm":
            return norm(self._vector_arg(args[0]), self.need_metric(node), n)
        if name == "rho":
            return rho(self._vector_arg(args[0]), self.need_metric(node), n)
        if name in ("e", "ediff"):
            k = 0
            if name == "ediff":
                k = int(str(args[0].children[0])) if args[0].data == "number" else self.fail(args[0], "order")
                args = args[1:]
            inner = args[0]
            if inner.data != "call" or str(inner.children[0]) != "rho":
                self.fail(node, "the internal energy takes rho(J) as its argument")
            return energy(self._vector_arg(inner.children[1]), self.need_metric(node), n, k)
        self.fail(node, f"unknown function {name}")

    def _tensor(self, node, env):
        """(component fn, variances, weight, concrete indices) or None."""
        if node.data in ("component", "ref"):
            name = str(node.children[0])
            kind = self.kinds.get(name)
            if kind is None:
                return None
            var, weight = KINDS[kind]
            idx = self.indices(node.children[1], env) if node.data == "component" else ()
            if len(idx) != len(var):
                return None
            n = self.n

            def fn(c, name=name, kind=kind):
                return Expr.atom(JetVariable(name, normalize_comp(kind, c), MultiIndex.zero(n)))

            return fn, var, weight, idx
        if node.data == "call" and str(node.children[0]) == "nabla":
            inner = self._tensor(node.children[1], env)
            if inner is None:
                return None
            ifn, ivar, iw, iidx = inner
            metric = self.need_metric(node)
            n = self.n

            def fn(c, ifn=ifn, ivar=ivar, iw=iw):
                return geometry.covariant_derivative(ifn, ivar, c[:-1], c[-1], metric, n, iw)

            return fn, ivar + ("d",), iw, iidx + (self.index(node.children[2], env),)
        return None

    def assignments(self, ref_node, expr_node, kinds_ok: Callable[[str], bool]):
        """Expand ``name[i, j] = expr`` over free index names on the left."""
        name = str(ref_node.children[0])
        kind = self.kinds.get(name)
        if kind is None or not kinds_ok(name):
            self.fail(ref_node, f"{name} cannot be assigned here")
        if ref_node.data == "jet":
            self.fail(ref_node, "assignments take plain components")
        slots = ref_node.children[1].children if ref_node.data == "component" and ref_node.children[1] else []
        if len(slots) != len(KINDS[kind][0]):
            self.fail(ref_node, f"{name} has {len(KINDS[kind][0])} component indices")
        out = {}
        for comp in components(kind, self.n):
            env: dict[str, int] = {}
            ok = True
            for s, v in zip(slots, comp):
                if s.data == "int_index":
                    ok &= int(str(s.children[0])) == v
                else:
                    var = str(s.children[0])
                    if env.get(var, v) != v:
                        ok = False
                    env[var] = v
            if not ok:
                continue
            out[(name, comp)] = self.eval(expr_node, env)
        return out


def parse_expression(text: str, model: Model | None = None, n: int | None = None,
                     extra_kinds: Mapping[str, str] | None = None) -> Expr:
    """Parse a standalone expression in the scope of a model."""
    tree = _syntax_tree(f"lagrangian {{ {text} }}")
    node = tree.children[0].children[0].children[-1]
    scope = _model_scope(model, n, extra_kinds)
    return scope.eval(node, {})


def _model_scope(model: Model | None, n: int | None, extra_kinds=None) -> _Scope:
    if model is None:
        return _Scope(n or 1, dict(extra_kinds or {}), set(), None, None)
    kinds = {f.name: f.kind for f in model.fields}
    kinds.update({p.name: p.kind for p in model.parametrization.params})
    for g in model.generators:
        kinds[g.base] = "vector"
        if g.gauge:
            kinds[g.gauge] = "scalar"
    kinds.update(extra_kinds or {})
    return _Scope(model.n, kinds, set(model.params), model.metric, model.gauge_potential())


def parse_model(text: str) -> Model:
    """Parse and validate DSL text into a Model."""
    tree = _syntax_tree(text)
    stmts = tree.children
    name, n, params, metric = "model", None, [], None
    fields: list[FieldDecl] = []
    eps: list[FieldDecl] = []
    kinds: dict[str, str] = {}

    def declare(node, nm: str, kind: str):
        if nm in RESERVED:
            raise ValidationError(f"{nm} is a reserved name", *_pos(node))
        if nm in kinds or nm in params:
            raise ValidationError(f"{nm} declared twice", *_pos(node))
        kinds[nm] = kind

    gens_decl = []
    for s in stmts:
        if s.data == "model_stmt":
            name = str(s.children[0])
        elif s.data == "dim_stmt":
            n = int(str(s.children[0]))
            if not 1 <= n <= 4:
                raise ValidationError("dim must be between 1 and 4", *_pos(s))
        elif s.data == "param_stmt":
            for t in s.children:
                declare(s, str(t), "param")
                del kinds[str(t)]
                params.append(str(t))
        elif s.data == "metric_stmt":
            metric = str(s.children[0])
        elif s.data == "field_stmt":
            f = FieldDecl(str(s.children[0]), str(s.children[1]))
            declare(s, f.name, f.kind)
            fields.append(f)
        elif s.data == "parametrization_block":
            for it in s.children:
                if it.data == "eps_item":
                    p = FieldDecl(str(it.children[0]), str(it.children[1]))
                    declare(it, p.name, p.kind)
                    eps.append(p)
        elif s.data == "generator_block":
            gname = str(s.children[0])
            base = gauge = None
            for it in s.children[1:]:
                if it.data == "vector_item":
                    base = str(it.children[0])
                    declare(it, base, "vector")
                elif it.data == "gauge_item":
                    gauge = str(it.children[0])
                    declare(it, gauge, "scalar")
            if base is None:
                raise ValidationError(f"generator {gname} needs a vector declaration", *_pos(s))
            gens_decl.append((gname, base, gauge, s))
    if n is None:
        raise ValidationError("missing dim statement")
    if metric is not None and kinds.get(metric) != "symmetric-2-cotensor":
        raise ValidationError(f"metric {metric} must be a symmetric-2-cotensor field")
    if any(st.data == "trivial_parametrization" for st in stmts):
        for p in trivial_parametrization(fields, n).params:
            declare(tree, p.name, p.kind)
    gauge_field = next((f.name for f in fields if f.kind == "gauge-potential"), None)
    scope = _Scope(n, kinds, set(params), metric, gauge_field)
    field_names = {f.name for f in fields}
    eps_names = {p.name for p in eps} | {"eps" + f.name for f in fields if "eps" + f.name in kinds}
    gen_names = {g[1] for g in gens_decl} | {g[2] for g in gens_decl if g[2]}

    terms: list[tuple[str, Expr]] = []
    P = None
    cons: list[Constraint] = []
    jmaps: dict[str, dict] = {}
    for s in stmts:
        if s.data == "lagrangian_block":
            for i, lt in enumerate(s.children):
                *head, body = lt.children
                label = str(head[0]) if head and head[0] is not None else f"L{len(terms)}"
                e = scope.eval(body, {})
                _check_symbols(scope, lt, e, field_names, "the Lagrangian")
                order = max((v.order for v in e.jet_variables()), default=0)
                if order > MAX_LAGRANGIAN_ORDER:
                    raise ValidationError(
                        f"Lagrangian order {order} exceeds the supported order {MAX_LAGRANGIAN_ORDER}", *_pos(lt))
                terms.append((label, e))
        elif s.data == "trivial_parametrization":
            P = trivial_parametrization(fields, n)
        elif s.data == "parametrization_block":
            deltas = {}
            for it in s.children:
                if it.data != "delta_item":
                    continue
                got = scope.assignments(it.children[0], it.children[1], lambda nm: nm in field_names)
                for key, e in got.items():
                    _check_delta(scope, it, e, field_names, eps_names)
                    deltas[key] = e
            P = Parametrization(tuple(eps), deltas)
        elif s.data == "constraint_block":
            phi = scope.eval(s.children[0], {})
            _check_symbols(scope, s, phi, field_names, "a constraint")
            lead, faithful = None, False
            for it in s.children[1:]:
                if it.data == "lead_item":
                    lead = _single_jet(scope.eval(it.children[0], {}))
                    if lead is None:
                        raise ValidationError("lead must be a jet variable", *_pos(it))
                elif it.data == "faithful_item":
                    faithful = str(it.children[0]) == "true"
            try:
                cons.append(Constraint.build([phi], [lead], faithful))
            except UnsolvableLeading as exc:
                raise ValidationError(str(exc), *_pos(s)) from None
        elif s.data == "jmap_block":
            gname = str(s.children[0])
            entries = {}
            for it in s.children[1:]:
                got = scope.assignments(it.children[0], it.children[1], lambda nm: nm in eps_names)
                for key, e in got.items():
                    _check_symbols(scope, it, e, field_names | gen_names, "a jmap")
                    entries[key] = e
            jmaps[gname] = entries
    if P is None:
        P = trivial_parametrization(fields, n)
    gens = []
    for gname, base, gauge, s in gens_decl:
        lifts = {}
        for it in s.children[1:]:
            if it.data == "lift_item":
                got = scope.assignments(it.children[0], it.children[1], lambda nm: nm in field_names)
                for key, e in got.items():
                    _check_symbols(scope, it, e, field_names | gen_names, "a lift")
                    lifts[key] = e
        gens.append(GeneratorLift(gname, base, gauge, lifts))
    for g in jmaps:
        if g not in {x.name for x in gens}:
            raise ValidationError(f"jmap for undeclared generator {g}")
    return Model(name, n, tuple(fields), tuple(params), tuple(terms), P, tuple(cons), tuple(gens),
                 jmaps, metric)


def _single_jet(e: Expr) -> JetVariable | None:
    if not e.is_monomial():
        return None
    (atoms, coeff), = e.items()
    if coeff != 1 or len(atoms) != 1 or atoms[0][1] != 1 or not isinstance(atoms[0][0], JetVariable):
        return None
    return atoms[0][0]


def _check_symbols(scope: _Scope, node, e: Expr, allowed: set[str], where: str) -> None:
    for v in e.dependencies():
        if v.field not in allowed:
            scope.fail(node, f"{v.field} is not allowed in {where}")


def _check_delta(scope: _Scope, node, e: Expr, fields: set[str], eps: set[str]) -> None:
    is_eps = lambda a: isinstance(a, JetVariable) and a.field in eps  # noqa: E731
    try:
        coeffs, rest = linear_coefficients(e, is_eps)
    except NonlinearError:
        scope.fail(node, "parametrization must be linear in the parameters")
    if not rest.is_zero():
        scope.fail(node, "parametrization has a parameter-free term")
    for v, c in coeffs.items():
        if v.order > MAX_PARAM_RANK:
            scope.fail(node, f"parametrization rank {v.order} exceeds {MAX_PARAM_RANK}")
        for w in c.dependencies():
            if w.field in eps:
                scope.fail(node, "parametrization must be linear in the parameters")
            if w.field not in fields:
                scope.fail(node, f"{w.field} is not allowed in a parametrization")
            if w.order > MAX_PARAM_ORDER:
                scope.fail(node, f"parametrization order {w.order} exceeds {MAX_PARAM_ORDER}")


# --------------------------------------------------------------------------
# rendering


def _ref(name: str, comp: tuple) -> str:
    return f"{name}[{','.join(str(c) for c in comp)}]" if comp else name


def render_model(m: Model) -> str:
    """Canonical DSL text for a model (parses back to an equal Model)."""
    out = [f"model {m.name}", f"dim {m.n}"]
    if m.params:
        out.append("param " + ", ".join(m.params))
    for f in m.fields:
        out.append(f"field {f.name} : {f.kind}")
    if m.metric:
        out.append(f"metric {m.metric}")
    out.append("lagrangian {")
    out.append(";\n".join(f"  {k}: {to_dsl(e)}" for k, e in m.lagrangian_terms) or "  0")
    out.append("}")
    P = m.parametrization
    if P.trivial:
        out.append("parametrization trivial")
    else:
        out.append("parametrization {")
        for p in P.params:
            out.append(f"  eps {p.name} : {p.kind};")
        for (f, c), e in sorted(P.deltas.items()):
            out.append(f"  delta {_ref(f, c)} = {to_dsl(e)};")
        out.append("}")
    for c in m.constraints:
        for phi, lead in zip(c.exprs, c.leads):
            out.append(f"constraint {{ {to_dsl(phi)} = 0; lead {lead.dsl()}; "
                       f"faithful {'true' if c.faithful else 'false'}; }}")
    for g in m.generators:
        out.append(f"generator {g.name} {{")
        out.append(f"  vector {g.base};")
        if g.gauge:
            out.append(f"  gauge {g.gauge};")
        for (f, c), e in sorted(g.lifts.items()):
            out.append(f"  lift {_ref(f, c)} = {to_dsl(e)};")
        out.append("}")
    for gname in sorted(m.jmaps):
        out.append(f"jmap {gname} {{")
        for (f, c), e in sorted(m.jmaps[gname].items()):
            out.append(f"  {_ref(f, c)} = {to_dsl(e)};")
        out.append("}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# jmap check


def push_through_parametrization(m: Model, values: Mapping[tuple[str, tuple], Expr]) -> dict[tuple, Expr]:
    """<P | j eps> with eps replaced by the given section values."""
    return {key: substitute_jets(delta, values) for key, delta in m.parametrization.deltas.items()}


def check_jmap(m: Model, gen: GeneratorLift | str, jmap: Mapping | None = None) -> CheckReport:
    """Parametrization applied to jmap(gen) must reproduce the Lie derivative."""
    from .relations import model_normal_form
    from .symmetry import lie_derivative_section

    gen = m.generator(gen) if isinstance(gen, str) else gen
    if jmap is None:
        if gen.name not in m.jmaps:
            raise KeyError(f"no jmap declared for generator {gen.name}")
        jmap = m.jmaps[gen.name]
    pushed = push_through_parametrization(m, jmap)
    lie = lie_derivative_section(m, gen)
    rep = CheckReport("jmap")
    for f in m.fields:
        for c in f.components(m.n):
            lhs = pushed.get((f.name, c), ZERO)
            rhs = lie.get((f.name, c), ZERO)
            rep.residues[_ref(f.name, c)] = model_normal_form(lhs - rhs, m)
    return rep

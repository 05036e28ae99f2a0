"""Derived atoms: metric inverse, metric density, vector norm, internal energy.

Each derived atom depends on undifferentiated metric (and possibly vector
field) components and carries an explicit partial-derivative rule plus a
numeric evaluator.  Symmetric metrics are stored as upper-triangle
components; partials are taken with respect to those stored coordinates, so
an off-diagonal partial is twice the symmetric-tensor derivative.
"""

from __future__ import annotations

import math

import numpy as np

from .symexpr import (
    ONE,
    ZERO,
    Atom,
    Expr,
    JetPoint,
    JetVariable,
    MultiIndex,
    SingularPoint,
)


def metric_var(metric: str, n: int, a: int, b: int, index: MultiIndex | None = None) -> JetVariable:
    a, b = (a, b) if a <= b else (b, a)
    return JetVariable(metric, (a, b), index if index is not None else MultiIndex.zero(n))


def _metric_deps(metric: str, n: int) -> tuple[JetVariable, ...]:
    return tuple(metric_var(metric, n, a, b) for a in range(n) for b in range(a, n))


def metric_matrix(point: JetPoint, metric: str, n: int) -> np.ndarray:
    key = ("metric", metric, n)
    hit = point._cache.get(key)
    if hit is None:
        hit = np.empty((n, n))
        for a in range(n):
            for b in range(a, n):
                hit[a, b] = hit[b, a] = point.value(metric_var(metric, n, a, b))
        point._cache[key] = hit
    return hit


def inverse_matrix(point: JetPoint, metric: str, n: int) -> np.ndarray:
    key = ("ginv", metric, n)
    hit = point._cache.get(key)
    if hit is None:
        g = metric_matrix(point, metric, n)
        if abs(np.linalg.det(g)) < 1e-300:
            raise SingularPoint("degenerate metric")
        hit = np.linalg.inv(g)
        point._cache[key] = hit
    return hit


class InverseMetric(Atom):
    """Component g^{ab} of the inverse of a declared metric field."""

    __slots__ = ("metric", "n", "a", "b")
    kind_rank = 3

    @classmethod
    def _key_args(cls, metric: str, n: int, a: int, b: int) -> tuple:
        return (metric, n, min(a, b), max(a, b))

    def _init(self, metric, n, a, b):
        self.metric, self.n = metric, n
        self.a, self.b = min(a, b), max(a, b)

    def dependencies(self):
        return _metric_deps(self.metric, self.n)

    def partial(self, v: JetVariable) -> Expr:
        if v.field != self.metric or v.order:
            return ZERO
        c, d = v.comp
        a, b, g = self.a, self.b, self.metric
        n = self.n
        if c == d:
            return -(ginv(g, n, a, c) * ginv(g, n, c, b))
        return -(ginv(g, n, a, c) * ginv(g, n, d, b) + ginv(g, n, a, d) * ginv(g, n, c, b))

    def evaluate(self, point: JetPoint) -> float:
        return float(inverse_matrix(point, self.metric, self.n)[self.a, self.b])

    def dsl(self) -> str:
        return f"ginv[{self.a},{self.b}]"

    def latex(self) -> str:
        return f"{self.metric}^{{{self.a}{self.b}}}"


class SqrtAbsDet(Atom):
    """Metric density sqrt|det g|."""

    __slots__ = ("metric", "n")
    kind_rank = 3

    def _init(self, metric, n):
        self.metric, self.n = metric, n

    def dependencies(self):
        return _metric_deps(self.metric, self.n)

    def partial(self, v: JetVariable) -> Expr:
        if v.field != self.metric or v.order:
            return ZERO
        c, d = v.comp
        w = Expr.const(1) / 2 if c == d else ONE
        return w * Expr.atom(self) * ginv(self.metric, self.n, c, d)

    def evaluate(self, point: JetPoint) -> float:
        det = float(np.linalg.det(metric_matrix(point, self.metric, self.n)))
        if abs(det) < 1e-300:
            raise SingularPoint("degenerate metric")
        return math.sqrt(abs(det))

    def dsl(self) -> str:
        return "sqrtg"

    def latex(self) -> str:
        return r"\sqrt{|" + self.metric + "|}"


class VectorNorm(Atom):
    """|V| = sqrt(g_{ab} V^a V^b) for a timelike vector (density) field."""

    __slots__ = ("vfield", "metric", "n")
    kind_rank = 3

    def _init(self, vfield, metric, n):
        self.vfield, self.metric, self.n = vfield, metric, n

    def dependencies(self):
        vs = tuple(JetVariable(self.vfield, (a,), MultiIndex.zero(self.n)) for a in range(self.n))
        return _metric_deps(self.metric, self.n) + vs

    def partial(self, v: JetVariable) -> Expr:
        if v.order:
            return ZERO
        n, g, V = self.n, self.metric, self.vfield
        inv_norm = Expr.atom(self, -1)
        if v.field == V:
            (mu,) = v.comp
            s = ZERO
            for nu in range(n):
                s = s + Expr.atom(metric_var(g, n, mu, nu)) * Expr.atom(vector_var(V, n, nu))
            return s * inv_norm
        if v.field == g:
            c, d = v.comp
            w = Expr.const(1) / 2 if c == d else ONE
            return w * Expr.atom(vector_var(V, n, c)) * Expr.atom(vector_var(V, n, d)) * inv_norm
        return ZERO

    def evaluate(self, point: JetPoint) -> float:
        g = metric_matrix(point, self.metric, self.n)
        v = np.array([point.value(vector_var(self.vfield, self.n, a)) for a in range(self.n)])
        q = float(v @ g @ v)
        if q <= 0.0:
            raise SingularPoint("vector field is not timelike")
        return math.sqrt(q)

    def dsl(self) -> str:
        return f"norm({self.vfield})"

    def latex(self) -> str:
        return f"|{self.vfield}|"


class EnergyDerivative(Atom):
    """k-th derivative of the internal energy e at rho = |J| / sqrt|g|."""

    __slots__ = ("k", "vfield", "metric", "n")
    kind_rank = 3

    def _init(self, k, vfield, metric, n):
        self.k, self.vfield, self.metric, self.n = k, vfield, metric, n

    def dependencies(self):
        return VectorNorm(self.vfield, self.metric, self.n).dependencies()

    def partial(self, v: JetVariable) -> Expr:
        drho = _partial_rho(self.vfield, self.metric, self.n, v)
        if drho.is_zero():
            return ZERO
        nxt = EnergyDerivative(self.k + 1, self.vfield, self.metric, self.n)
        return Expr.atom(nxt) * drho

    def evaluate(self, point: JetPoint) -> float:
        r = rho_value(point, self.vfield, self.metric, self.n)
        return float(point.energy(r, self.k))

    def dsl(self) -> str:
        if self.k == 0:
            return f"e(rho({self.vfield}))"
        return f"ediff({self.k}, rho({self.vfield}))"

    def latex(self) -> str:
        if self.k == 0:
            return r"e(\rho_{" + self.vfield + "})"
        return "e^{(" + str(self.k) + r")}(\rho_{" + self.vfield + "})"


def vector_var(field: str, n: int, a: int, index: MultiIndex | None = None) -> JetVariable:
    return JetVariable(field, (a,), index if index is not None else MultiIndex.zero(n))


def ginv(metric: str, n: int, a: int, b: int) -> Expr:
    return Expr.atom(InverseMetric(metric, n, a, b))


def sqrtg(metric: str, n: int) -> Expr:
    return Expr.atom(SqrtAbsDet(metric, n))


def norm(vfield: str, metric: str, n: int) -> Expr:
    return Expr.atom(VectorNorm(vfield, metric, n))


def rho(vfield: str, metric: str, n: int) -> Expr:
    """Scalar density rho = |J| / sqrt|g| (a product of atoms, not an atom)."""
    return Expr.atom(VectorNorm(vfield, metric, n)) * Expr.atom(SqrtAbsDet(metric, n), -1)


def energy(vfield: str, metric: str, n: int, k: int = 0) -> Expr:
    return Expr.atom(EnergyDerivative(k, vfield, metric, n))


def _partial_rho(vfield: str, metric: str, n: int, v: JetVariable) -> Expr:
    from .symexpr import partial

    return partial(rho(vfield, metric, n), v)


def rho_value(point: JetPoint, vfield: str, metric: str, n: int) -> float:
    nv = point.atom_value(VectorNorm(vfield, metric, n))
    sg = point.atom_value(SqrtAbsDet(metric, n))
    r = nv / sg
    if r <= 0.0:
        raise SingularPoint("non-positive density")
    return r

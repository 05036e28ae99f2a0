"""Seeded random jet points for numeric cross-checks.

Values are generated lazily and keyed by the jet variable, so a point is
reproducible from its seed regardless of the order in which atoms are read.
Metric components sit near diag(1, -1, ..., -1) and vector fields near
(2, 0, ..., 0), so vectors are timelike with |J|^2 = g(J, J) > 0.  A draw is
rejected and redrawn unless |det g| > 0.1 and g(J, J)/|det g| > 0.05.  When a
model has constraints, leading coordinates are not sampled but computed from
their solved expressions, which puts the point on the prolonged constraint.
"""

from __future__ import annotations

import zlib
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .constraints import reduce_mod_constraint
from .derived import metric_matrix, vector_var
from .symexpr import Expr, JetPoint, JetVariable, SingularPoint, eval_numeric

if TYPE_CHECKING:
    from .modeldef import Model


def polynomial_energy(rho: float, k: int) -> float:
    """Sampler closure e(rho) = rho^2/2 + rho^3/5 (nonzero through e''')."""
    c = {0: (0.0, 0.0, 0.5, 0.2), 1: (0.0, 1.0, 0.6), 2: (1.0, 1.2), 3: (1.2,)}.get(k, ())
    return float(sum(a * rho**i for i, a in enumerate(c)))


class SampledPoint(JetPoint):
    """A jet point whose independent values are drawn on first access."""

    def __init__(self, seed: int, sample: int, model: Model | None = None, on_constraint: bool = True,
                 params: dict | None = None, vector_fields: Iterable[str] = (), attempt: int = 0):
        n = model.n if model is not None else 1
        rng = np.random.default_rng([seed, sample, attempt, 0])
        super().__init__(values={}, params=dict(params or {}), coords=tuple(rng.normal(size=n)),
                         energy=polynomial_energy)
        self.seed, self.sample, self.attempt = seed, sample, attempt
        self.model = model
        self.on_constraint = on_constraint and model is not None and bool(model.constraints)
        kinds = {}
        if model is not None:
            kinds = {f.name: f.kind for f in model.fields}
            self.metric = model.metric
        else:
            self.metric = None
        self.kinds = kinds
        self.vector_fields = set(vector_fields) | {k for k, v in kinds.items() if v in ("vector", "vector-density")}

    def _draw(self, key: str) -> float:
        h = zlib.crc32(key.encode("utf-8"))
        return float(np.random.default_rng([self.seed, self.sample, self.attempt, h]).uniform(-1.0, 1.0))

    def _base_value(self, v: JetVariable) -> float:
        x = self._draw(v.dsl())
        if v.order:
            return 0.5 * x
        if v.field == self.metric:
            a, b = v.comp
            if a == b:
                return (1.0 if a == 0 else -1.0) + 0.15 * x
            return 0.1 * x
        if v.field in self.vector_fields and self.kinds.get(v.field) in ("vector", "vector-density"):
            return 2.0 + 0.3 * x if v.comp == (0,) else 0.3 * x
        return x

    def value(self, v: JetVariable) -> float:
        hit = self.values.get(v)
        if hit is not None:
            return hit
        val = None
        if self.on_constraint:
            for c in self.model.constraints:
                for lead in c.leads:
                    if v.field == lead.field and v.comp == lead.comp and (v.index - lead.index) is not None:
                        val = eval_numeric(reduce_mod_constraint(Expr.atom(v), c), self)
                        break
                if val is not None:
                    break
        if val is None:
            val = self._base_value(v)
        self.values[v] = val
        return val

    def param(self, name: str) -> float:
        if name not in self.params:
            self.params[name] = 0.5 + abs(self._draw("param:" + name))
        return self.params[name]


MIN_ABS_DET = 0.1
MIN_DENSITY_SQUARE = 0.05
MAX_ATTEMPTS = 100


def well_conditioned(p: SampledPoint) -> bool:
    """|det g| > 0.1 and g(J, J)/|det g| > 0.05 for every vector field."""
    if p.model is None or p.metric is None:
        return True
    g = metric_matrix(p, p.metric, p.model.n)
    det = abs(float(np.linalg.det(g)))
    if det <= MIN_ABS_DET:
        return False
    for name in sorted(p.vector_fields):
        if p.kinds.get(name) not in ("vector", "vector-density"):
            continue
        J = np.array([p.value(vector_var(name, p.model.n, a)) for a in range(p.model.n)])
        if float(J @ g @ J) / det <= MIN_DENSITY_SQUARE:
            return False
    return True


def sample_point(model: Model | None, seed: int, sample: int, on_constraint: bool = True, **kw) -> SampledPoint:
    """First attempt at (seed, sample) that passes :func:`well_conditioned`."""
    for attempt in range(MAX_ATTEMPTS):
        p = SampledPoint(seed, sample, model, on_constraint, attempt=attempt, **kw)
        if well_conditioned(p):
            return p
    raise SingularPoint(f"no well-conditioned point for seed {seed}, sample {sample}")


def sample_points(model: Model | None, seed: int = 0, samples: int = 20, on_constraint: bool = True,
                  **kw) -> list[SampledPoint]:
    return [sample_point(model, seed, i, on_constraint, **kw) for i in range(samples)]


def max_relative_error(a: Expr, b: Expr, points: Iterable[JetPoint]) -> float:
    from .symexpr import relative_error

    return max((relative_error(a, b, p) for p in points), default=0.0)

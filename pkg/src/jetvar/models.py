"""Built-in models, shipped as DSL files, and the fluid thermodynamic identities."""

from __future__ import annotations

import re
from enum import Enum
from functools import lru_cache
from importlib import resources

from .derived import energy, rho, vector_var, metric_var
from .modeldef import Model, parse_model
from .report import CheckReport
from .symexpr import ONE, ZERO, Expr, partial, substitute, total_derivative
from .derived import EnergyDerivative


class BuiltinModelId(str, Enum):
    scalar_field = "scalar_field"
    maxwell = "maxwell"
    hilbert = "hilbert"
    charged_fluid = "charged_fluid"


DIMENSIONS = {
    BuiltinModelId.scalar_field: range(1, 5),
    BuiltinModelId.maxwell: range(1, 5),
    BuiltinModelId.hilbert: range(2, 5),
    BuiltinModelId.charged_fluid: range(2, 5),
}


def model_source(model_id: BuiltinModelId | str, n: int) -> str:
    """DSL text of a built-in model with its dimension set to n."""
    mid = BuiltinModelId(model_id)
    if n not in DIMENSIONS[mid]:
        lo, hi = DIMENSIONS[mid].start, DIMENSIONS[mid].stop - 1
        raise ValueError(f"{mid.value} needs dimension in {lo}..{hi}, got {n}")
    text = resources.files("jetvar").joinpath("models", f"{mid.value}.jv").read_text(encoding="utf-8")
    return re.sub(r"(?m)^dim \d+$", f"dim {n}", text)


@lru_cache(maxsize=None)
def build(model_id: BuiltinModelId | str, n: int = 4) -> Model:
    return parse_model(model_source(model_id, n))


# --------------------------------------------------------------------------
# fluid thermodynamics


def fluid_quantities(m: Model, vfield: str = "J") -> dict[str, Expr]:
    """rho, mu = rho(1+e), P = rho^2 e', and dmu/drho = 1 + e + rho e'."""
    g, n = m.metric, m.n
    r = rho(vfield, g, n)
    e0, e1 = energy(vfield, g, n, 0), energy(vfield, g, n, 1)
    return {
        "rho": r,
        "mu": r * (ONE + e0),
        "P": r * r * e1,
        "dmu_drho": ONE + e0 + r * e1,
    }


def fluid_identities(m: Model, vfield: str = "J") -> CheckReport:
    """rho dmu/drho = mu + P and rho d_nu(dmu/drho) = d_nu P, canonically."""
    q = fluid_quantities(m, vfield)
    r, mu, P, dmu = q["rho"], q["mu"], q["P"], q["dmu_drho"]
    n, g = m.n, m.metric
    rep = CheckReport("fluid_identities")
    rep.residues["rho*dmu/drho - (mu+P)"] = r * dmu - (mu + P)
    # chain rule through the derived atoms: mu depends on v only through rho
    for v in (vector_var(vfield, n, 0), metric_var(g, n, 0, 0), metric_var(g, n, 0, n - 1)):
        rep.residues[f"chain[{v.dsl()}]"] = r * partial(mu, v) - (mu + P) * partial(r, v)
    for nu in range(n):
        rep.residues[f"gradient[{nu}]"] = r * total_derivative(dmu, nu) - total_derivative(P, nu)
    zero_e = {a: ZERO for a in (mu + P + dmu).atoms() if isinstance(a, EnergyDerivative)}
    rep.residues["dust P"] = substitute(P, zero_e)
    rep.residues["dust mu"] = substitute(mu, zero_e) - r
    return rep


__all__ = ["BuiltinModelId", "DIMENSIONS", "build", "fluid_identities", "fluid_quantities", "model_source"]

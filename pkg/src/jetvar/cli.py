"""Command-line front end.

Every subcommand loads one model, runs its derivation or checks, and prints
either plain text or a JSON report (``--format json``).  The exit status is
0 iff every check in the report passed.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import click

from .modeldef import DSLSyntaxError, Model, ValidationError, parse_model, render_model
from .models import BuiltinModelId, build
from .render import to_dsl, to_latex
from .symexpr import Expr

SCHEMA_VERSION = "1.0"


@dataclass
class Report:
    """Machine-readable outcome of one invocation."""

    command: list[str]
    model: dict[str, Any]
    items: list[dict[str, Any]] = field(default_factory=list)
    expressions: dict[str, str] = field(default_factory=dict)
    numeric: dict[str, Any] = field(default_factory=dict)
    wall_time_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(it["status"] == "pass" for it in self.items)

    def add(self, name: str, ok: bool, residue: Expr | None = None, **extra) -> None:
        item = {"name": name, "status": "pass" if ok else "fail"}
        if residue is not None and not residue.is_zero():
            item["residue"] = to_dsl(residue)
        item.update(extra)
        self.items.append(item)

    def add_check(self, rep) -> None:
        for key, r in sorted(rep.residues.items()):
            self.add(f"{rep.name}:{key}", r.is_zero(), r)
        if not rep.residues:
            self.add(rep.name, True)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "model": self.model,
            "status": "pass" if self.passed else "fail",
            "items": sorted(self.items, key=lambda it: it["name"]),
            "expressions": dict(sorted(self.expressions.items())),
            "numeric": self.numeric,
            "wall_time_s": self.wall_time_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    def to_text(self) -> str:
        lines = [f"model {self.model['name']} (n={self.model['n']}, {self.model['fingerprint']})"]
        for name, e in sorted(self.expressions.items()):
            lines.append(f"{name} = {e}")
        for it in sorted(self.items, key=lambda it: it["name"]):
            tail = f"  residue: {it['residue']}" if "residue" in it else ""
            lines.append(f"[{it['status']}] {it['name']}{tail}")
        for k, v in sorted(self.numeric.items()):
            lines.append(f"{k}: {v}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def load_model(source: str, dim: int | None) -> Model:
    """``builtin:<id>`` or a path to a DSL file; ``dim`` overrides the dimension."""
    if source.startswith("builtin:"):
        return build(BuiltinModelId(source.split(":", 1)[1]), dim if dim is not None else 4)
    text = Path(source).read_text(encoding="utf-8")
    if dim is not None:
        import re

        text = re.sub(r"(?m)^dim \d+$", f"dim {dim}", text)
    return parse_model(text)


class _Ctx:
    def __init__(self, model: str, dim: int | None, fmt: str):
        self.model_source, self.dim, self.fmt = model, dim, fmt
        self.start = time.perf_counter()

    def model(self) -> Model:
        try:
            return load_model(self.model_source, self.dim)
        except (DSLSyntaxError, ValidationError) as exc:
            raise click.ClickException(f"{self.model_source}: {exc}") from exc
        except (OSError, ValueError) as exc:
            raise click.UsageError(str(exc)) from exc

    def report(self, m: Model) -> Report:
        return Report(
            command=sys.argv[1:] if sys.argv else [],
            model={"name": m.name, "n": m.n, "fingerprint": m.fingerprint()},
        )

    def finish(self, rep: Report) -> None:
        rep.wall_time_s = round(time.perf_counter() - self.start, 3)
        click.echo(rep.to_json() if self.fmt == "json" else rep.to_text())
        sys.exit(0 if rep.passed else 1)


def _common(f):
    f = click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
                     help="Output format.")(f)
    f = click.option("--dim", type=int, default=None, help="Base dimension n (builtins default to 4).")(f)
    f = click.option("--model", "model", default="builtin:charged_fluid", show_default=True,
                     help="builtin:<id> or a DSL file path.")(f)
    return f


def _generator(m: Model, name: str | None):
    if name is None:
        if not m.generators:
            raise click.UsageError(f"model {m.name} declares no generator")
        return m.generators[0]
    try:
        return m.generator(name)
    except KeyError as exc:
        raise click.UsageError(f"unknown generator {name!r}") from exc


def _part(m: Model, g, part: str):
    if part == "full":
        return g
    from .symmetry import NoConnectionField, split_generator

    try:
        hor, ver = split_generator(g, m)
    except NoConnectionField as exc:
        raise click.UsageError(str(exc)) from exc
    return hor if part == "horizontal" else ver


@click.group()
@click.version_option(package_name="jetvar")
def main() -> None:
    """Derive and check field equations, currents and superpotentials."""


@main.command()
@_common
@click.option("--reduced", is_flag=True, help="Reduce equations modulo the constraints.")
def derive(model: str, dim: int | None, fmt: str, reduced: bool) -> None:
    """P-Euler-Lagrange equations and the P-Poincare-Cartan morphism."""
    from .varcalc import p_euler_lagrange, p_poincare_cartan

    ctx = _Ctx(model, dim, fmt)
    m = ctx.model()
    rep = ctx.report(m)
    eqs = p_euler_lagrange(m, reduced=reduced)
    for q in eqs:
        rep.expressions[f"E:{q.name}"] = to_dsl(q.expr)
    for (aux, comp, idx, base), c in sorted(p_poincare_cartan(m).table.items(), key=lambda kv: repr(kv[0])):
        rep.expressions[f"F:{list(base)}:{aux}{list(comp) if comp else ''}{list(idx)}"] = to_dsl(c)
    rep.numeric["zero_equations"] = sum(1 for q in eqs if q.expr.is_zero())
    rep.numeric["equations"] = len(eqs)
    ctx.finish(rep)


@main.command()
@_common
@click.argument("generator", required=False)
@click.option("--part", type=click.Choice(["full", "horizontal", "vertical"]), default="full")
def noether(model: str, dim: int | None, fmt: str, generator: str | None, part: str) -> None:
    """Noether current of a generator."""
    from .symmetry import NotCovariant, noether_current

    ctx = _Ctx(model, dim, fmt)
    m = ctx.model()
    rep = ctx.report(m)
    g = _part(m, _generator(m, generator), part)
    try:
        E = noether_current(m, g)
        rep.add("covariance", True)
    except NotCovariant as exc:
        rep.add("covariance", False, note=str(exc))
        ctx.finish(rep)
        return
    for a, c in enumerate(E.components):
        rep.expressions[f"E[{a}]"] = to_dsl(c)
    ctx.finish(rep)


@main.command()
@_common
@click.argument("generator", required=False)
@click.option("--part", type=click.Choice(["full", "horizontal", "vertical"]), default="vertical")
def superpotential(model: str, dim: int | None, fmt: str, generator: str | None, part: str) -> None:
    """Superpotential U with E = (on-shell) + Div U."""
    from .symmetry import NotCovariant, OnShellDecompositionFailed, noether_current
    from .symmetry import superpotential as extract

    ctx = _Ctx(model, dim, fmt)
    m = ctx.model()
    rep = ctx.report(m)
    g = _part(m, _generator(m, generator), part)
    try:
        res = extract(m, noether_current(m, g), g)
        rep.add("onshell_decomposition", True)
    except NotCovariant as exc:
        rep.add("covariance", False, note=str(exc))
        ctx.finish(rep)
        return
    except OnShellDecompositionFailed as exc:
        rep.add("onshell_decomposition", False, exc.remainder, note=str(exc))
        ctx.finish(rep)
        return
    for (a, b), c in sorted(res.U.stored.items()):
        rep.expressions[f"U[{a},{b}]"] = to_dsl(c)
    for a, lam in sorted(res.multipliers.items()):
        for eq, c in lam.items():
            rep.expressions[f"lambda[{a}]:{eq}"] = to_dsl(c)
    ctx.finish(rep)


@main.command()
@_common
@click.argument("what", type=click.Choice(["covariance", "adapted", "jmap", "offshell"]))
@click.option("--generator", default=None)
@click.option("--term", default=None, help="Restrict covariance to one Lagrangian term label.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=20, show_default=True)
def check(model: str, dim: int | None, fmt: str, what: str, generator: str | None, term: str | None,
          seed: int, samples: int) -> None:
    """Run one structural check."""
    ctx = _Ctx(model, dim, fmt)
    m = ctx.model()
    rep = ctx.report(m)
    if what == "adapted":
        from .constraints import check_adapted

        for c in m.constraints or [None]:
            rep.add_check(check_adapted(m.parametrization, c, m))
    elif what == "jmap":
        from .modeldef import check_jmap

        g = _generator(m, generator)
        rep.add_check(check_jmap(m, g))
    elif what == "covariance":
        from .symmetry import check_covariance

        g = _generator(m, generator)
        labels = [term] if term else [label for label, _ in m.lagrangian_terms]
        for label in labels:
            r = check_covariance(m, g, m.term(label))
            r.name = f"covariance[{label}]"
            rep.add_check(r)
    else:
        from .symmetry import NotCovariant, check_offshell_identity, noether_current

        g = _generator(m, generator)
        try:
            E = noether_current(m, g)
        except NotCovariant as exc:
            rep.add("covariance", False, note=str(exc))
            ctx.finish(rep)
            return
        r = check_offshell_identity(m, g, E, seed=seed, samples=samples)
        rep.numeric.update(r.notes.get("numeric", {}))
        rep.add_check(r)
    ctx.finish(rep)


@main.command("eval")
@_common
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=20, show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
def eval_cmd(model: str, dim: int | None, fmt: str, seed: int, samples: int, tol: float) -> None:
    """Evaluate the P-EL equations at seeded jet points.

    On constraint-adapted points the raw and constraint-reduced equations
    must agree; the report carries the maximal relative error.
    """
    from .numeric import max_relative_error, sample_points
    from .symexpr import eval_numeric
    from .varcalc import p_euler_lagrange

    ctx = _Ctx(model, dim, fmt)
    m = ctx.model()
    rep = ctx.report(m)
    pts = sample_points(m, seed, samples)
    raw = p_euler_lagrange(m)
    red = p_euler_lagrange(m, reduced=True)
    worst = 0.0
    for a, b in zip(raw, red):
        err = max_relative_error(a.expr, b.expr, pts)
        worst = max(worst, err)
        rep.add(f"reduced:{a.name}", err < tol, max_relative_error=err)
        rep.expressions[f"value[0]:{a.name}"] = repr(eval_numeric(a.expr, pts[0])) if pts else "n/a"
    rep.numeric.update({"samples": samples, "seed": seed, "max_relative_error": worst, "tolerance": tol})
    ctx.finish(rep)


@main.command()
@_common
@click.argument("what", type=click.Choice(["dsl", "latex", "json"]))
def emit(model: str, dim: int | None, fmt: str, what: str) -> None:
    """Print the model as canonical DSL, LaTeX, or JSON."""
    ctx = _Ctx(model, dim, fmt)
    m = ctx.model()
    if what == "dsl":
        click.echo(render_model(m), nl=False)
        return
    terms = dict(m.lagrangian_terms)
    if what == "latex":
        for label, e in terms.items():
            click.echo(f"% {label}\n{to_latex(e)}")
        return
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": m.name,
        "n": m.n,
        "fingerprint": m.fingerprint(),
        "params": list(m.params),
        "fields": {f.name: f.kind for f in m.fields},
        "metric": m.metric,
        "lagrangian": {label: to_dsl(e) for label, e in terms.items()},
        "parametrization": {
            "params": {p.name: p.kind for p in m.parametrization.params},
            "deltas": {f"{k[0]}{list(k[1]) if k[1] else ''}": to_dsl(v)
                       for k, v in sorted(m.parametrization.deltas.items())},
        },
        "constraints": [[to_dsl(e) for e in c.exprs] for c in m.constraints],
        "generators": [g.name for g in m.generators],
    }
    click.echo(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False))


if __name__ == "__main__":
    main()

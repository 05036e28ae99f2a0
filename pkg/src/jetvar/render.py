"""Text renderings of expressions: DSL syntax and LaTeX (and LaTeX back to DSL)."""

from __future__ import annotations

import re
from fractions import Fraction

from .symexpr import Expr, atom_by_id

GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota",
    "kappa", "lambda", "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "phi",
    "chi", "psi", "omega",
}


def sorted_terms(e: Expr) -> list:
    def key(item):
        m, _ = item
        return (sum(abs(k) for _, k in m), [(atom_by_id(i).key, k) for i, k in m])

    return sorted(e.terms.items(), key=key)


def _join(parts: list[tuple[int, str]]) -> str:
    if not parts:
        return "0"
    out = []
    for pos, (sign, body) in enumerate(parts):
        if pos == 0:
            out.append(("-" if sign < 0 else "") + body)
        else:
            out.append((" - " if sign < 0 else " + ") + body)
    return "".join(out)


def to_dsl(e: Expr) -> str:
    parts = []
    for m, c in sorted_terms(e):
        c = Fraction(c)
        sign = -1 if c < 0 else 1
        c = abs(c)
        factors = []
        for i, k in m:
            s = atom_by_id(i).dsl()
            if k == 1:
                factors.append(s)
            elif k > 1:
                factors.append(f"{s}^{k}")
            else:
                factors.append(f"{s}^({k})")
        coef = str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
        if not factors:
            body = coef
        elif c == 1:
            body = "*".join(factors)
        else:
            body = coef + "*" + "*".join(factors)
        parts.append((sign, body))
    return _join(parts)


def param_latex(name: str) -> str:
    return "\\" + name if name in GREEK else r"\mathrm{" + name + "}"


def to_latex(e: Expr) -> str:
    parts = []
    for m, c in sorted_terms(e):
        c = Fraction(c)
        sign = -1 if c < 0 else 1
        c = abs(c)
        factors = []
        for i, k in m:
            s = atom_by_id(i).latex()
            factors.append(s if k == 1 else "{" + s + "}^{" + str(k) + "}")
        if c.denominator != 1:
            coef = r"\frac{" + str(c.numerator) + "}{" + str(c.denominator) + "}"
        else:
            coef = str(c.numerator)
        if not factors:
            body = coef
        elif c == 1:
            body = r"\,".join(factors)
        else:
            body = coef + r"\," + r"\,".join(factors)
        parts.append((sign, body))
    return _join(parts)


# LaTeX subset produced by to_latex, mapped back onto DSL expression syntax.
_LATEX_TOKENS = [
    (r"\\frac\{(\d+)\}\{(\d+)\}", lambda m: f"({m[1]}/{m[2]})"),
    (r"\\sqrt\{\|[A-Za-z][A-Za-z0-9]*\|\}", lambda m: "sqrtg"),
    (r"e\^\{\((\d+)\)\}\(\\rho_\{([A-Za-z][A-Za-z0-9]*)\}\)", lambda m: f"ediff({m[1]}, rho({m[2]}))"),
    (r"e\(\\rho_\{([A-Za-z][A-Za-z0-9]*)\}\)", lambda m: f"e(rho({m[1]}))"),
    (r"\|([A-Za-z][A-Za-z0-9]*)\|", lambda m: f"norm({m[1]})"),
    (r"x\^\{(\d)\}", lambda m: f"x[{m[1]}]"),
    (r"[A-Za-z][A-Za-z0-9]*\^\{(\d)(\d)\}", lambda m: f"ginv[{m[1]},{m[2]}]"),
    (r"([A-Za-z][A-Za-z0-9]*)_\{(\d*)(?:,(\d+))?\}", None),
    (r"\\mathrm\{([A-Za-z][A-Za-z0-9]*)\}", lambda m: m[1]),
    (r"\\([A-Za-z]+)", lambda m: m[1]),
    (r"\\,", lambda m: "*"),
    (r"\}\^\{(-?\d+)\}", lambda m: f")^({m[1]})"),
    (r"\{", lambda m: "("),
    (r"[A-Za-z][A-Za-z0-9]*", lambda m: m[0]),
    (r"\d+", lambda m: m[0]),
    (r"\s*([+-])\s*", lambda m: f" {m[1]} "),
]
_LATEX_RE = [(re.compile(p), f) for p, f in _LATEX_TOKENS]


def _jet_from_latex(m: re.Match) -> str:
    name, comp, dirs = m[1], m[2], m[3]
    comp_s = ",".join(comp)
    if dirs:
        return f"{name}[{comp_s}; {','.join(dirs)}]"
    return f"{name}[{comp_s}]" if comp_s else name


def latex_to_dsl(text: str) -> str:
    """Translate the LaTeX subset emitted by ``to_latex`` into DSL syntax."""
    out = []
    pos = 0
    while pos < len(text):
        for rx, fn in _LATEX_RE:
            m = rx.match(text, pos)
            if m and m.end() > pos:
                out.append(_jet_from_latex(m) if fn is None else fn(m))
                pos = m.end()
                break
        else:
            raise ValueError(f"unexpected LaTeX at offset {pos}: {text[pos:pos + 20]!r}")
    return "".join(out)

import json

import pytest
from click.testing import CliRunner

from jetvar.cli import main
from jetvar.modeldef import parse_expression, parse_model
from jetvar.models import build
from jetvar.render import latex_to_dsl


@pytest.fixture
def run():
    runner = CliRunner()

    def _run(*args):
        return runner.invoke(main, list(args), catch_exceptions=False)

    return _run


def _report(result):
    doc = json.loads(result.output)
    doc.pop("wall_time_s")
    return doc


def test_hilbert_2d_is_trivial(run):
    res = run("derive", "--model", "builtin:hilbert", "--dim", "2", "--format", "json")
    assert res.exit_code == 0
    doc = _report(res)
    assert doc["numeric"]["zero_equations"] == doc["numeric"]["equations"] == 3
    assert all(v == "0" for k, v in doc["expressions"].items() if k.startswith("E:"))


def test_offshell_seeded(run):
    res = run("check", "offshell", "--model", "builtin:charged_fluid", "--dim", "2", "--seed", "7",
              "--samples", "20", "--format", "json")
    assert res.exit_code == 0
    doc = _report(res)
    assert doc["numeric"]["seed"] == 7
    assert doc["numeric"]["max_relative_error"] < 1e-9
    assert doc["status"] == "pass"


@pytest.mark.parametrize(
    "args",
    [
        ("eval", "--model", "builtin:charged_fluid", "--dim", "2", "--seed", "3", "--samples", "5"),
        ("check", "covariance", "--model", "builtin:maxwell", "--dim", "2"),
        ("superpotential", "--model", "builtin:charged_fluid", "--dim", "2"),
    ],
)
def test_json_report_is_deterministic(run, args):
    a = run(*args, "--format", "json")
    b = run(*args, "--format", "json")
    assert a.exit_code == b.exit_code == 0
    assert _report(a) == _report(b)
    assert set(json.loads(a.output)) == {
        "schema_version", "command", "model", "status", "items", "expressions", "numeric", "wall_time_s",
    }


def test_superpotential_report(run):
    doc = _report(run("superpotential", "--model", "builtin:charged_fluid", "--dim", "2", "--format", "json"))
    assert set(k for k in doc["expressions"] if k.startswith("U")) == {"U[0,1]"}
    assert "q" not in doc["expressions"]["U[0,1]"].replace("sqrtg", "")


def test_failed_check_exits_nonzero(run, tmp_path):
    src = tmp_path / "s.jv"
    src.write_text("model s\ndim 2\nfield u : scalar\nlagrangian { u; }\ngenerator T {\n  vector Y;\n}\n")
    res = run("check", "covariance", "--model", str(src), "--format", "json")
    assert res.exit_code == 1
    assert _report(res)["status"] == "fail"


def test_parse_error_position(run, tmp_path):
    src = tmp_path / "bad.jv"
    src.write_text("model t\ndim 2\nfield u : scalar\nlagrangian { u + ; }\n")
    res = CliRunner().invoke(main, ["derive", "--model", str(src)])
    assert res.exit_code != 0
    assert "line 4" in res.output and "column 18" in res.output


def test_unknown_builtin(run):
    res = CliRunner().invoke(main, ["derive", "--model", "builtin:nope"])
    assert res.exit_code == 2


@pytest.mark.parametrize("mid,n", [("charged_fluid", 2), ("maxwell", 3), ("scalar_field", 2)])
def test_latex_round_trip(run, mid, n):
    m = build(mid, n)
    res = run("emit", "latex", "--model", f"builtin:{mid}", "--dim", str(n))
    assert res.exit_code == 0
    chunks = [c for c in res.output.split("% ") if c.strip()]
    for (label, expr), chunk in zip(m.lagrangian_terms, chunks):
        head, body = chunk.split("\n", 1)
        assert head == label
        assert parse_expression(latex_to_dsl(body.strip()), m) == expr


def test_emit_dsl_round_trip(run):
    res = run("emit", "dsl", "--model", "builtin:charged_fluid", "--dim", "3")
    assert parse_model(res.output) == build("charged_fluid", 3)


def test_emit_json(run):
    doc = json.loads(run("emit", "json", "--model", "builtin:maxwell", "--dim", "2").output)
    assert doc["fields"] == {"g": "symmetric-2-cotensor", "A": "gauge-potential"}
    assert doc["fingerprint"] == build("maxwell", 2).fingerprint()


def test_text_output(run):
    res = run("check", "jmap", "--model", "builtin:charged_fluid", "--dim", "2")
    assert res.exit_code == 0
    assert res.output.rstrip().endswith("PASS")

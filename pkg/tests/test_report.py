from __future__ import annotations

import dataclasses
import io
import json
import os
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bispectral.report as report_mod
from bispectral.arith import Poly, RatFunc, TriPoly
from bispectral.cli import main
from bispectral.operators import DiffOp
from bispectral.report import (
    ProblemError,
    RunReport,
    decode_value,
    emit_report,
    encode_value,
    parse_problem,
    parse_report,
    run_pipeline,
)
from conftest import cusp_lists, rationals

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = ROOT / "problems"
GOLDEN = Path(__file__).resolve().parent / "golden"

GOLDEN_CASES = [
    ("airy2-cusp-0-1", "construct"),
    ("airy2-cusp-0-0", "ring"),
    ("airy2-cusp-1-2", "involute"),
    ("airy3-cusp-0-1", "construct"),
    ("airy3-cusp-0-1", "verify-all"),
]


def problem(r=2, a=(), cusps=((0, 1),), **extra) -> str:
    data = {
        "r": r,
        "a": [str(v) for v in a],
        "cusps": [{"lambda": str(l), "gamma": str(g)} for l, g in cusps],
        **extra,
    }
    return json.dumps(data)


# -- parsing -----------------------------------------------------------------


def test_parse_valid_problem():
    spec = parse_problem('{"r": 2, "a": [], "cusps": [{"lambda": "0", "gamma": "1"}]}')
    assert (spec.n, spec.N) == (1, 2)
    assert spec.degree_bound == 4 and spec.series_truncation == 12
    spec = parse_problem('{"r": 3, "a": ["1/2"], "cusps": []}')
    assert spec.a == (Fraction(1, 2),)


def test_overrides_win():
    spec = parse_problem(problem(degree_bound=7), degree_bound=3, series_truncation=20)
    assert spec.degree_bound == 3 and spec.series_truncation == 20


@pytest.mark.parametrize(
    "text,message",
    [
        (problem(cusps=((0, 1), (0, 2))), "duplicate lambda"),
        (problem(cusps=(("1.5", 1),)), "malformed rational"),
        ('{"r": 2, "a": [], "cusps": [{"lambda": 0.5, "gamma": "1"}]}', "malformed rational"),
        (problem(r=1), "r must be at least 2"),
        (problem(r=3, a=()), "length"),
        (problem(r=2, a=(1,)), "length"),
        ('{"a": [], "cusps": []}', "missing r"),
        (problem(extra_key=1), "unknown keys"),
        (problem(degree_bound=-1), "non-negative"),
        (problem(series_truncation=3), "series_truncation"),
        ("{not json", "not valid JSON"),
        ('{"r": 2, "a": [], "cusps": [{"lambda": "0"}]}', "lambda and gamma"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(ProblemError, match=message):
        parse_problem(text)


# -- the pipeline ------------------------------------------------------------


def test_construct_example():
    rep = run_pipeline(parse_problem(problem()), "construct")
    kbar = decode_value(rep.results["construct"]["kbar"])
    assert kbar == DiffOp([Poly([1, 1, -1]), Poly.const(-1), Poly([-1, 1])])
    assert "ring" not in rep.results
    assert rep.passed


def test_ring_example():
    rep = run_pipeline(parse_problem(problem(cusps=((0, 0),), degree_bound=3)), "ring")
    assert [g["order"] for g in rep.results["ring"]["generators"]] == [4, 6]
    assert rep.results["ring"]["rank"] == 2
    assert rep.passed


def test_involute_example():
    rep = run_pipeline(parse_problem(problem(cusps=((1, 2),))), "involute")
    inv = rep.results["involute"]
    assert inv["status"] == "computed"
    assert inv["target"] == [{"lambda": "3", "gamma": "2"}]
    assert all(c["passed"] for c in rep.checks if c["stage"] == "involute")


def test_verify_all_passes_on_two_cusps():
    rep = run_pipeline(parse_problem((PROBLEMS / "airy3-two-cusps.json").read_text()), "verify-all")
    assert rep.passed, [c for c in rep.checks if not c["passed"]] + rep.errors
    stages = {c["stage"] for c in rep.checks}
    assert {"structure", "oracle", "stabilizer", "truerank", "symmetry", "ring", "involute"} <= stages


@pytest.mark.parametrize("name", ["airy2-cusp-1-2", "airy3-two-cusps"])
def test_residuals_are_zero_exactly_on_pass(name, monkeypatch):
    spec = parse_problem((PROBLEMS / f"{name}.json").read_text())
    rep = run_pipeline(spec, "verify-all")
    assert rep.checks
    for c in rep.checks:
        assert c["passed"] and not decode_value(c["residual"]), c
    monkeypatch.setattr(report_mod, "build_kbar", perturbed_build(report_mod.build_kbar))
    for c in run_pipeline(spec, "verify-all").checks:
        assert c["passed"] == (not decode_value(c["residual"])), c


def test_text_output():
    text = emit_report(run_pipeline(parse_problem(problem()), "construct"))
    assert "tau = x - 1" in text
    assert "Kbar = (x - 1)*D^2 - D + (-x^2 + x + 1)" in text
    assert text.endswith("result: pass\n")


def test_failed_identity_prints_residual():
    rep = RunReport({"r": 2, "a": [], "cusps": []}, "verify-all")
    residual = DiffOp([Poly([0, 3]), Poly.const(1)])
    rep.add_check("oracle", "something", False, residual)
    text = emit_report(rep)
    assert "[FAIL] oracle: something  residual: D + (3*x)" in text
    assert rep.exit_code == 1


def perturbed_build(real):
    def build(L0, C):
        res = real(L0, C)
        return dataclasses.replace(res, kbar=res.kbar + DiffOp([Poly([0, 1])]))

    return build


def test_perturbation_is_caught(monkeypatch):
    monkeypatch.setattr(report_mod, "build_kbar", perturbed_build(report_mod.build_kbar))
    rep = run_pipeline(parse_problem(problem(cusps=((1, 2),))), "verify-all")
    assert not rep.passed
    failed = {(c["stage"], c["name"]) for c in rep.checks if not c["passed"]}
    assert ("oracle", "series_wronskian_agrees") in failed
    text = emit_report(rep)
    assert "[FAIL] oracle: series_wronskian_agrees" in text and "result: fail" in text


def test_empty_divisor_passes_everything():
    rep = run_pipeline(parse_problem('{"r": 2, "a": [], "cusps": []}'), "verify-all")
    assert rep.results["construct"]["kbar"]["text"] == "1"
    assert rep.passed and not rep.errors


def test_stage_errors_are_collected(monkeypatch):
    def boom(*args):
        raise RuntimeError("stabilizer exploded")

    monkeypatch.setattr(report_mod, "stabilizer_generic", boom)
    rep = run_pipeline(parse_problem(problem()), "verify-all")
    assert rep.errors == [{"stage": "stabilizer", "message": "RuntimeError: stabilizer exploded"}]
    assert any(c["stage"] == "truerank" for c in rep.checks)
    assert rep.exit_code == 1
    assert "[ERROR] stabilizer: RuntimeError: stabilizer exploded" in emit_report(rep)


# -- serialization -----------------------------------------------------------


@given(st.lists(rationals(), max_size=4))
def test_value_round_trip(coeffs):
    p = Poly(coeffs)
    for v in [p, RatFunc(p, Poly([1, 1])), DiffOp([p, RatFunc(1, Poly([0, 1]))]), Fraction(3, 7), None, "x"]:
        assert decode_value(encode_value(v)) == v
    t = TriPoly({(1, 0, 2): 3, (0, 1, 0): Fraction(-1, 2)})
    assert decode_value(encode_value(t)) == t


@settings(max_examples=10)
@given(st.integers(2, 3), cusp_lists(1, 2), st.sampled_from(["construct", "involute"]))
def test_structured_round_trip(r, cusps, mode):
    text = problem(r=r, a=["1"] * (r - 2), cusps=cusps)
    rep = run_pipeline(parse_problem(text), mode)
    doc = emit_report(rep, "structured")
    back = parse_report(doc)
    assert back == rep
    assert emit_report(back, "structured") == doc
    assert emit_report(run_pipeline(parse_problem(text), mode), "structured") == doc


def test_unknown_schema_rejected():
    with pytest.raises(ValueError, match="schema"):
        parse_report('{"schema": 99}')


# -- golden reports ----------------------------------------------------------


@pytest.mark.parametrize("name,mode", GOLDEN_CASES)
def test_golden(name, mode):
    spec = parse_problem((PROBLEMS / f"{name}.json").read_text())
    doc = emit_report(run_pipeline(spec, mode), "structured")
    path = GOLDEN / f"{name}.{mode}.json"
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(doc)
    assert doc == path.read_text()


# -- command line ------------------------------------------------------------


def run_cli(monkeypatch, capsys, argv, stdin=""):
    monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_stdin(monkeypatch, capsys):
    code, out, _ = run_cli(monkeypatch, capsys, ["construct"], problem())
    assert code == 0 and "tau = x - 1" in out


def test_cli_structured_file(monkeypatch, capsys):
    path = str(PROBLEMS / "airy2-cusp-1-2.json")
    code, out, _ = run_cli(monkeypatch, capsys, ["involute", path, "--format", "structured"])
    assert code == 0
    assert json.loads(out)["results"]["involute"]["target"] == [{"lambda": "3", "gamma": "2"}]


def test_cli_batch_keeps_input_order(monkeypatch, capsys):
    paths = [str(PROBLEMS / f"{n}.json") for n in ("airy2-cusp-1-2", "airy2-cusp-0-1", "airy3-cusp-0-1")]
    code, out, _ = run_cli(monkeypatch, capsys, ["construct", *paths, "--format", "structured", "--jobs", "2"])
    assert code == 0
    docs = json.loads(out)
    assert [d["problem"]["cusps"][0]["gamma"] for d in docs] == ["2", "1", "1"]


def test_cli_input_error(monkeypatch, capsys):
    code, out, err = run_cli(monkeypatch, capsys, ["construct"], problem(cusps=((0, 1), (0, 1))))
    assert code == 2 and "duplicate lambda" in err and out == ""
    code, _, err = run_cli(monkeypatch, capsys, ["construct", "/nonexistent/file.json"])
    assert code == 2


def test_cli_verification_failure(monkeypatch, capsys):
    monkeypatch.setattr(report_mod, "build_kbar", perturbed_build(report_mod.build_kbar))
    code, out, _ = run_cli(monkeypatch, capsys, ["verify-all", "--degree-bound", "3"], problem(cusps=((1, 2),)))
    assert code == 1 and "result: fail" in out

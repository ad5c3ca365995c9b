"""Problem files, the staged pipeline and its reports.

Input and output share one JSON format in which every rational is a string.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .airy import (
    CuspDivisor,
    KbarResult,
    build_kbar,
    flat_via_weyl,
    kbar_series_oracle,
    structure_residuals,
)
from .arith import Poly, RatFunc, TriPoly, format_poly, parse_rational
from .involution import (
    Identity,
    eigenfunction_symmetry_check,
    verify_involution,
)
from .operators import AiryVacuum, DiffOp, format_diffop
from .stabilizer import (
    build_ring,
    divide_by_kbar,
    stabilizer_closed,
    stabilizer_generic,
    truerank_residuals,
)

MODES = ("construct", "ring", "involute", "verify-all")
SCHEMA_VERSION = 1


class ProblemError(ValueError):
    """Malformed or invalid problem file."""


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class ProblemSpec:
    r: int
    a: tuple[Fraction, ...]
    cusps: tuple[tuple[Fraction, Fraction], ...]
    degree_bound: int
    series_truncation: int

    @property
    def n(self) -> int:
        return len(self.cusps)

    @property
    def N(self) -> int:
        return self.r * self.n

    def vacuum(self) -> AiryVacuum:
        return AiryVacuum(self.r, list(self.a))

    def divisor(self) -> CuspDivisor:
        return CuspDivisor(self.cusps)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "a": [str(c) for c in self.a],
            "cusps": [{"lambda": str(l), "gamma": str(g)} for l, g in self.cusps],
            "degree_bound": self.degree_bound,
            "series_truncation": self.series_truncation,
        }


_PROBLEM_KEYS = {"r", "a", "cusps", "degree_bound", "series_truncation"}


def _int_field(data: dict, key: str) -> int | None:
    v = data.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProblemError(f"{key} must be an integer, got {v!r}")
    return v


def _rational(v: Any, what: str) -> Fraction:
    if isinstance(v, float):
        raise ProblemError(f"malformed rational for {what}: {v!r} (use a \"p/q\" string)")
    try:
        return parse_rational(v)
    except ValueError as exc:
        raise ProblemError(f"{what}: {exc}") from None


def problem_from_dict(
    data: Any, degree_bound: int | None = None, series_truncation: int | None = None
) -> ProblemSpec:
    """Validate a decoded problem. Explicit arguments override the file."""
    if not isinstance(data, dict):
        raise ProblemError("problem must be a JSON object")
    unknown = set(data) - _PROBLEM_KEYS
    if unknown:
        raise ProblemError(f"unknown keys: {sorted(unknown)}")
    r = _int_field(data, "r")
    if r is None:
        raise ProblemError("missing r")
    if r < 2:
        raise ProblemError(f"r must be at least 2, got {r}")
    a_raw = data.get("a", [])
    if not isinstance(a_raw, list):
        raise ProblemError("a must be a list")
    if len(a_raw) != r - 2:
        raise ProblemError(f"a must have length r - 2 = {r - 2}, got {len(a_raw)}")
    a = tuple(_rational(v, f"a[{i + 1}]") for i, v in enumerate(a_raw))
    cusps_raw = data.get("cusps")
    if not isinstance(cusps_raw, list):
        raise ProblemError("cusps must be a list")
    cusps = []
    for i, c in enumerate(cusps_raw):
        if not isinstance(c, dict) or set(c) != {"lambda", "gamma"}:
            raise ProblemError(f"cusp {i} must have exactly the keys lambda and gamma")
        cusps.append((_rational(c["lambda"], f"cusp {i} lambda"), _rational(c["gamma"], f"cusp {i} gamma")))
    lams = [l for l, _ in cusps]
    if len(set(lams)) != len(lams):
        raise ProblemError("duplicate lambda")
    n = len(cusps)
    d = degree_bound if degree_bound is not None else _int_field(data, "degree_bound")
    d = 2 * n + 2 if d is None else d
    if d < 0:
        raise ProblemError(f"degree_bound must be non-negative, got {d}")
    m = series_truncation if series_truncation is not None else _int_field(data, "series_truncation")
    m = r * n + 10 if m is None else m
    if m < r * n + 2:
        raise ProblemError(f"series_truncation must be at least rn + 2 = {r * n + 2}, got {m}")
    return ProblemSpec(r, a, tuple(cusps), d, m)


def parse_problem(
    text: str, degree_bound: int | None = None, series_truncation: int | None = None
) -> ProblemSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"not valid JSON: {exc}") from None
    return problem_from_dict(data, degree_bound, series_truncation)


# ---------------------------------------------------------------------------
# exact encoding of values


def encode_poly(p: Poly) -> list[str]:
    return [str(c) for c in p.c]


def decode_poly(v: list[str]) -> Poly:
    return Poly([parse_rational(c) for c in v])


def encode_ratfunc(f: RatFunc) -> dict:
    return {"num": encode_poly(f.num), "den": encode_poly(f.den)}


def decode_ratfunc(v: dict) -> RatFunc:
    return RatFunc(decode_poly(v["num"]), decode_poly(v["den"]))


def encode_diffop(op: DiffOp) -> list[dict]:
    """Coefficients in ascending order of the derivative power."""
    return [encode_ratfunc(c) for c in op.coeffs]


def decode_diffop(v: list[dict]) -> DiffOp:
    return DiffOp([decode_ratfunc(c) for c in v])


def encode_value(obj: Any) -> dict:
    """Tagged exact encoding plus a readable rendering."""
    if isinstance(obj, DiffOp):
        return {"type": "diffop", "value": encode_diffop(obj), "text": format_diffop(obj)}
    if isinstance(obj, Poly):
        return {"type": "poly", "value": encode_poly(obj), "text": format_poly(obj)}
    if isinstance(obj, RatFunc):
        return {"type": "ratfunc", "value": encode_ratfunc(obj), "text": str(obj)}
    if isinstance(obj, TriPoly):
        terms = [[i, j, k, str(c)] for (i, j, k), c in obj.sorted_terms()]
        return {"type": "tripoly", "value": terms, "text": str(obj)}
    if isinstance(obj, (Fraction, int)) and not isinstance(obj, bool):
        return {"type": "rational", "value": str(obj), "text": str(obj)}
    if isinstance(obj, (list, tuple)):
        items = [encode_value(v) for v in obj]
        return {"type": "list", "value": items, "text": "[" + ", ".join(i["text"] for i in items) + "]"}
    if obj is None:
        return {"type": "none", "value": None, "text": "none"}
    return {"type": "text", "value": str(obj), "text": str(obj)}


def decode_value(v: dict) -> Any:
    t = v["type"]
    if t == "diffop":
        return decode_diffop(v["value"])
    if t == "poly":
        return decode_poly(v["value"])
    if t == "ratfunc":
        return decode_ratfunc(v["value"])
    if t == "tripoly":
        return TriPoly({(i, j, k): parse_rational(c) for i, j, k, c in v["value"]})
    if t == "rational":
        return parse_rational(v["value"])
    if t == "list":
        return [decode_value(x) for x in v["value"]]
    if t == "none":
        return None
    return v["value"]


def _in_z(p: Poly) -> dict:
    enc = encode_value(p)
    enc["text"] = format_poly(p, "z")
    return enc


def _cusps(C: CuspDivisor | None) -> list[dict] | None:
    if C is None:
        return None
    return [{"lambda": str(l), "gamma": str(g)} for l, g in C.cusps]


# ---------------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    problem: dict
    mode: str
    results: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(c["passed"] for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def add_check(self, stage: str, name: str, passed: bool, residual: Any) -> None:
        self.checks.append(
            {"stage": stage, "name": name, "passed": bool(passed), "residual": encode_value(residual)}
        )

    def add_identity(self, stage: str, ident: Identity) -> None:
        self.add_check(stage, ident.name, ident.passed, ident.residual)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "problem": self.problem,
            "mode": self.mode,
            "passed": self.passed,
            "results": self.results,
            "checks": self.checks,
            "errors": self.errors,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunReport:
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(data["problem"], data["mode"], data["results"], data["checks"], data["errors"])


def _stage(report: RunReport, name: str, fn: Callable[[], None]) -> bool:
    try:
        fn()
        return True
    except Exception as exc:  # collected, later independent stages still run
        report.errors.append({"stage": name, "message": f"{type(exc).__name__}: {exc}"})
        return False


def _construct(report: RunReport, L0: AiryVacuum, C: CuspDivisor, box: dict) -> None:
    res = build_kbar(L0, C)
    box["result"] = res
    report.results["construct"] = {
        "n": C.n,
        "N": L0.r * C.n,
        "kbar": encode_value(res.kbar),
        "flat_kbar": encode_value(res.flat_kbar),
        "tau": encode_value(res.tau),
        "q": encode_value(res.q),
        "determinant_sign": res.sign,
    }


def _ring(report: RunReport, spec: ProblemSpec, L0: AiryVacuum, C: CuspDivisor, res: KbarResult) -> None:
    stab = stabilizer_closed(C, spec.degree_bound)
    ring = build_ring(L0, C, spec.degree_bound, res)
    report.results["ring"] = {
        "degree_bound": spec.degree_bound,
        "stabilizer_basis": [_in_z(p) for p in stab.basis],
        "generators": [
            {"p": _in_z(p), "order": L.order, "operator": encode_value(L)} for p, L in ring.generators
        ],
        "rank": ring.rank,
    }
    for (i, j), c in ring.commutators().items():
        report.add_check("ring", f"commutator_{i}_{j}_vanishes", not c, c)


def _involute(report: RunReport, L0: AiryVacuum, C: CuspDivisor, res: KbarResult) -> None:
    inv = verify_involution(L0, C, res)
    report.results["involute"] = {
        "status": inv.status,
        "source": _cusps(inv.source),
        "target": _cusps(inv.target),
        "tau": encode_value(inv.tau),
        "q": encode_value(inv.q),
        "message": inv.message,
    }
    for ident in inv.identities:
        report.add_identity("involute", ident)


def _verify(report: RunReport, spec: ProblemSpec, L0: AiryVacuum, C: CuspDivisor, res: KbarResult) -> None:
    for name, residual in structure_residuals(res, L0, C).items():
        report.add_check("structure", name, not residual, residual)

    def oracle() -> None:
        o = kbar_series_oracle(L0, C, spec.series_truncation)
        d = o.difference(res.kbar)
        report.add_check("oracle", "series_wronskian_agrees", not d, d)

    def weyl() -> None:
        d = flat_via_weyl(res.kbar, L0) - res.flat_kbar
        report.add_check("oracle", "flat_via_weyl_agrees", not d, d)

    def stabilizer() -> None:
        d = spec.degree_bound
        g, c = stabilizer_generic(res.kbar, L0.diffop, d), stabilizer_closed(C, d)
        # elements of either basis outside the other span
        outside = [p for p in g.basis if not c.contains(p)] + [p for p in c.basis if not g.contains(p)]
        report.add_check("stabilizer", "generic_equals_closed", g.same_span(c), outside)

    def truerank() -> None:
        _, rem = divide_by_kbar(L0.of(C.q() ** 2), res.kbar)
        report.add_check("truerank", "q2_remainder_zero", not rem, rem)
        for name, d in truerank_residuals(res.kbar, L0, C).items():
            report.add_check("truerank", name, not d, d)

    def symmetry() -> None:
        if report.results.get("involute", {}).get("status") != "computed":
            return
        for ident in eigenfunction_symmetry_check(L0, C).identities:
            report.add_identity("symmetry", ident)

    for name, fn in [
        ("oracle", oracle),
        ("weyl", weyl),
        ("stabilizer", stabilizer),
        ("truerank", truerank),
        ("symmetry", symmetry),
    ]:
        _stage(report, name, fn)


def run_pipeline(spec: ProblemSpec, mode: str) -> RunReport:
    """Stages are cumulative: construct < ring < involute < verify-all."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    report = RunReport(spec.to_dict(), mode)
    L0, C = spec.vacuum(), spec.divisor()
    box: dict = {}
    if not _stage(report, "construct", lambda: _construct(report, L0, C, box)):
        return report
    res = box["result"]
    level = MODES.index(mode)
    if level >= 1:
        _stage(report, "ring", lambda: _ring(report, spec, L0, C, res))
    if level >= 2:
        _stage(report, "involute", lambda: _involute(report, L0, C, res))
    if level >= 3:
        _verify(report, spec, L0, C, res)
    return report


# ---------------------------------------------------------------------------
# output


def emit_report(report: RunReport, fmt: str = "text") -> str:
    if fmt == "structured":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    return _text(report)


def parse_report(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def _text(report: RunReport) -> str:
    p = report.problem
    cusps = ", ".join(f"({c['lambda']}, {c['gamma']})" for c in p["cusps"])
    a = ", ".join(p["a"])
    lines = [
        f"mode: {report.mode}",
        f"vacuum: r = {p['r']}, a = [{a}]",
        f"cusps: {{{cusps}}}",
    ]
    res = report.results
    if "construct" in res:
        c = res["construct"]
        lines += [
            f"n = {c['n']}, N = {c['N']}",
            f"Kbar = {c['kbar']['text']}",
            f"flat Kbar = {c['flat_kbar']['text']}",
            f"tau = {c['tau']['text']}",
            f"q = {c['q']['text']}",
        ]
    if "ring" in res:
        g = res["ring"]
        basis = ", ".join(b["text"] for b in g["stabilizer_basis"])
        lines.append(f"stabilizer basis (degree <= {g['degree_bound']}): {basis}")
        for gen in g["generators"]:
            lines.append(f"L[{gen['p']['text']}] (order {gen['order']}) = {gen['operator']['text']}")
        lines.append(f"rank = {g['rank']}")
    if "involute" in res:
        inv = res["involute"]
        lines.append(f"beta status: {inv['status']}")
        if inv["target"] is not None:
            tgt = ", ".join(f"({c['lambda']}, {c['gamma']})" for c in inv["target"])
            lines.append(f"C^beta = {{{tgt}}}")
        if inv["message"]:
            lines.append(f"note: {inv['message']}")
    for chk in report.checks:
        mark = "PASS" if chk["passed"] else "FAIL"
        line = f"[{mark}] {chk['stage']}: {chk['name']}"
        if not chk["passed"]:
            line += f"  residual: {chk['residual']['text']}"
        lines.append(line)
    for err in report.errors:
        lines.append(f"[ERROR] {err['stage']}: {err['message']}")
    lines.append("result: " + ("pass" if report.passed else "fail"))
    return "\n".join(lines) + "\n"

"""The involution C -> C^beta and the symmetry of the formal eigenfunction."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .airy import CuspDivisor, KbarResult, build_kbar, flat_via_weyl
from .arith import Poly, TriPoly, binomial, lcm
from .operators import AiryVacuum, DiffOp


class OutsideDomainError(ValueError):
    """tau has a repeated root, so beta is not defined."""


def rational_roots(p: Poly) -> tuple[list[Fraction], bool]:
    """Distinct rational roots of p (ascending) and whether p splits over Q
    into linear factors."""
    if p.degree < 0:
        raise ValueError("zero polynomial has no finite root set")
    if p.degree == 0:
        return [], True
    import sympy

    z = sympy.Symbol("z")
    expr = sum(sympy.Rational(c.numerator, c.denominator) * z**k for k, c in enumerate(p.c))
    _, factors = sympy.factor_list(expr, z, domain="QQ")
    roots: list[Fraction] = []
    splits = True
    for f, _ in factors:
        poly = sympy.Poly(f, z)
        if poly.degree() == 1:
            a, b = poly.all_coeffs()
            root = -sympy.Rational(b) / sympy.Rational(a)
            roots.append(Fraction(int(root.p), int(root.q)))
        elif poly.degree() > 1:
            splits = False
    return sorted(roots), splits


def gamma_from_wronskian(kbar: DiffOp, mu) -> Fraction:
    """The gamma for which delta_mu o (d + gamma) annihilates kbar(z, d_z).

    With w the leading coefficient and v the coefficient two below it,
    gamma = (v(mu) - w''(mu)) / w'(mu).
    """
    mu = Fraction(mu)
    m = kbar.order
    if m < 2 or not kbar.has_polynomial_coeffs():
        raise ValueError("need an operator of order >= 2 with polynomial coefficients")
    w = kbar.lead.as_poly()
    v = kbar.coeff(m - 2).as_poly()
    dw = w.derivative()(mu)
    if w(mu) != 0 or dw == 0:
        raise ValueError(f"{mu} is not a simple root of the leading coefficient {w}")
    return (v(mu) - w.derivative(2)(mu)) / dw


def distribution_apply(mu, gamma, Q: DiffOp) -> list[Fraction]:
    """Coefficients e_k with delta_mu o (d + gamma) o Q = sum e_k delta_mu o d^k.

    e_k = a_k'(mu) + gamma a_k(mu) + a_(k-1)(mu) for Q = sum a_k(z) d^k.
    """
    mu, gamma = Fraction(mu), Fraction(gamma)
    if not Q.has_polynomial_coeffs():
        raise ValueError("distribution application needs polynomial coefficients")
    a = [c.as_poly() for c in Q.coeffs]
    out = []
    for k in range(len(a) + 1):
        e = Fraction(0)
        if k < len(a):
            e += a[k].derivative()(mu) + gamma * a[k](mu)
        if k >= 1:
            e += a[k - 1](mu)
        out.append(e)
    return out


def annihilates(mu, gamma, Q: DiffOp) -> bool:
    return not any(distribution_apply(mu, gamma, Q))


@dataclass(frozen=True)
class BetaResult:
    source: CuspDivisor
    target: CuspDivisor | None
    kbar_beta: DiffOp | None
    tau_beta: Poly | None
    status: str  # "computed" or "irrational-roots"
    rational_roots: tuple[Fraction, ...] = ()


def compute_beta(L0: AiryVacuum, C: CuspDivisor, result: KbarResult | None = None) -> BetaResult:
    """C^beta, supported at the roots of tau, when tau splits over Q."""
    if result is None:
        result = build_kbar(L0, C)
    tau = result.tau
    if not tau.is_squarefree():
        raise OutsideDomainError(f"tau = {tau} has a repeated root")
    roots, splits = rational_roots(tau)
    if not splits:
        return BetaResult(C, None, None, None, "irrational-roots", tuple(roots))
    target = CuspDivisor([(mu, gamma_from_wronskian(result.kbar, mu)) for mu in roots])
    beta = build_kbar(L0, target)
    return BetaResult(C, target, beta.kbar, beta.tau, "computed", tuple(roots))


@dataclass(frozen=True)
class Identity:
    """An asserted identity and its exact residual (zero on pass)."""

    name: str
    passed: bool
    residual: object


def root_free_identities(result: KbarResult, L0: AiryVacuum, C: CuspDivisor) -> list[Identity]:
    """lead(flat K-bar) = q and the next coefficient is -q'."""
    fk = result.flat_kbar
    N = L0.r * C.n
    q = C.q()
    lead_res = fk.coeff(N).as_poly() - q if fk.order == N else fk.coeff(N).as_poly()
    sub_res = fk.coeff(N - 1).as_poly() + q.derivative() if N >= 1 else Poly()
    return [
        Identity("flat_lead_is_q", not lead_res, lead_res),
        Identity("flat_subleading_is_minus_q_prime", not sub_res, sub_res),
    ]


@dataclass
class InvolutionReport:
    source: CuspDivisor
    target: CuspDivisor | None
    status: str  # computed | irrational-roots | outside-D0
    tau: Poly
    q: Poly
    identities: list[Identity] = field(default_factory=list)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "computed" and all(i.passed for i in self.identities)

    def identity(self, name: str) -> Identity:
        for i in self.identities:
            if i.name == name:
                return i
        raise KeyError(name)


def verify_involution(
    L0: AiryVacuum, C: CuspDivisor, result: KbarResult | None = None
) -> InvolutionReport:
    """Check tau^beta = q, flat K-bar = K-bar of C^beta and (C^beta)^beta = C.

    Precondition failures are reported through ``status``.
    """
    if result is None:
        result = build_kbar(L0, C)
    report = InvolutionReport(C, None, "computed", result.tau, result.q)
    report.identities.extend(root_free_identities(result, L0, C))
    try:
        beta = compute_beta(L0, C, result)
    except OutsideDomainError as exc:
        report.status, report.message = "outside-D0", str(exc)
        return report
    report.status = beta.status
    if beta.status != "computed":
        report.message = f"tau = {result.tau} does not split over Q"
        return report
    report.target = beta.target
    tau_res = beta.tau_beta - result.q
    flat_res = result.flat_kbar - beta.kbar_beta
    back = compute_beta(L0, beta.target)
    diff = sorted(back.target.as_set() ^ C.as_set()) if back.target else sorted(C.as_set())
    # (mu, gamma, e) for every target cusp whose distribution misses kbar
    leftover = []
    for mu, g in beta.target.cusps:
        e = distribution_apply(mu, g, result.kbar)
        if any(e):
            leftover.append([mu, g, e])
    report.identities.extend(
        [
            Identity("tau_beta_is_q", not tau_res, tau_res),
            Identity("flat_kbar_is_kbar_beta", not flat_res, flat_res),
            Identity("beta_squared_is_identity", not diff, diff),
            Identity("target_annihilates_kbar", not leftover, leftover),
        ]
    )
    return report


# ---------------------------------------------------------------------------
# formal eigenfunction


def _shifted(p: Poly) -> TriPoly:
    """p(x + z) as a polynomial in x and z."""
    terms: dict = {}
    for k, c in enumerate(p.c):
        if not c:
            continue
        for i in range(k + 1):
            key = (i, k - i, 0)
            terms[key] = terms.get(key, 0) + c * binomial(k, i)
    return TriPoly(terms)


def _derivative_table(L0: AiryVacuum, top: int) -> list[list[Poly]]:
    """P[j][k](u) with f^(j) = sum_{k<r} P[j][k](u) f^(k)(u) on ker L0."""
    r = L0.r
    rhs = L0.kernel_recurrence_rhs()
    u = Poly.x()
    table = [[Poly.const(1) if k == j else Poly() for k in range(r)] for j in range(min(top, r - 1) + 1)]
    while len(table) <= top:
        prev = table[-1]
        nxt = [p.derivative() for p in prev]
        for k in range(r - 1):
            nxt[k + 1] = nxt[k + 1] + prev[k]
        # f^(r) = u f + sum a_i f^(i)
        carry = prev[r - 1]
        nxt[0] = nxt[0] + carry * u
        for i in range(1, r - 1):
            if rhs[i]:
                nxt[i] = nxt[i] + carry * rhs[i]
        table.append(nxt)
    return table


@dataclass(frozen=True)
class FormalEigenfunction:
    """f_C(x, z) = (1/q(z)) K f(x + z), kept symbolic; f is a generic kernel
    element of the vacuum."""

    K: DiffOp
    q: Poly
    vacuum: AiryVacuum

    @classmethod
    def from_result(cls, L0: AiryVacuum, C: CuspDivisor, kbar: DiffOp | None = None) -> FormalEigenfunction:
        kbar = build_kbar(L0, C).kbar if kbar is None else kbar
        return cls(kbar.left_scale(kbar.lead.inverse()), C.q(), L0)

    def reduced(self) -> tuple[Poly, Poly, list[TriPoly]]:
        """(d(x), q(z), [H_0..H_{r-1}]) with
        f_C = sum_k H_k(x, z) f^(k)(x + z) / (d(x) q(z))."""
        d = Poly.const(1)
        for c in self.K.coeffs:
            d = lcm(d, c.den)
        table = _derivative_table(self.vacuum, self.K.order)
        H = [TriPoly() for _ in range(self.vacuum.r)]
        for j, c in enumerate(self.K.coeffs):
            if not c:
                continue
            cj = TriPoly.from_poly((c * d).as_poly())
            for k, p in enumerate(table[j]):
                if p:
                    H[k] = H[k] + cj * _shifted(p)
        return d, self.q, H


def _in_z(p: Poly) -> TriPoly:
    return TriPoly.from_poly(p).swap_xz()


def symmetry_residuals(f: FormalEigenfunction, g: FormalEigenfunction) -> list[TriPoly]:
    """Residuals of f(x, z) = g(z, x), one per f^(k), cross-multiplied."""
    df, qf, Hf = f.reduced()
    dg, qg, Hg = g.reduced()
    left_scale = _in_z(dg) * TriPoly.from_poly(qg)
    right_scale = TriPoly.from_poly(df) * _in_z(qf)
    return [a * left_scale - b.swap_xz() * right_scale for a, b in zip(Hf, Hg)]


@dataclass
class SymmetryReport:
    identities: list[Identity]
    implication: str

    @property
    def passed(self) -> bool:
        return bool(self.identities) and all(i.passed for i in self.identities)


def eigenfunction_symmetry_check(
    L0: AiryVacuum, C: CuspDivisor, kbar: DiffOp | None = None
) -> SymmetryReport:
    """f_C(x, z) = f_{C^beta}(z, x).

    The symmetry follows from flat K-bar = K-bar of C^beta and tau^beta = q.
    Both are checked, with flat taken in the Weyl algebra from ``kbar`` so an
    altered kbar propagates, and the symmetry is also checked directly on the
    reduced eigenfunctions.
    """
    base = build_kbar(L0, C)
    kbar = base.kbar if kbar is None else kbar
    implication = "flat K-bar = K-bar^beta and tau^beta = q imply f_C(x,z) = f_C^beta(z,x)"
    tau = kbar.lead.as_poly()
    if not tau.is_squarefree():
        return SymmetryReport([Identity("precondition", False, f"tau = {tau} has a repeated root")], implication)
    roots, splits = rational_roots(tau)
    if not splits:
        return SymmetryReport([Identity("precondition", False, f"tau = {tau} does not split over Q")], implication)
    try:
        target = CuspDivisor([(mu, gamma_from_wronskian(kbar, mu)) for mu in roots])
    except ValueError as exc:
        return SymmetryReport([Identity("precondition", False, str(exc))], implication)
    beta = build_kbar(L0, target)
    flat_res = flat_via_weyl(kbar, L0) - beta.kbar
    tau_res = beta.tau - C.q()
    sym = symmetry_residuals(
        FormalEigenfunction.from_result(L0, C, kbar), FormalEigenfunction.from_result(L0, target)
    )
    bad = [[k, res] for k, res in enumerate(sym) if res]
    return SymmetryReport(
        [
            Identity("flat_kbar_is_kbar_beta", not flat_res, flat_res),
            Identity("tau_beta_is_q", not tau_res, tau_res),
            Identity("eigenfunction_symmetric", not bad, bad),
        ],
        implication,
    )

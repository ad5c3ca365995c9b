"""Construction of the Wronskian operator K-bar for a cusp divisor over a
generalized Airy vacuum, its flat image, and a power-series oracle."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Iterable, Sequence

from .arith import (
    Poly,
    PolyMatrix,
    TriPoly,
    det_fraction_free,
    parse_rational,
)
from .operators import AiryVacuum, DiffOp, diffop_to_weyl, flat, weyl_to_diffop


class ConstructionError(RuntimeError):
    """An identity that holds by construction failed; indicates a bug."""


@dataclass(frozen=True)
class CuspDivisor:
    """Span of the distributions delta_{lambda_i} o (d/dz + gamma_i)."""

    cusps: tuple[tuple[Fraction, Fraction], ...]

    def __init__(self, cusps: Iterable[tuple]):
        parsed = tuple((parse_rational(l), parse_rational(g)) for l, g in cusps)
        lams = [l for l, _ in parsed]
        if len(set(lams)) != len(lams):
            raise ValueError("duplicate lambda: cusp points must be distinct")
        object.__setattr__(self, "cusps", parsed)

    @property
    def n(self) -> int:
        return len(self.cusps)

    @property
    def lambdas(self) -> list[Fraction]:
        return [l for l, _ in self.cusps]

    @property
    def gammas(self) -> list[Fraction]:
        return [g for _, g in self.cusps]

    def N(self, r: int) -> int:
        return r * self.n

    def q(self) -> Poly:
        """q(z) = prod (z - lambda_i)."""
        return Poly.from_roots(self.lambdas)

    def vandermonde(self) -> Fraction:
        """prod_{i<j} (lambda_i - lambda_j)."""
        out = Fraction(1)
        lams = self.lambdas
        for i in range(len(lams)):
            for j in range(i + 1, len(lams)):
                out *= lams[i] - lams[j]
        return out

    def as_set(self) -> frozenset:
        return frozenset(self.cusps)

    def sorted(self) -> CuspDivisor:
        return CuspDivisor(sorted(self.cusps))

    def __str__(self) -> str:
        return "{" + ", ".join(f"({l}, {g})" for l, g in self.cusps) + "}"


@dataclass(frozen=True)
class KbarResult:
    kbar: DiffOp
    tau: Poly
    q: Poly
    flat_kbar: DiffOp
    tripoly: TriPoly
    sign: int

    @property
    def order(self) -> int:
        return self.kbar.order

    def K(self) -> DiffOp:
        """Monic operator with the same kernel, (1/tau) K-bar."""
        from .operators import normalize_monic

        return normalize_monic(self.kbar)


def _alpha(lam: Fraction, gam: Fraction, k: int) -> Fraction:
    """gamma lambda^k + k lambda^(k-1): c(z^k f) = alpha f(x+lam) + lam^k f'(x+lam)."""
    return gam * lam**k + (k * lam ** (k - 1) if k else 0)


def _companion_block(L0: AiryVacuum, lam: Fraction, gam: Fraction, k: int) -> list[list[TriPoly]]:
    """alpha I + lam^k B(x + lam) as an r x r block of TriPolys."""
    r = L0.r
    alpha = _alpha(lam, gam, k)
    scale = lam**k
    block = [[TriPoly() for _ in range(r)] for _ in range(r)]
    for l in range(r):
        block[l][l] = TriPoly.const(alpha)
    for l in range(r - 1):
        block[l][l + 1] = block[l][l + 1] + TriPoly.const(scale)
    # last row of B(x): (x, a_1, ..., a_{r-2}, 0)
    block[r - 1][0] = block[r - 1][0] + TriPoly({(1, 0, 0): scale, (0, 0, 0): scale * lam})
    for s in range(1, r - 1):
        block[r - 1][s] = block[r - 1][s] + TriPoly.const(scale * L0.coefficient_a(s))
    return block


def build_bordered_matrix(L0: AiryVacuum, C: CuspDivisor) -> PolyMatrix:
    """(N+1) x (N+1) matrix whose determinant gives K-bar.

    Column block i belongs to cusp i; row block k holds
    alpha_ik I + lambda_i^k B(x + lambda_i). Row N is the bottom row
    (alpha_in, lambda_i^n, 0, ...). The last column carries z^j xi^l at row
    m = r j + l, standing for the operator D^l L0^j.
    """
    r, n = L0.r, C.n
    N = r * n
    rows = [[TriPoly() for _ in range(N + 1)] for _ in range(N + 1)]
    for i, (lam, gam) in enumerate(C.cusps):
        for k in range(n):
            block = _companion_block(L0, lam, gam, k)
            for a in range(r):
                for b in range(r):
                    rows[r * k + a][r * i + b] = block[a][b]
        rows[N][r * i] = TriPoly.const(_alpha(lam, gam, n))
        rows[N][r * i + 1] = TriPoly.const(lam**n)
    for m in range(N + 1):
        j, l = divmod(m, r)
        rows[m][N] = TriPoly.monomial(0, j, l)
    return PolyMatrix(rows)


def substitute(D: TriPoly, L0: AiryVacuum) -> DiffOp:
    """Replace x^i z^j xi^l by x^i D^l L0^j."""
    out = DiffOp()
    for (j, l), p in sorted(D.group_zxi().items()):
        out = out + L0.P(L0.r * j + l).left_scale(p)
    return out


def build_kbar(L0: AiryVacuum, C: CuspDivisor, det_method: str = "auto") -> KbarResult:
    """K-bar with polynomial coefficients and monic leading coefficient tau.

    The raw determinant is divided by the x^n coefficient of its z^n part,
    which equals +-prod_{i<j}(lambda_i - lambda_j)^r.
    """
    r, n = L0.r, C.n
    if n == 0:
        one = DiffOp.mult(1)
        return KbarResult(one, Poly.const(1), Poly.const(1), one, TriPoly.const(1), 1)
    M = build_bordered_matrix(L0, C)
    raw = det_fraction_free(M, method=det_method)
    corner = raw.group_zxi().get((n, 0), Poly())
    if corner.degree != n:
        raise ConstructionError(f"corner cofactor has degree {corner.degree}, expected {n}")
    expected = C.vandermonde() ** r
    lead = corner.lead
    if abs(lead) != abs(expected):
        raise ConstructionError(f"leading coefficient {lead} is not +-{expected}")
    sign = 1 if lead == expected else -1
    D = raw * (1 / lead)
    kbar = substitute(D, L0)
    flat_kbar = substitute(D.swap_xz(), L0)
    tau = kbar.lead.as_poly()
    return KbarResult(kbar, tau, C.q(), flat_kbar, D, sign)


def flat_kbar(result: KbarResult, L0: AiryVacuum) -> DiffOp:
    """Flat image of K-bar from the stored determinant (swap x and z, then
    substitute)."""
    return substitute(result.tripoly.swap_xz(), L0)


def flat_via_weyl(kbar: DiffOp, L0: AiryVacuum) -> DiffOp:
    """Flat image computed in the Weyl algebra, independent of the determinant."""
    return weyl_to_diffop(flat(diffop_to_weyl(kbar), L0))


# ---------------------------------------------------------------------------
# power-series oracle


@dataclass(frozen=True)
class SeriesBasis:
    """Truncated Taylor series at 0 of a basis of ker(L0 - shift).

    ``series[j][k]`` is the x^k coefficient of f_j, exact for k <= order;
    f_j^(i)(0) = delta_ij.
    """

    order: int
    shift: Fraction
    series: tuple[tuple[Fraction, ...], ...]


def kernel_series_basis(L0: AiryVacuum, M: int, shift: Fraction | int = 0) -> SeriesBasis:
    """Solve f^(r) = (x + shift) f + sum a_i f^(i) by coefficient recurrence.

    With ``shift = lambda`` the solutions are the translates f(x + lambda) of
    kernel elements of L0.
    """
    r = L0.r
    if M < r:
        raise ValueError(f"truncation {M} is below the operator order {r}")
    shift = Fraction(shift)
    a = L0.kernel_recurrence_rhs()
    basis = []
    for j in range(r):
        c = [Fraction(0)] * (M + 1)
        c[j] = Fraction(1, factorial(j))
        for k in range(0, M + 1 - r):
            # coefficient of x^k in f^(r) equals that of (x+shift) f + sum a_i f^(i)
            rhs = shift * c[k] + (c[k - 1] if k else 0)
            for i in range(1, r - 1):
                if a[i]:
                    rhs += a[i] * c[k + i] * factorial(k + i) / factorial(k)
            c[k + r] = rhs * factorial(k) / factorial(k + r)
        basis.append(tuple(c))
    return SeriesBasis(M, shift, tuple(basis))


def _series_derivative(s: Sequence[Fraction]) -> list[Fraction]:
    return [s[k] * k for k in range(1, len(s))]


def _series_mul(a: Sequence[Fraction], b: Sequence[Fraction], prec: int) -> list[Fraction]:
    out = [Fraction(0)] * prec
    for i, ai in enumerate(a[:prec]):
        if ai:
            for j in range(min(len(b), prec - i)):
                if b[j]:
                    out[i + j] += ai * b[j]
    return out


def _series_inverse(a: Sequence[Fraction], prec: int) -> list[Fraction]:
    inv = [Fraction(0)] * prec
    inv[0] = 1 / a[0]
    for k in range(1, prec):
        s = sum((a[i] * inv[k - i] for i in range(1, min(k, len(a) - 1) + 1)), Fraction(0))
        inv[k] = -s * inv[0]
    return inv


def _valuation(s: Sequence[Fraction]) -> int | None:
    return next((k for k, v in enumerate(s) if v), None)


def series_det(rows: list[list[list[Fraction]]], prec: int) -> list[Fraction]:
    """Determinant over Q[x]/(x^prec) by elimination with minimal-valuation
    pivots; independent of the polynomial Bareiss path."""
    m = [[list(e[:prec]) + [Fraction(0)] * (prec - len(e[:prec])) for e in r] for r in rows]
    n = len(m)
    det = [Fraction(1)] + [Fraction(0)] * (prec - 1)
    for k in range(n):
        best = None
        for i in range(k, n):
            for j in range(k, n):
                v = _valuation(m[i][j])
                if v is not None and (best is None or v < best[0]):
                    best = (v, i, j)
        if best is None:
            return [Fraction(0)] * prec
        v, pi, pj = best
        if pi != k:
            m[k], m[pi] = m[pi], m[k]
            det = [-c for c in det]
        if pj != k:
            for row in m:
                row[k], row[pj] = row[pj], row[k]
            det = [-c for c in det]
        piv = m[k][k]
        det = _series_mul(det, piv, prec)
        unit_inv = _series_inverse(piv[v:], prec)
        for i in range(k + 1, n):
            e = m[i][k]
            ve = _valuation(e)
            if ve is None:
                continue
            # factor = e / piv = x^(ve - v) * (e >> ve) / (piv >> v)
            f = _series_mul(e[ve:], unit_inv, prec)
            f = [Fraction(0)] * (ve - v) + f[: prec - (ve - v)]
            for j in range(k, n):
                prod = _series_mul(f, m[k][j], prec)
                m[i][j] = [a - b for a, b in zip(m[i][j], prod)]
    return det


@dataclass(frozen=True)
class OracleKbar:
    """K-bar coefficients from truncated series; exact up to x^exact_degree."""

    kbar: DiffOp
    exact_degree: int

    def difference(self, kbar: DiffOp) -> DiffOp:
        """kbar minus the oracle, coefficients truncated at the exact degree."""
        width = max(kbar.order, self.kbar.order) + 1
        return DiffOp(
            [kbar.coeff(k).as_poly().truncate(self.exact_degree) - self.kbar.coeff(k).as_poly() for k in range(width)]
        )

    def agrees_with(self, kbar: DiffOp) -> bool:
        return not self.difference(kbar)


def kbar_series_oracle(L0: AiryVacuum, C: CuspDivisor, M: int) -> OracleKbar:
    """Wronskian of phi_ij = gamma_i g_ij + g_ij' with g_ij a unit-Wronskian
    series basis of ker(L0 - lambda_i), normalized like build_kbar."""
    r, n = L0.r, C.n
    N = r * n
    if M < N + 2:
        raise ValueError(f"series truncation {M} too small; need at least N + 2 = {N + 2}")
    exact = M - N - 1  # phi^(N) is exact through x^(M-1-N)
    prec = exact + 1
    phis: list[list[Fraction]] = []
    for lam, gam in C.cusps:
        basis = kernel_series_basis(L0, M, shift=lam)
        for g in basis.series:
            dg = _series_derivative(g)
            phis.append([gam * g[k] + dg[k] for k in range(M)])
    # derivative table: derivs[s][m] = phi_s^(m)
    derivs = []
    for phi in phis:
        row = [phi]
        for _ in range(N):
            row.append(_series_derivative(row[-1]))
        derivs.append([d[:prec] for d in row])
    coeffs: list[Poly] = []
    for m in range(N + 1):
        minor = [[derivs[s][row] for s in range(N)] for row in range(N + 1) if row != m]
        d = series_det(minor, prec) if N else [Fraction(1)] + [Fraction(0)] * (prec - 1)
        sgn = 1 if (m + N) % 2 == 0 else -1
        coeffs.append(Poly([sgn * c for c in d]))
    vand_r = C.vandermonde() ** r
    lead_x_n = coeffs[N].coeff(n)
    if exact < n or abs(lead_x_n) != abs(vand_r):
        raise ConstructionError(
            f"series oracle leading coefficient {lead_x_n} is not +-{vand_r} "
            f"(exact through degree {exact})"
        )
    norm = 1 / lead_x_n
    return OracleKbar(DiffOp([c * norm for c in coeffs]), exact)


def flat_expansion(result: KbarResult) -> dict[tuple[int, int], Poly]:
    """The polynomials K_ij with flat(K-bar) = sum x^i D^j K_ij(L0)."""
    return result.tripoly.group_zxi()


def flat_expansion_violations(result: KbarResult, n: int) -> list[tuple[int, int]]:
    """Keys (i, j) breaking deg K_i0 <= n, deg K_ij < n for j > 0."""
    return sorted(
        (i, j)
        for (i, j), p in flat_expansion(result).items()
        if p.degree > n or (j > 0 and p.degree >= n)
    )


def flat_expansion_degrees_ok(result: KbarResult, n: int) -> bool:
    return not flat_expansion_violations(result, n)


def structure_residuals(result: KbarResult, L0: AiryVacuum, C: CuspDivisor) -> dict[str, object]:
    """Structural facts about K-bar and its flat image, each as an exact
    residual that is zero (or empty) exactly when the fact holds."""
    N, n = L0.r * C.n, C.n
    kbar, fk, tau = result.kbar, result.flat_kbar, result.tau
    low = tau.truncate(n - 1) if n > 0 else Poly()
    sub = kbar.coeff(N - 1) + tau.derivative() if N > 0 else Poly()
    return {
        "order_is_N": kbar.order - N,
        "polynomial_coefficients": [k for k, c in enumerate(kbar.coeffs) if c.den.degree > 0],
        "tau_monic_degree_n": tau - Poly.monomial(n) - low,
        "tau_is_leading_coefficient": kbar.lead - tau,
        "flat_order_is_N": fk.order - N,
        "flat_expansion_degrees": flat_expansion_violations(result, n),
        "subleading_is_minus_tau_prime": sub,
    }


def check_structure(result: KbarResult, L0: AiryVacuum, C: CuspDivisor) -> dict[str, bool]:
    return {k: not v for k, v in structure_residuals(result, L0, C).items()}

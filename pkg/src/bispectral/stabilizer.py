"""Stabilizer rings and the commutative ring obtained by Darboux conjugation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

from .airy import ConstructionError, CuspDivisor, KbarResult, build_kbar
from .arith import Poly, RatFunc, lcm, matrix_rank, solve_linear
from .operators import (
    AiryVacuum,
    DiffOp,
    LocalizedOp,
    clear_denominators,
    localized_commutator,
    right_pseudo_divide,
)


class NotInStabilizerError(ValueError):
    """p(L0) is not carried into the left ideal generated by K."""


@dataclass(frozen=True)
class StabilizerBasis:
    """Basis of the polynomials of degree <= degree_bound in a stabilizer ring.

    Each basis element is monic and the degrees are distinct.
    """

    degree_bound: int
    basis: tuple[Poly, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def degrees(self) -> list[int]:
        return [p.degree for p in self.basis]

    def _matrix(self, polys: Sequence[Poly]) -> list[list[Fraction]]:
        return [[p.coeff(k) for k in range(self.degree_bound + 1)] for p in polys]

    def contains(self, p: Poly) -> bool:
        if p.degree > self.degree_bound:
            return False
        base = self._matrix(self.basis)
        return matrix_rank(base + self._matrix([p]), self.degree_bound + 1) == len(base)

    def same_span(self, other: StabilizerBasis) -> bool:
        if self.degree_bound != other.degree_bound or self.dimension != other.dimension:
            return False
        return all(self.contains(p) for p in other.basis)


def _basis_from_nullspace(vectors) -> tuple[Poly, ...]:
    polys = [Poly(v) for v in vectors]
    return tuple(sorted(polys, key=lambda p: p.degree))


def stabilizer_closed(C: CuspDivisor, d: int) -> StabilizerBasis:
    """Polynomials p with deg p <= d and p'(lambda_i) = 0 for every cusp."""
    if d < 0:
        raise ValueError("degree bound must be non-negative")
    rows = [
        [Fraction(k) * lam ** (k - 1) if k else Fraction(0) for k in range(d + 1)]
        for lam in C.lambdas
    ]
    sol = solve_linear(rows, None, d + 1) if rows else None
    if sol is None:
        vectors = [[1 if k == j else 0 for k in range(d + 1)] for j in range(d + 1)]
    else:
        vectors = sol.nullspace
    return StabilizerBasis(d, _basis_from_nullspace(vectors))


def _pseudo_remainders(T: DiffOp, L: DiffOp, d: int) -> list[tuple[Poly, DiffOp]]:
    """For k = 0..d return (m_k, R_k) with rem(T L^k, T) = R_k / m_k and R_k
    polynomial. Uses left-linearity of the remainder: rem(f A, T) = f rem(A, T)."""
    _, Tp = clear_denominators(T)
    lead = Tp.lead.num
    out = []
    TLk = T
    for k in range(d + 1):
        if k:
            TLk = TLk * L
        den, A = clear_denominators(TLk)
        e, _, R = right_pseudo_divide(A, Tp)
        out.append((den * lead**e, R))
    return out


def stabilizer_generic(T: DiffOp, L: DiffOp, d: int) -> StabilizerBasis:
    """Polynomials p of degree <= d with T p(L) in the left ideal D T.

    Membership is decided by the remainder of T p(L) on right division by T,
    which is linear in the coefficients of p.
    """
    if not T or not L:
        raise ValueError("T and L must be nonzero")
    if d < 0:
        raise ValueError("degree bound must be non-negative")
    pieces = _pseudo_remainders(T, L, d)
    common = Poly.const(1)
    for m, _ in pieces:
        common = lcm(common, m)
    scaled = [R.left_scale((common // m.monic()) * (1 / m.lead)) for m, R in pieces]
    rows: list[list[Fraction]] = []
    width = max((R.order for R in scaled), default=-1) + 1
    for i in range(width):
        nums = [R.coeff(i).num for R in scaled]
        top = max(p.degree for p in nums)
        for power in range(top + 1):
            row = [p.coeff(power) for p in nums]
            if any(row):
                rows.append(row)
    if not rows:
        vectors = [[1 if k == j else 0 for k in range(d + 1)] for j in range(d + 1)]
    else:
        vectors = solve_linear(rows, None, d + 1).nullspace
    return StabilizerBasis(d, _basis_from_nullspace(vectors))


def divide_by_kbar(A: DiffOp, kbar: DiffOp) -> tuple[DiffOp, DiffOp]:
    """True (Q, R) of A on right division by the polynomial operator kbar,
    computed through pseudo-division. R is also the remainder on division by
    the monic K, since both generate the same left ideal."""
    den, Ap = clear_denominators(A)
    e, Q, R = right_pseudo_divide(Ap, kbar)
    scale = RatFunc(1, den * kbar.lead.num**e)
    return Q.left_scale(scale), R.left_scale(scale)


def _darboux_localized(kbar: DiffOp, L0: AiryVacuum, p: Poly) -> LocalizedOp:
    e, Q, R = right_pseudo_divide(kbar * L0.of(p), kbar)
    if R:
        raise NotInStabilizerError(f"{p} is not in the stabilizer: remainder {R}")
    tau = kbar.lead.num
    return LocalizedOp.over_power(Q * DiffOp.mult(tau), tau, e + 1)


def darboux_conjugate(kbar: DiffOp, L0: AiryVacuum, p: Poly) -> DiffOp:
    """L_p = K p(L0) K^(-1), the exact right quotient of K p(L0) by K.

    With K = kbar / tau and tau^e kbar p(L0) = Q kbar this is
    tau^(-e-1) Q tau.
    """
    return _darboux_localized(kbar, L0, p).to_diffop()


@dataclass(frozen=True)
class BispectralRing:
    vacuum: AiryVacuum
    divisor: CuspDivisor
    kbar: DiffOp
    generators: tuple[tuple[Poly, DiffOp], ...]
    localized: tuple[LocalizedOp, ...] = field(default=(), compare=False, repr=False)

    def orders(self) -> list[int]:
        return [L.order for _, L in self.generators]

    @property
    def rank(self) -> int:
        """gcd of generator orders (0 for the trivial ring)."""
        g = 0
        for o in self.orders():
            g = gcd(g, o)
        return g

    def commutators(self) -> dict[tuple[int, int], DiffOp]:
        """Pairwise commutators, composed with coefficients over powers of tau."""
        loc = list(self.localized)
        if len(loc) != len(self.generators):
            tau = self.kbar.lead.as_poly()
            loc = [LocalizedOp.from_diffop(L, tau) for _, L in self.generators]
        out = {}
        for i in range(len(loc)):
            for j in range(i + 1, len(loc)):
                out[(i, j)] = localized_commutator(loc[i], loc[j]).to_diffop()
        return out

    def commutative(self) -> bool:
        return all(not c for c in self.commutators().values())


def build_ring(
    L0: AiryVacuum,
    C: CuspDivisor,
    d: int | None = None,
    result: KbarResult | None = None,
) -> BispectralRing:
    """Darboux-conjugated generators L_p for the stabilizer basis elements of
    degree >= 2 (default degree bound 2n + 2)."""
    if d is None:
        d = 2 * C.n + 2
    if result is None:
        result = build_kbar(L0, C)
    stab = stabilizer_closed(C, d)
    ps = [p for p in stab.basis if p.degree >= 2]
    loc = tuple(_darboux_localized(result.kbar, L0, p) for p in ps)
    gens = tuple((p, L.to_diffop()) for p, L in zip(ps, loc))
    return BispectralRing(L0, C, result.kbar, gens, loc)


def _truerank_localized(kbar: DiffOp, L0: AiryVacuum, C: CuspDivisor) -> LocalizedOp:
    e, Q, R = right_pseudo_divide(L0.of(C.q() ** 2), kbar)
    if R:
        raise ConstructionError(f"q^2(L0) is not a left multiple of K: remainder {R}")
    # tau^e q^2(L0) = Q kbar, so q^2(L0) = (tau^(-e) Q tau) K
    tau = kbar.lead.num
    return LocalizedOp.over_power(Q * DiffOp.mult(tau), tau, e)


def truerank_witness(kbar: DiffOp, L0: AiryVacuum, C: CuspDivisor) -> DiffOp:
    """Q with q(L0)^2 = Q K, certifying that q^2(L0) lies in D K."""
    return _truerank_localized(kbar, L0, C).to_diffop()


def truerank_residuals(kbar: DiffOp, L0: AiryVacuum, C: CuspDivisor) -> dict[str, DiffOp]:
    """Residuals of Q K = q^2(L0), K Q = L_(q^2) and K q^2(L0) = L_(q^2) K,
    all composed over powers of tau. Each is zero when the identity holds."""
    tau = kbar.lead.num
    q2 = C.q() ** 2
    Q = _truerank_localized(kbar, L0, C)
    K = LocalizedOp.over_power(kbar, tau, 1)
    Lq2 = _darboux_localized(kbar, L0, q2)
    Mq2 = LocalizedOp.over_power(L0.of(q2), tau, 0)
    return {
        "Q_K_is_q2": (Q * K - Mq2).to_diffop(),
        "K_Q_is_L_q2": (K * Q - Lq2).to_diffop(),
        "K_q2_is_L_q2_K": (K * Mq2 - Lq2 * K).to_diffop(),
    }

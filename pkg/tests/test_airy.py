from __future__ import annotations

from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bispectral.airy import (
    CuspDivisor,
    build_bordered_matrix,
    build_kbar,
    check_structure,
    flat_expansion,
    flat_kbar,
    flat_via_weyl,
    kbar_series_oracle,
    kernel_series_basis,
)
from bispectral.arith import Poly, TriPoly, det_fraction_free
from bispectral.operators import AiryVacuum, DiffOp
from closed_forms import flat_kbar_r2, flat_kbar_r3, kbar_r2, kbar_r3
from conftest import cusp_lists, rationals, vacua

x = TriPoly.monomial(1, 0, 0)
z = TriPoly.monomial(0, 1, 0)
xi = TriPoly.monomial(0, 0, 1)


def c(v) -> TriPoly:
    return TriPoly.const(v)


def apply_to_series(op: DiffOp, s: list[Fraction], exact: int) -> list[Fraction]:
    """op applied to a truncated series, kept through x^exact."""
    out = [Fraction(0)] * (exact + 1)
    d = list(s)
    for k in range(op.order + 1):
        if k:
            d = [i * d[i] for i in range(1, len(d))]
        coeff = op.coeff(k).as_poly()
        for i, ci in enumerate(coeff.c):
            for j in range(exact + 1 - i):
                if j < len(d):
                    out[i + j] += ci * d[j]
    return out


# -- the bordered matrix -----------------------------------------------------


@given(rationals(), rationals())
def test_bordered_matrix_rank_two(lam, g):
    M = build_bordered_matrix(AiryVacuum(2), CuspDivisor([(lam, g)]))
    expected = [
        [c(g), c(1), c(1)],
        [x + c(lam), c(g), xi],
        [c(1 + g * lam), c(lam), z],
    ]
    assert [list(r) for r in M.entries] == expected
    expected_det = -xi + c(g + g * g * lam - lam * lam) - x * c(lam) - z * c(g * g - lam) + x * z
    assert det_fraction_free(M) == -expected_det


@given(rationals(3, 2), rationals(), rationals())
def test_bordered_matrix_rank_three(a, lam, g):
    M = build_bordered_matrix(AiryVacuum(3, [a]), CuspDivisor([(lam, g)]))
    expected = [
        [c(g), c(1), c(0), c(1)],
        [c(0), c(g), c(1), xi],
        [x + c(lam), c(a), c(g), xi * xi],
        [c(1 + g * lam), c(lam), c(0), z],
    ]
    assert [list(r) for r in M.entries] == expected
    expected_det = (
        c(a - g**2 + a * g * lam - g**3 * lam - lam**2)
        - x * c(lam)
        + xi * c(g)
        - xi * xi
        - z * c(a * g)
        + z * c(g**3)
        + z * c(lam)
        + x * z
    )
    assert det_fraction_free(M) == expected_det


@given(vacua(3), cusp_lists(1, 2))
def test_determinant_methods_agree(L, cusps):
    M = build_bordered_matrix(L, CuspDivisor(cusps))
    assert det_fraction_free(M, "bareiss") == det_fraction_free(M, "cofactor")


# -- closed forms ------------------------------------------------------------


@given(rationals(), rationals())
def test_rank_two_one_cusp_closed_forms(lam, g):
    res = build_kbar(AiryVacuum(2), CuspDivisor([(lam, g)]))
    assert res.kbar == kbar_r2(lam, g)
    assert res.flat_kbar == flat_kbar_r2(lam, g)
    assert res.tau == Poly([lam - g * g, 1])


@given(rationals(3, 2), rationals(), rationals())
def test_rank_three_one_cusp_closed_forms(a, lam, g):
    res = build_kbar(AiryVacuum(3, [a]), CuspDivisor([(lam, g)]))
    assert res.kbar == kbar_r3(a, lam, g)
    assert res.flat_kbar == flat_kbar_r3(a, lam, g)


# -- structure ---------------------------------------------------------------


@given(vacua(), cusp_lists(1, 2))
def test_structure_of_kbar(L, cusps):
    C = CuspDivisor(cusps)
    res = build_kbar(L, C)
    checks = check_structure(res, L, C)
    assert all(checks.values()), checks
    assert res.q == Poly.from_roots(C.lambdas)


@given(vacua(), cusp_lists(1, 2))
def test_flat_routes_agree(L, cusps):
    res = build_kbar(L, CuspDivisor(cusps))
    assert flat_via_weyl(res.kbar, L) == res.flat_kbar
    assert flat_kbar(res, L) == res.flat_kbar


@given(vacua(3), cusp_lists(2, 3), st.randoms())
def test_cusp_order_does_not_matter(L, cusps, rnd):
    shuffled = list(cusps)
    rnd.shuffle(shuffled)
    assert build_kbar(L, CuspDivisor(cusps)).kbar == build_kbar(L, CuspDivisor(shuffled)).kbar


def test_flat_expansion_degree_bounds():
    # flat Kbar = sum x^i D^j K_ij(L0) with deg K_i0 <= n, deg K_ij < n for j > 0
    L, C = AiryVacuum(2), CuspDivisor([(0, 1)])
    K = flat_expansion(build_kbar(L, C))
    assert K[(1, 0)] == Poly([-1, 1])
    assert K[(0, 0)] == Poly.const(1)
    assert K[(0, 1)] == Poly.const(-1)


def test_flat_coefficients_themselves_can_exceed_n():
    # for r = 2, n = 1 the D^0 coefficient of flat Kbar is quadratic in x
    res = build_kbar(AiryVacuum(2), CuspDivisor([(0, 1)]))
    assert res.flat_kbar.coeff(0).as_poly().degree == 2


def test_empty_divisor_is_vacuous():
    res = build_kbar(AiryVacuum(3, [1]), CuspDivisor([]))
    assert res.kbar == DiffOp.mult(1)
    assert res.tau == Poly.const(1) and res.q == Poly.const(1)


def test_duplicate_lambda_rejected():
    with pytest.raises(ValueError, match="duplicate lambda"):
        CuspDivisor([(0, 1), (0, 2)])


# -- the series oracle -------------------------------------------------------


@given(vacua(), rationals())
def test_series_basis_solves_shifted_equation(L, lam):
    M = 14
    basis = kernel_series_basis(L, M, shift=lam)
    op = L.diffop - DiffOp.mult(lam)
    for j, s in enumerate(basis.series):
        assert all(v == 0 for v in apply_to_series(op, list(s), M - L.r))
        # unit Wronskian normalization: f_j^(i)(0) = delta_ij
        for i in range(L.r):
            assert s[i] * factorial(i) == (1 if i == j else 0)


@given(vacua(), cusp_lists(1, 2))
def test_kbar_annihilates_cusp_functions(L, cusps):
    C = CuspDivisor(cusps)
    kbar = build_kbar(L, C).kbar
    M = L.r * C.n + 12
    exact = M - L.r * C.n - 1
    for lam, g in C.cusps:
        for s in kernel_series_basis(L, M, shift=lam).series:
            phi = [g * s[k] + (k + 1) * s[k + 1] for k in range(M)]
            assert all(v == 0 for v in apply_to_series(kbar, phi, exact))


@given(vacua(), cusp_lists(1, 2))
def test_series_oracle_agrees(L, cusps):
    C = CuspDivisor(cusps)
    oracle = kbar_series_oracle(L, C, L.r * C.n + 10)
    assert oracle.agrees_with(build_kbar(L, C).kbar)


def test_series_oracle_detects_a_difference():
    L, C = AiryVacuum(2), CuspDivisor([(1, 2)])
    oracle = kbar_series_oracle(L, C, 12)
    wrong = build_kbar(L, C).kbar + DiffOp([Poly([0, 0, 1])])
    assert not oracle.agrees_with(wrong)


def test_series_oracle_needs_enough_terms():
    with pytest.raises(ValueError):
        kbar_series_oracle(AiryVacuum(2), CuspDivisor([(0, 1)]), 3)

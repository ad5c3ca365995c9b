"""Ordinary differential operators over Q(x), the Weyl algebra, and the
flat anti-automorphism attached to a generalized Airy operator."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb, gcd, lcm
from typing import Iterable, Sequence

from .arith import (
    Poly,
    RatFunc,
    Scalar,
    _ip2_mul,
    _ip_add,
    _ip_deriv,
    _ip_divmod,
    _ip_mul,
    format_rational,
    parse_rational,
)

_RF_ZERO = RatFunc(0)
_RF_ONE = RatFunc(1)
_POLY_ONE = Poly.const(1)


def _to_ratfunc(c) -> RatFunc:
    if isinstance(c, RatFunc):
        return c
    if isinstance(c, Poly):
        return RatFunc.poly(c)
    return RatFunc(Fraction(c))


class DiffOp:
    """Operator sum a_i(x) D^i with coefficients in Q(x).

    ``coeffs[i]`` is the coefficient of D^i; the zero operator has no
    coefficients. Multiplication is composition.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [_to_ratfunc(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs = tuple(cs)

    @classmethod
    def _raw(cls, coeffs: list) -> DiffOp:
        while coeffs and not coeffs[-1]:
            coeffs.pop()
        op = object.__new__(cls)
        op.coeffs = tuple(coeffs)
        return op

    @classmethod
    def D(cls, k: int = 1) -> DiffOp:
        return cls._raw([_RF_ZERO] * k + [_RF_ONE])

    @classmethod
    def mult(cls, f) -> DiffOp:
        """Multiplication by the function ``f``."""
        return cls._raw([_to_ratfunc(f)])

    @classmethod
    def x(cls) -> DiffOp:
        return cls.mult(Poly.x())

    @property
    def order(self) -> int:
        """Order; -1 for the zero operator."""
        return len(self.coeffs) - 1

    @property
    def lead(self) -> RatFunc:
        return self.coeffs[-1] if self.coeffs else _RF_ZERO

    def coeff(self, i: int) -> RatFunc:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else _RF_ZERO

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def has_polynomial_coeffs(self) -> bool:
        return all(c.is_polynomial() for c in self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, DiffOp):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction, Poly, RatFunc)):
            return self.coeffs == DiffOp.mult(other).coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __neg__(self) -> DiffOp:
        return DiffOp._raw([-c for c in self.coeffs])

    def __add__(self, other) -> DiffOp:
        if not isinstance(other, DiffOp):
            if isinstance(other, (int, Fraction, Poly, RatFunc)):
                other = DiffOp.mult(other)
            else:
                return NotImplemented
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = out[i] + c
        return DiffOp._raw(out)

    __radd__ = __add__

    def __sub__(self, other) -> DiffOp:
        if not isinstance(other, DiffOp):
            if isinstance(other, (int, Fraction, Poly, RatFunc)):
                other = DiffOp.mult(other)
            else:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> DiffOp:
        return (-self) + other

    def left_scale(self, f) -> DiffOp:
        """``f * self`` with f a function (no derivatives taken)."""
        f = _to_ratfunc(f)
        if not f:
            return DiffOp()
        return DiffOp._raw([f * c for c in self.coeffs])

    def __mul__(self, other) -> DiffOp:
        if isinstance(other, (int, Fraction)):
            return DiffOp._raw([c * other for c in self.coeffs]) if other else DiffOp()
        if isinstance(other, (Poly, RatFunc)):
            other = DiffOp.mult(other)
        if not isinstance(other, DiffOp):
            return NotImplemented
        return op_mul(self, other)

    def __rmul__(self, other) -> DiffOp:
        if isinstance(other, (int, Fraction, Poly, RatFunc)):
            return self.left_scale(other)
        return NotImplemented

    def __pow__(self, k: int) -> DiffOp:
        if k < 0:
            raise ValueError("negative operator power")
        out, base = DiffOp.mult(1), self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __call__(self, f):
        """Apply the operator to a function given as Poly or RatFunc."""
        f = _to_ratfunc(f)
        acc = _RF_ZERO
        deriv = f
        for i, c in enumerate(self.coeffs):
            if i:
                deriv = deriv.derivative()
            if c:
                acc = acc + c * deriv
        return acc

    def __repr__(self) -> str:
        return f"DiffOp({list(self.coeffs)!r})"

    def __str__(self) -> str:
        return format_diffop(self)


def format_diffop(op: DiffOp, var: str = "x", dsym: str = "D") -> str:
    """Descending 'coefficient*D^k' notation."""
    from .arith import format_poly

    if not op.coeffs:
        return "0"
    parts = []
    for k in range(op.order, -1, -1):
        c = op.coeffs[k]
        if not c:
            continue
        dpart = "" if k == 0 else dsym if k == 1 else f"{dsym}^{k}"
        if c.is_polynomial():
            p = c.num
            if p.is_const():
                a = p.lead
                if k and abs(a) == 1:
                    body, neg = dpart, a < 0
                else:
                    body = format_rational(abs(a)) + (f"*{dpart}" if dpart else "")
                    neg = a < 0
            else:
                body = f"({format_poly(p, var)})" + (f"*{dpart}" if dpart else "")
                neg = False
        else:
            body = f"({format_poly(c.num, var)})/({format_poly(c.den, var)})"
            body += f"*{dpart}" if dpart else ""
            neg = False
        if not parts:
            parts.append(f"-{body}" if neg else body)
        else:
            parts.append(f"{'-' if neg else '+'} {body}")
    return " ".join(parts)


def _derivative_table(coeffs: Sequence[RatFunc], depth: int) -> list[list[RatFunc]]:
    table = []
    for c in coeffs:
        row = [c]
        for _ in range(depth):
            row.append(row[-1].derivative() if row[-1] else _RF_ZERO)
        table.append(row)
    return table


def op_mul(A: DiffOp, B: DiffOp) -> DiffOp:
    """Composition A o B using D f = f D + f'."""
    if not A.coeffs or not B.coeffs:
        return DiffOp()
    oa, ob = A.order, B.order
    derivs = _derivative_table(B.coeffs, oa)
    out = [_RF_ZERO] * (oa + ob + 1)
    for i, a in enumerate(A.coeffs):
        if not a:
            continue
        for t in range(i + 1):
            binom = comb(i, t)
            for j in range(ob + 1):
                b = derivs[j][t]
                if b:
                    out[i - t + j] = out[i - t + j] + a * (b * binom)
    return DiffOp._raw(out)


def right_divide(A: DiffOp, B: DiffOp) -> tuple[DiffOp, DiffOp]:
    """Return (Q, R) with A = Q o B + R and order(R) < order(B)."""
    if not B.coeffs:
        raise ZeroDivisionError("right division by the zero operator")
    ob = B.order
    rem = list(A.coeffs)
    while rem and not rem[-1]:
        rem.pop()
    if len(rem) - 1 < ob:
        return DiffOp(), DiffOp._raw(rem)
    qdeg = len(rem) - 1 - ob
    derivs = _derivative_table(B.coeffs, qdeg)
    inv_lead = B.lead.inverse()
    quo = [_RF_ZERO] * (qdeg + 1)
    for top in range(len(rem) - 1, ob - 1, -1):
        lc = rem[top]
        if not lc:
            continue
        s = top - ob
        t_coef = lc * inv_lead
        quo[s] = t_coef
        # subtract (t_coef D^s) o B
        for t in range(s + 1):
            binom = comb(s, t)
            for j in range(ob + 1):
                b = derivs[j][t]
                if b:
                    idx = s - t + j
                    rem[idx] = rem[idx] - t_coef * (b * binom)
        rem[top] = _RF_ZERO
    return DiffOp._raw(quo), DiffOp._raw(rem[:ob])


def clear_denominators(A: DiffOp) -> tuple[Poly, DiffOp]:
    """Return (d, d*A) with d the monic lcm of the coefficient denominators."""
    from .arith import lcm

    d = Poly.const(1)
    for c in A.coeffs:
        if c.den.degree > 0:
            d = lcm(d, c.den)
    if d.is_one():
        return d, A
    return d, A.left_scale(d)


def right_pseudo_divide(A: DiffOp, B: DiffOp) -> tuple[int, DiffOp, DiffOp]:
    """Pseudo-division for polynomial-coefficient operators.

    Returns (e, Q, R) with b^e A = Q o B + R, b = lead(B), order(R) < order(B),
    all coefficients polynomial. Then R / b^e is the true remainder and
    Q / b^e the true quotient.
    """
    if not B.coeffs:
        raise ZeroDivisionError("right division by the zero operator")
    if not (A.has_polynomial_coeffs() and B.has_polynomial_coeffs()):
        raise ValueError("pseudo-division needs polynomial coefficients")
    b = [c.num for c in B.coeffs]
    ob = len(b) - 1
    lead = b[-1]
    rem = [c.num for c in A.coeffs]
    if len(rem) - 1 < ob:
        return 0, DiffOp(), A
    qdeg = len(rem) - 1 - ob
    derivs = []
    for c in b:
        row = [c]
        for _ in range(qdeg):
            row.append(row[-1].derivative())
        derivs.append(row)
    quo = [Poly() for _ in range(qdeg + 1)]
    e = 0
    for top in range(len(rem) - 1, ob - 1, -1):
        a = rem[top]
        if not a:
            continue
        s = top - ob
        e += 1
        rem = [lead * c for c in rem[:top]]
        quo = [lead * c for c in quo]
        quo[s] = quo[s] + a
        for t in range(s + 1):
            binom = comb(s, t)
            for j in range(ob + 1):
                d = derivs[j][t]
                if d:
                    idx = s - t + j
                    if idx < top:
                        rem[idx] = rem[idx] - a * d * binom
    return e, DiffOp(quo), DiffOp(rem[:ob])


def normalize_monic(A: DiffOp) -> DiffOp:
    """(1/leading coefficient) * A."""
    if not A.coeffs:
        raise ValueError("cannot normalize the zero operator")
    inv = A.lead.inverse()
    return DiffOp._raw([inv * c for c in A.coeffs[:-1]] + [_RF_ONE])


def commutator(A: DiffOp, B: DiffOp) -> DiffOp:
    return A * B - B * A


def poly_of_op(p: Poly, L: DiffOp) -> DiffOp:
    """p(L) by Horner's rule."""
    acc = DiffOp()
    for c in reversed(p.c):
        acc = acc * L + DiffOp.mult(c) if acc else DiffOp.mult(c)
    return acc


def _poly_op_mul(A: Sequence[Poly], B: Sequence[Poly]) -> list[Poly]:
    """op_mul for operators given as lists of polynomial coefficients."""
    if not A or not B:
        return []
    oa, ob = len(A) - 1, len(B) - 1
    derivs = []
    for b in B:
        row = [b]
        for _ in range(oa):
            row.append(row[-1].derivative())
        derivs.append(row)
    out = [Poly()] * (oa + ob + 1)
    for i, a in enumerate(A):
        if not a:
            continue
        for t in range(i + 1):
            binom = comb(i, t)
            for j in range(ob + 1):
                b = derivs[j][t]
                if b:
                    out[i - t + j] = out[i - t + j] + a * b * binom
    return out


def _ip_from_polys(polys: Sequence[Poly]) -> tuple[Fraction, list[list[int]]]:
    """(s, P) with polys[i] = s * P[i] and P[i] integral."""
    den = 1
    for p in polys:
        for v in p.c:
            den = den * v.denominator // gcd(den, v.denominator)
    return Fraction(1, den), [[int(v * den) for v in p.c] for p in polys]


@dataclass(frozen=True)
class LocalizedOp:
    """scale * h^(-k) * P, with h and the coefficients of P integer
    polynomials.

    Used for operators whose denominators are powers of one polynomial h;
    composition then stays in integer polynomial arithmetic.
    """

    h: tuple[int, ...]
    k: int
    scale: Fraction
    P: tuple[tuple[int, ...], ...]

    @classmethod
    def from_diffop(cls, A: DiffOp, h: Poly) -> LocalizedOp:
        _, (hi,) = _ip_from_polys([h])
        hq = Poly(hi)
        k = 0
        for c in A.coeffs:
            j, hj = 0, _POLY_ONE
            while hj % c.den:
                if j > c.den.degree:
                    raise ValueError(f"denominator {c.den} does not divide a power of {h}")
                j, hj = j + 1, hj * hq
            k = max(k, j)
        hk = hq**k
        scale, P = _ip_from_polys([c.num * (hk // c.den) for c in A.coeffs])
        return cls(tuple(hi), k, scale, tuple(tuple(p) for p in P))

    @classmethod
    def over_power(cls, A: DiffOp, h: Poly, k: int) -> LocalizedOp:
        """h^(-k) A for A with polynomial coefficients."""
        c, (hi,) = _ip_from_polys([h])
        scale, P = _ip_from_polys([a.as_poly() for a in A.coeffs])
        return cls(tuple(hi), k, scale / c**k, tuple(tuple(p) for p in P))

    def to_diffop(self) -> DiffOp:
        h = list(self.h)
        hq = Poly(h)
        coeffs = []
        for p in self.P:
            p, j = list(p), self.k
            while j > 0 and p:
                part = _ip_divmod(p, h)
                if part is None or part[1]:
                    break
                p, j = part[0], j - 1
            num = Poly(p) * self.scale
            if j == 0 or not p:
                coeffs.append(RatFunc.poly(num))
            elif num.gcd(hq).degree == 0:
                den = hq**j
                inv = 1 / den.lead
                coeffs.append(RatFunc._raw(num * inv, den * inv))
            else:
                coeffs.append(RatFunc(num, hq**j))
        return DiffOp(coeffs)

    def __bool__(self) -> bool:
        return any(self.P)

    def __sub__(self, other: LocalizedOp) -> LocalizedOp:
        k = max(self.k, other.k)
        h = list(self.h)
        sa, sb = self.scale, other.scale
        g = Fraction(gcd(sa.numerator, sb.numerator), lcm(sa.denominator, sb.denominator))
        ca, cb = int(sa / g), int(sb / g)

        def lifted(op: LocalizedOp) -> list[list[int]]:
            f = [1]
            for _ in range(k - op.k):
                f = _ip_mul(f, h)
            return [_ip_mul(list(p), f) for p in op.P]

        a, b = lifted(self), lifted(other)
        width = max(len(a), len(b))
        a += [[]] * (width - len(a))
        b += [[]] * (width - len(b))
        diff = [_ip_add([ca * v for v in x], y, -cb) for x, y in zip(a, b)]
        while diff and not diff[-1]:
            diff.pop()
        return LocalizedOp(self.h, k, g, tuple(tuple(p) for p in diff))

    def __mul__(self, other: LocalizedOp) -> LocalizedOp:
        h = list(self.h)
        if not self or not other:
            return LocalizedOp(self.h, 0, Fraction(1), ())
        b, m = other.k, len(self.P) - 1
        # d^t h^(-b) = h^(-b-t) s_t with s_0 = 1, s_(t+1) = s_t' h - (b + t) h' s_t
        dh = _ip_deriv(h)
        s = [[1]]
        for t in range(m):
            s.append(_ip_add(_ip_mul(_ip_deriv(s[t]), h), _ip_mul(dh, s[t]), -(b + t)))
        hp = [[1]]
        for _ in range(m):
            hp.append(_ip_mul(hp[-1], h))
        # P o h^(-b) = h^(-b-m) Pt, and Pt o other.P; both Leibniz sums are
        # grouped by t into products of bivariate polynomials in (x, D)
        P = [list(p) for p in self.P]
        Pt: list[list[int]] = [[] for _ in range(m + 1)]
        for t in range(m + 1):
            At = [[comb(j, t) * v for v in P[j]] for j in range(t, m + 1)]
            for i, row in enumerate(_ip2_mul(At, [_ip_mul(s[t], hp[m - t])])):
                Pt[i] = _ip_add(Pt[i], row)
        B = [list(c) for c in other.P]
        ob = len(B) - 1
        out: list[list[int]] = [[] for _ in range(m + ob + 1)]
        Bt = B
        for t in range(m + 1):
            if t:
                Bt = [_ip_deriv(c) for c in Bt]
            At = [[comb(i, t) * v for v in Pt[i]] for i in range(t, m + 1)]
            for i, row in enumerate(_ip2_mul(At, Bt)):
                out[i] = _ip_add(out[i], row)
        while out and not out[-1]:
            out.pop()
        return LocalizedOp(self.h, self.k + b + m, self.scale * other.scale, tuple(tuple(p) for p in out))


def localized_commutator(A: LocalizedOp, B: LocalizedOp) -> LocalizedOp:
    return A * B - B * A


# ---------------------------------------------------------------------------
# Weyl algebra


class WeylOp:
    """Normal-ordered element sum c[i,j] x^i D^j of the Weyl algebra."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int], Scalar] | None = None):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v}

    @classmethod
    def _raw(cls, terms: dict) -> WeylOp:
        w = object.__new__(cls)
        w.terms = terms
        return w

    @classmethod
    def x(cls) -> WeylOp:
        return cls({(1, 0): 1})

    @classmethod
    def D(cls) -> WeylOp:
        return cls({(0, 1): 1})

    @classmethod
    def const(cls, c: Scalar) -> WeylOp:
        return cls({(0, 0): c})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, WeylOp):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    @property
    def order(self) -> int:
        return max((j for _, j in self.terms), default=-1)

    @property
    def x_degree(self) -> int:
        return max((i for i, _ in self.terms), default=-1)

    def __neg__(self) -> WeylOp:
        return WeylOp._raw({k: -v for k, v in self.terms.items()})

    def __add__(self, other) -> WeylOp:
        if isinstance(other, (int, Fraction)):
            other = WeylOp.const(other)
        if not isinstance(other, WeylOp):
            return NotImplemented
        out = dict(self.terms)
        for k, v in other.terms.items():
            s = out.get(k, 0) + v
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return WeylOp._raw(out)

    __radd__ = __add__

    def __sub__(self, other) -> WeylOp:
        if isinstance(other, (int, Fraction)):
            other = WeylOp.const(other)
        return self + (-other)

    def __mul__(self, other) -> WeylOp:
        if isinstance(other, (int, Fraction)):
            return WeylOp._raw({k: v * other for k, v in self.terms.items()}) if other else WeylOp()
        if not isinstance(other, WeylOp):
            return NotImplemented
        out: dict = {}
        # x^a D^b x^c D^d = sum_k C(b,k) c!/(c-k)! x^(a+c-k) D^(b+d-k)
        for (a, b), v1 in self.terms.items():
            for (c, d), v2 in other.terms.items():
                falling = 1
                for k in range(min(b, c) + 1):
                    if k:
                        falling *= c - k + 1
                    key = (a + c - k, b + d - k)
                    out[key] = out.get(key, 0) + v1 * v2 * comb(b, k) * falling
        return WeylOp._raw({k: v for k, v in out.items() if v})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> WeylOp:
        out, base = WeylOp.const(1), self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def sorted_terms(self) -> list[tuple[tuple[int, int], Fraction]]:
        return sorted(self.terms.items())

    def __repr__(self) -> str:
        return f"WeylOp({ {k: format_rational(v) for k, v in self.sorted_terms()} })"

    def __str__(self) -> str:
        return str(weyl_to_diffop(self))


def weyl_to_diffop(T: WeylOp) -> DiffOp:
    order = T.order
    if order < 0:
        return DiffOp()
    cols: list[dict[int, Fraction]] = [{} for _ in range(order + 1)]
    for (i, j), v in T.terms.items():
        cols[j][i] = v
    coeffs = []
    for col in cols:
        if not col:
            coeffs.append(Poly())
            continue
        c = [Fraction(0)] * (max(col) + 1)
        for i, v in col.items():
            c[i] = v
        coeffs.append(Poly(c))
    return DiffOp(coeffs)


def diffop_to_weyl(A: DiffOp) -> WeylOp:
    terms = {}
    for j, c in enumerate(A.coeffs):
        if not c.is_polynomial():
            raise ValueError(f"coefficient of D^{j} is not a polynomial: {c}")
        for i, v in enumerate(c.num.c):
            if v:
                terms[(i, j)] = v
    return WeylOp._raw(terms)


# ---------------------------------------------------------------------------
# generalized Airy vacuum


@dataclass(frozen=True)
class AiryVacuum:
    """L0 = D^r - a_{r-2} D^{r-2} - ... - a_1 D - x.

    ``a`` holds (a_1, ..., a_{r-2}); there is no D^{r-1} term.
    """

    r: int
    a: tuple[Fraction, ...] = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 2:
            raise ValueError(f"order r must be an integer >= 2, got {self.r!r}")
        a = tuple(parse_rational(v) for v in self.a)
        if len(a) != self.r - 2:
            raise ValueError(f"expected {self.r - 2} constants a_1..a_(r-2), got {len(a)}")
        object.__setattr__(self, "a", a)

    def coefficient_a(self, i: int) -> Fraction:
        """a_i for 1 <= i <= r-2."""
        return self.a[i - 1]

    @cached_property
    def diffop(self) -> DiffOp:
        coeffs: list = [Poly([0, -1])]
        for i in range(1, self.r):
            coeffs.append(Poly.const(-self.a[i - 1]) if i <= self.r - 2 else Poly())
        coeffs.append(Poly.const(1))
        return DiffOp(coeffs)

    @cached_property
    def weyl(self) -> WeylOp:
        return diffop_to_weyl(self.diffop)

    def power(self, k: int) -> DiffOp:
        key = ("pow", k)
        if key not in self._cache:
            self._cache[key] = DiffOp.mult(1) if k == 0 else self.power(k - 1) * self.diffop
        return self._cache[key]

    def weyl_power(self, k: int) -> WeylOp:
        key = ("wpow", k)
        if key not in self._cache:
            self._cache[key] = WeylOp.const(1) if k == 0 else self.weyl_power(k - 1) * self.weyl
        return self._cache[key]

    def P(self, m: int) -> DiffOp:
        """Modified Wronskian row operator D^l L0^k, m = r k + l."""
        key = ("P", m)
        if key not in self._cache:
            k, l = divmod(m, self.r)
            self._cache[key] = DiffOp.D(l) * self.power(k)
        return self._cache[key]

    def of(self, p: Poly) -> DiffOp:
        """p(L0)."""
        acc = DiffOp()
        for k, c in enumerate(p.c):
            if c:
                acc = acc + self.power(k) * c
        return acc

    def kernel_recurrence_rhs(self) -> list[Fraction]:
        """Constants in f^(r) = x f + sum_i a_i f^(i)."""
        return [Fraction(0)] + list(self.a) + [Fraction(0)]

    def describe(self) -> str:
        return str(self.diffop)


def flat(T: WeylOp, L0: AiryVacuum) -> WeylOp:
    """Anti-automorphism with x -> L0 and D -> D: x^i D^j -> D^j L0^i."""
    out = WeylOp()
    Dw = WeylOp.D()
    for (i, j), v in T.sorted_terms():
        out = out + (Dw**j) * L0.weyl_power(i) * v
    return out

"""Exact arithmetic: rationals, univariate polynomials, rational functions,
sparse trivariate polynomials and small polynomial matrices.

Rationals are :class:`fractions.Fraction`; everything here is immutable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import comb, gcd
from typing import Callable, Iterable, Sequence, Union

Rational = Fraction
Scalar = Union[int, Fraction]

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)(?:\s*/\s*(\d+))?\s*$")


class ExactDivisionError(ArithmeticError):
    """Raised when an exact division leaves a nonzero remainder."""


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"p"`` or ``"p/q"`` into a Fraction. Decimals are rejected."""
    if isinstance(text, (int, Fraction)) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"malformed rational: {text!r}")
    m = _RATIONAL_RE.match(text)
    if m is None:
        raise ValueError(f"malformed rational: {text!r}")
    num, den = m.group(1), m.group(2)
    if den is not None and int(den) == 0:
        raise ValueError(f"malformed rational (zero denominator): {text!r}")
    return Fraction(int(num), int(den) if den else 1)


def format_rational(q: Scalar) -> str:
    return str(Fraction(q))


_ZERO = Fraction(0)
_ONE = Fraction(1)


def _strip(coeffs: list) -> tuple:
    n = len(coeffs)
    while n and not coeffs[n - 1]:
        n -= 1
    return tuple(coeffs[:n])


class Poly:
    """Dense univariate polynomial over Q, coefficients lowest degree first."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable[Scalar | str] = ()):
        self.c = _strip([c if isinstance(c, Fraction) else parse_rational(c) for c in coeffs])

    @classmethod
    def _raw(cls, coeffs: tuple) -> Poly:
        p = object.__new__(cls)
        p.c = coeffs
        return p

    @classmethod
    def x(cls) -> Poly:
        return cls._raw((_ZERO, _ONE))

    @classmethod
    def const(cls, value: Scalar) -> Poly:
        return cls([value])

    @classmethod
    def monomial(cls, degree: int, coeff: Scalar = 1) -> Poly:
        return cls([0] * degree + [coeff])

    @classmethod
    def from_roots(cls, roots: Iterable[Scalar]) -> Poly:
        out = cls.const(1)
        for root in roots:
            out = out * cls._raw((-Fraction(root), _ONE))
        return out

    # -- basic properties ------------------------------------------------

    @property
    def degree(self) -> int:
        """Degree; the zero polynomial has degree -1."""
        return len(self.c) - 1

    @property
    def lead(self) -> Fraction:
        return self.c[-1] if self.c else _ZERO

    def is_zero(self) -> bool:
        return not self.c

    def is_const(self) -> bool:
        return len(self.c) <= 1

    def is_one(self) -> bool:
        return len(self.c) == 1 and self.c[0] == 1

    def coeff(self, k: int) -> Fraction:
        return self.c[k] if 0 <= k < len(self.c) else _ZERO

    def __bool__(self) -> bool:
        return bool(self.c)

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.c == other.c
        if isinstance(other, (int, Fraction)):
            return self.c == _strip([Fraction(other)])
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.c)

    # -- ring operations -------------------------------------------------

    def __neg__(self) -> Poly:
        return Poly._raw(tuple(-a for a in self.c))

    def __add__(self, other) -> Poly:
        if not isinstance(other, Poly):
            if isinstance(other, (int, Fraction)):
                other = Poly.const(other)
            else:
                return NotImplemented
        a, b = self.c, other.c
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, v in enumerate(b):
            out[i] += v
        return Poly._raw(_strip(out))

    __radd__ = __add__

    def __sub__(self, other) -> Poly:
        if not isinstance(other, Poly):
            if isinstance(other, (int, Fraction)):
                other = Poly.const(other)
            else:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> Poly:
        return (-self) + other

    def __mul__(self, other) -> Poly:
        if isinstance(other, (int, Fraction)):
            if not other:
                return Poly._raw(())
            return Poly._raw(tuple(a * other for a in self.c))
        if not isinstance(other, Poly):
            return NotImplemented
        if not self.c or not other.c:
            return Poly._raw(())
        # convolve integer numerators over common denominators
        a, da = _scaled_ints(self.c)
        b, db = _scaled_ints(other.c)
        out = _ip_mul(a, b)
        d = da * db
        if d == 1:
            return Poly._raw(tuple(Fraction(v) for v in out))
        return Poly._raw(tuple(Fraction(v, d) for v in out))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Poly:
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out, base = Poly.const(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, s: Scalar) -> Poly:
        return self * Fraction(s)

    def derivative(self, times: int = 1) -> Poly:
        c = self.c
        for _ in range(times):
            c = tuple(c[k] * k for k in range(1, len(c)))
        return Poly._raw(_strip(list(c)))

    def __call__(self, value):
        """Evaluate by Horner; ``value`` may be a scalar or anything closed
        under ``*`` and ``+`` with rationals (e.g. a Poly, giving composition)."""
        if isinstance(value, (int, Fraction)):
            acc = _ZERO
            for a in reversed(self.c):
                acc = acc * value + a
            return acc
        acc = None
        for a in reversed(self.c):
            acc = a if acc is None else acc * value + a
        return _ZERO if acc is None else acc

    def shift(self, s: Scalar) -> Poly:
        """Return p(x + s)."""
        return self(Poly._raw((Fraction(s), _ONE))) if self.degree > 0 else self

    def truncate(self, degree: int) -> Poly:
        return Poly._raw(_strip(list(self.c[: degree + 1])))

    def monic(self) -> Poly:
        if not self.c:
            return self
        inv = 1 / self.c[-1]
        return Poly._raw(tuple(a * inv for a in self.c))

    # -- division ----------------------------------------------------------

    def divmod(self, other: Poly) -> tuple[Poly, Poly]:
        if not other.c:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.c)
        db = len(other.c) - 1
        if len(rem) - 1 < db:
            return Poly._raw(()), self
        inv = 1 / other.c[-1]
        quo = [_ZERO] * (len(rem) - db)
        for k in range(len(rem) - 1, db - 1, -1):
            t = rem[k] * inv
            if t:
                quo[k - db] = t
                for j, bj in enumerate(other.c):
                    rem[k - db + j] -= t * bj
        return Poly._raw(_strip(quo)), Poly._raw(_strip(rem[:db]))

    def __floordiv__(self, other: Poly) -> Poly:
        return self.divmod(other)[0]

    def __mod__(self, other: Poly) -> Poly:
        return self.divmod(other)[1]

    def exact_div(self, other) -> Poly:
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("polynomial division by zero")
            return self * (1 / Fraction(other))
        q, r = self.divmod(other)
        if r:
            raise ExactDivisionError(f"{other} does not divide {self}")
        return q

    def gcd(self, other: Poly) -> Poly:
        """Monic gcd (zero if both are zero), by a primitive remainder
        sequence over the integers."""
        if not self.c:
            return other.monic()
        if not other.c:
            return self.monic()
        if len(self.c) == 1 or len(other.c) == 1:
            return _POLY_ONE
        a, b = _primitive(self.c), _primitive(other.c)
        if len(a) < len(b):
            a, b = b, a
        while len(b) > 1:
            r = _pseudo_rem(a, b)
            if not r:
                return Poly._raw(tuple(Fraction(v, b[-1]) for v in b))
            a, b = b, _primitive(r)
        return _POLY_ONE

    def is_squarefree(self) -> bool:
        return self.gcd(self.derivative()).degree <= 0

    # -- printing ----------------------------------------------------------

    def __repr__(self) -> str:
        return f"Poly({[format_rational(a) for a in self.c]})"

    def __str__(self) -> str:
        return format_poly(self, "x")


def format_poly(p: Poly, var: str = "x") -> str:
    if not p.c:
        return "0"
    parts: list[str] = []
    for k in range(len(p.c) - 1, -1, -1):
        a = p.c[k]
        if not a:
            continue
        mag = abs(a)
        if k == 0:
            body = format_rational(mag)
        else:
            mono = var if k == 1 else f"{var}^{k}"
            body = mono if mag == 1 else f"{format_rational(mag)}*{mono}"
        if not parts:
            parts.append(body if a > 0 else f"-{body}")
        else:
            parts.append(f"{'+' if a > 0 else '-'} {body}")
    return " ".join(parts)


# integer polynomials as lists, lowest degree first

try:
    from gmpy2 import mpz as _mpz
except ImportError:  # pragma: no cover
    _mpz = None


def _bigmul(x: int, y: int) -> int:
    if _mpz is not None and x.bit_length() > 20000 and y.bit_length() > 20000:
        return int(_mpz(x) * _mpz(y))
    return x * y


def _ip_strip(a: list[int]) -> list[int]:
    while a and not a[-1]:
        a.pop()
    return a


def _ip_add(a: list[int], b: list[int], cb: int = 1) -> list[int]:
    """a + cb * b."""
    if len(a) < len(b):
        a = a + [0] * (len(b) - len(a))
    else:
        a = list(a)
    for i, v in enumerate(b):
        a[i] += cb * v
    return _ip_strip(a)


def _ip_mul(a: list[int], b: list[int]) -> list[int]:
    if not a or not b:
        return []
    if len(a) > 8 and len(b) > 8:
        return _ip_mul_kronecker(a, b)
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
    return out


def _ip_mul_kronecker(a: list[int], b: list[int]) -> list[int]:
    """Product through one big integer multiplication.

    Coefficients are packed into byte-aligned slots; adding half a slot to
    every coefficient makes the slots non-negative so packing and unpacking
    are plain byte conversions.
    """
    bound = max(map(abs, a)) * max(map(abs, b)) * min(len(a), len(b))
    nbytes = (bound.bit_length() + 2 + 7) // 8
    half = 1 << (8 * nbytes - 1)
    slot = b"\x00" * (nbytes - 1) + b"\x80"

    def pack(c: list[int]) -> int:
        raw = b"".join((v + half).to_bytes(nbytes, "little") for v in c)
        return int.from_bytes(raw, "little") - int.from_bytes(slot * len(c), "little")

    length = len(a) + len(b) - 1
    Z = _bigmul(pack(a), pack(b)) + int.from_bytes(slot * length, "little")
    raw = Z.to_bytes(nbytes * length, "little")
    return [
        int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") - half for i in range(length)
    ]


def _ip2_mul(A: list[list[int]], B: list[list[int]]) -> list[list[int]]:
    """Product of bivariate integer polynomials given as rows of univariate
    ones. Rows are laid end to end with enough room that the univariate
    product of the flattened lists cannot carry between rows."""
    la = max((len(r) for r in A), default=0)
    lb = max((len(r) for r in B), default=0)
    if not la or not lb:
        return []
    w = la + lb - 1
    fa = [0] * (w * len(A))
    fb = [0] * (w * len(B))
    for i, r in enumerate(A):
        fa[i * w : i * w + len(r)] = r
    for j, r in enumerate(B):
        fb[j * w : j * w + len(r)] = r
    flat = _ip_mul(_ip_strip(fa), _ip_strip(fb))
    rows = [_ip_strip(flat[i * w : (i + 1) * w]) for i in range(len(A) + len(B) - 1)]
    return _ip_strip(rows) if rows else rows


def _ip_deriv(a: list[int]) -> list[int]:
    return [i * a[i] for i in range(1, len(a))]


def _ip_divmod(a: list[int], b: list[int]) -> tuple[list[int], list[int]] | None:
    """Quotient and remainder when both are integral, else None."""
    a, lb, db = list(a), b[-1], len(b) - 1
    if len(a) - 1 < db:
        return [], a
    quo = [0] * (len(a) - db)
    for k in range(len(a) - 1, db - 1, -1):
        t, r = divmod(a[k], lb)
        if r:
            return None
        if t:
            quo[k - db] = t
            for j, bj in enumerate(b):
                a[k - db + j] -= t * bj
    return quo, _ip_strip(a[:db])


def _scaled_ints(c) -> tuple[list[int], int]:
    """Integers n_k and d > 0 with c_k = n_k / d."""
    den = 1
    for v in c:
        vd = v.denominator
        if vd != 1 and den % vd:
            den = den * vd // gcd(den, vd)
    if den == 1:
        return [v.numerator for v in c], 1
    return [v.numerator * (den // v.denominator) for v in c], den


def _primitive(c) -> list[int]:
    """Integer primitive part with positive leading coefficient."""
    den = 1
    for v in c:
        den = den * v.denominator // gcd(den, v.denominator)
    ints = [int(v * den) for v in c]
    cont = 0
    for v in ints:
        cont = gcd(cont, v)
        if cont == 1:
            break
    if ints[-1] < 0:
        cont = -cont
    return [v // cont for v in ints]


def _pseudo_rem(a: list[int], b: list[int]) -> list[int]:
    a = list(a)
    lb, db = b[-1], len(b) - 1
    while len(a) - 1 >= db and a:
        la, shift = a[-1], len(a) - 1 - db
        a = [lb * v for v in a]
        for j, bj in enumerate(b):
            a[shift + j] -= la * bj
        while a and a[-1] == 0:
            a.pop()
    return a


class RatFunc:
    """Reduced quotient of polynomials with monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly | Scalar, den: Poly | Scalar = 1):
        if not isinstance(num, Poly):
            num = Poly.const(num)
        if not isinstance(den, Poly):
            den = Poly.const(den)
        if not den:
            raise ZeroDivisionError("rational function with zero denominator")
        if not num:
            self.num, self.den = num, _POLY_ONE
            return
        if den.degree > 0:
            g = num.gcd(den)
            if g.degree > 0:
                num, den = num // g, den // g
        lc = den.lead
        if lc != 1:
            inv = 1 / lc
            num, den = num * inv, den * inv
        self.num, self.den = num, den

    @classmethod
    def _raw(cls, num: Poly, den: Poly) -> RatFunc:
        f = object.__new__(cls)
        f.num, f.den = num, den
        return f

    @classmethod
    def poly(cls, p: Poly) -> RatFunc:
        return cls._raw(p, _POLY_ONE)

    @classmethod
    def x(cls) -> RatFunc:
        return cls._raw(Poly.x(), _POLY_ONE)

    def is_zero(self) -> bool:
        return not self.num

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __bool__(self) -> bool:
        return bool(self.num)

    def __eq__(self, other) -> bool:
        if isinstance(other, RatFunc):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (Poly, int, Fraction)):
            return self.den.degree == 0 and self.num == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    @staticmethod
    def _coerce(other) -> RatFunc | None:
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, Poly):
            return RatFunc._raw(other, _POLY_ONE)
        if isinstance(other, (int, Fraction)):
            return RatFunc._raw(Poly.const(other), _POLY_ONE)
        return None

    def __neg__(self) -> RatFunc:
        return RatFunc._raw(-self.num, self.den)

    def __add__(self, other) -> RatFunc:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not o.num:
            return self
        if not self.num:
            return o
        if self.den == o.den:
            if self.den.degree == 0:
                return RatFunc._raw(self.num + o.num, _POLY_ONE)
            return RatFunc(self.num + o.num, self.den)
        # with g = gcd of the denominators, only g can cancel afterwards
        g = self.den.gcd(o.den)
        if g.degree <= 0:
            num = self.num * o.den + o.num * self.den
            return RatFunc._raw(num, self.den * o.den) if num else _RF_ZERO
        d1, d2 = self.den // g, o.den // g
        num = self.num * d2 + o.num * d1
        if not num:
            return _RF_ZERO
        h = num.gcd(g)
        if h.degree > 0:
            num, g = num // h, g // h
        return RatFunc._raw(num, d1 * d2 * g)

    __radd__ = __add__

    def __sub__(self, other) -> RatFunc:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other) -> RatFunc:
        return (-self) + other

    def __mul__(self, other) -> RatFunc:
        if isinstance(other, (int, Fraction)):
            if not other:
                return _RF_ZERO
            return RatFunc._raw(self.num * other, self.den)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not self.num or not o.num:
            return _RF_ZERO
        if self.den.degree == 0 and o.den.degree == 0:
            return RatFunc._raw(self.num * o.num, _POLY_ONE)
        # cross-cancel before multiplying
        g1 = self.num.gcd(o.den) if o.den.degree > 0 else _POLY_ONE
        g2 = o.num.gcd(self.den) if self.den.degree > 0 else _POLY_ONE
        n1 = self.num // g1 if g1.degree > 0 else self.num
        d2 = o.den // g1 if g1.degree > 0 else o.den
        n2 = o.num // g2 if g2.degree > 0 else o.num
        d1 = self.den // g2 if g2.degree > 0 else self.den
        num, den = n1 * n2, d1 * d2
        lc = den.lead
        if lc != 1:
            inv = 1 / lc
            num, den = num * inv, den * inv
        return RatFunc._raw(num, den)

    __rmul__ = __mul__

    def inverse(self) -> RatFunc:
        if not self.num:
            raise ZeroDivisionError("inverse of zero rational function")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other) -> RatFunc:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other) -> RatFunc:
        return self.inverse() * other

    def __pow__(self, k: int) -> RatFunc:
        if k < 0:
            return self.inverse() ** (-k)
        return RatFunc._raw(self.num**k, self.den**k)

    def derivative(self) -> RatFunc:
        if self.den.degree == 0:
            return RatFunc._raw(self.num.derivative(), _POLY_ONE)
        return RatFunc(
            self.num.derivative() * self.den - self.num * self.den.derivative(),
            self.den * self.den,
        )

    def __call__(self, value: Scalar) -> Fraction:
        d = self.den(value)
        if not d:
            raise ZeroDivisionError(f"pole at {value}")
        return self.num(value) / d

    def as_poly(self) -> Poly:
        if self.den.degree > 0:
            raise ValueError(f"not a polynomial: {self}")
        return self.num

    def __repr__(self) -> str:
        return f"RatFunc({self.num!r}, {self.den!r})"

    def __str__(self) -> str:
        if self.den.degree == 0:
            return str(self.num)
        return f"({self.num})/({self.den})"


_POLY_ONE = Poly._raw((_ONE,))
_RF_ZERO = RatFunc._raw(Poly._raw(()), _POLY_ONE)
_RF_ONE = RatFunc._raw(_POLY_ONE, _POLY_ONE)


def lcm(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return Poly()
    return (a * b // a.gcd(b)).monic()


# ---------------------------------------------------------------------------
# trivariate polynomials in x, z, xi


class TriPoly:
    """Sparse polynomial sum c[i,j,k] x^i z^j xi^k over Q."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int, int], Scalar] | None = None):
        self.terms = {
            key: Fraction(v) for key, v in (terms or {}).items() if v
        }

    @classmethod
    def _raw(cls, terms: dict) -> TriPoly:
        t = object.__new__(cls)
        t.terms = terms
        return t

    @classmethod
    def const(cls, c: Scalar) -> TriPoly:
        return cls({(0, 0, 0): c})

    @classmethod
    def monomial(cls, i: int, j: int, k: int, c: Scalar = 1) -> TriPoly:
        return cls({(i, j, k): c})

    @classmethod
    def from_poly(cls, p: Poly) -> TriPoly:
        return cls._raw({(i, 0, 0): a for i, a in enumerate(p.c) if a})

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, TriPoly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == TriPoly.const(other).terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def x_only(self) -> bool:
        return all(j == 0 and k == 0 for (_, j, k) in self.terms)

    def to_poly(self) -> Poly:
        if not self.x_only():
            raise ValueError("TriPoly involves z or xi")
        deg = max((i for i, _, _ in self.terms), default=-1)
        c = [_ZERO] * (deg + 1)
        for (i, _, _), v in self.terms.items():
            c[i] = v
        return Poly._raw(_strip(c))

    def __neg__(self) -> TriPoly:
        return TriPoly._raw({k: -v for k, v in self.terms.items()})

    def __add__(self, other) -> TriPoly:
        if isinstance(other, (int, Fraction)):
            other = TriPoly.const(other)
        if not isinstance(other, TriPoly):
            return NotImplemented
        out = dict(self.terms)
        for key, v in other.terms.items():
            s = out.get(key, _ZERO) + v
            if s:
                out[key] = s
            else:
                out.pop(key, None)
        return TriPoly._raw(out)

    __radd__ = __add__

    def __sub__(self, other) -> TriPoly:
        if isinstance(other, (int, Fraction)):
            other = TriPoly.const(other)
        return self + (-other)

    def __mul__(self, other) -> TriPoly:
        if isinstance(other, (int, Fraction)):
            if not other:
                return TriPoly._raw({})
            return TriPoly._raw({k: v * other for k, v in self.terms.items()})
        if not isinstance(other, TriPoly):
            return NotImplemented
        out: dict = {}
        for (a1, b1, c1), v1 in self.terms.items():
            for (a2, b2, c2), v2 in other.terms.items():
                key = (a1 + a2, b1 + b2, c1 + c2)
                out[key] = out.get(key, _ZERO) + v1 * v2
        return TriPoly._raw({k: v for k, v in out.items() if v})

    __rmul__ = __mul__

    def lead_term(self) -> tuple[tuple[int, int, int], Fraction]:
        """Leading term in lex order with xi > z > x."""
        key = max(self.terms, key=lambda t: (t[2], t[1], t[0]))
        return key, self.terms[key]

    def exact_div(self, other) -> TriPoly:
        """Exact quotient by multivariate long division (lex order)."""
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero")
            return self * (1 / Fraction(other))
        if not other:
            raise ZeroDivisionError("division by zero")
        (li, lj, lk), lc = other.lead_term()
        rem = self
        quo: dict = {}
        while rem:
            (ri, rj, rk), rc = rem.lead_term()
            if ri < li or rj < lj or rk < lk:
                raise ExactDivisionError("TriPoly exact division failed")
            key = (ri - li, rj - lj, rk - lk)
            t = rc / lc
            quo[key] = quo.get(key, _ZERO) + t
            rem = rem - TriPoly._raw({key: t}) * other
        return TriPoly._raw({k: v for k, v in quo.items() if v})

    def swap_xz(self) -> TriPoly:
        return TriPoly._raw({(j, i, k): v for (i, j, k), v in self.terms.items()})

    def group_zxi(self) -> dict[tuple[int, int], Poly]:
        """Collect as sum over (j, k) of poly_jk(x) z^j xi^k."""
        buckets: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (i, j, k), v in self.terms.items():
            buckets.setdefault((j, k), {})[i] = v
        out = {}
        for key, b in buckets.items():
            c = [_ZERO] * (max(b) + 1)
            for i, v in b.items():
                c[i] = v
            out[key] = Poly._raw(_strip(c))
        return out

    def degree(self, var: int) -> int:
        return max((t[var] for t in self.terms), default=-1)

    def sorted_terms(self) -> list[tuple[tuple[int, int, int], Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def __repr__(self) -> str:
        return f"TriPoly({ {k: format_rational(v) for k, v in self.sorted_terms()} })"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (i, j, k), v in sorted(self.terms.items(), key=lambda kv: (-sum(kv[0]), kv[0])):
            mono = "*".join(
                s if e == 1 else f"{s}^{e}"
                for s, e in (("x", i), ("z", j), ("xi", k))
                if e
            )
            mag = abs(v)
            if not mono:
                body = format_rational(mag)
            else:
                body = mono if mag == 1 else f"{format_rational(mag)}*{mono}"
            sign = "-" if v < 0 else "+"
            parts.append(body if not parts and v > 0 else f"{sign} {body}" if parts else f"-{body}")
        return " ".join(parts)


# ---------------------------------------------------------------------------
# matrices and determinants


@dataclass(frozen=True)
class PolyMatrix:
    """Rectangular matrix whose entries are TriPoly (or Poly) values."""

    entries: tuple[tuple, ...]

    def __init__(self, rows: Sequence[Sequence]):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("matrix dimensions must be positive")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("matrix is not rectangular")
        object.__setattr__(self, "entries", rows)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i][j]

    def minor(self, row: int, col: int) -> PolyMatrix:
        return PolyMatrix(
            [r[:col] + r[col + 1 :] for i, r in enumerate(self.entries) if i != row]
        )

    def map(self, fn: Callable) -> PolyMatrix:
        return PolyMatrix([[fn(e) for e in r] for r in self.entries])


def _bareiss(rows: list[list], one) -> object:
    """Fraction-free Gaussian elimination; entries need ``*``, ``-`` and
    ``exact_div``. Returns the determinant."""
    n = len(rows)
    m = [list(r) for r in rows]
    sign = 1
    prev = one
    for k in range(n - 1):
        if not m[k][k]:
            swap = next((i for i in range(k + 1, n) if m[i][k]), None)
            if swap is None:
                return one * 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        piv = m[k][k]
        for i in range(k + 1, n):
            mik = m[i][k]
            row_i, row_k = m[i], m[k]
            for j in range(k + 1, n):
                if mik:
                    val = row_i[j] * piv - mik * row_k[j]
                else:
                    val = row_i[j] * piv
                row_i[j] = val.exact_div(prev) if prev != one else val
            row_i[k] = one * 0
        prev = piv
    det = m[n - 1][n - 1]
    return -det if sign < 0 else det


def _as_tripoly(e) -> TriPoly:
    if isinstance(e, TriPoly):
        return e
    if isinstance(e, Poly):
        return TriPoly.from_poly(e)
    return TriPoly.const(e)


def det_fraction_free(M: PolyMatrix, method: str = "auto") -> TriPoly:
    """Exact determinant over Q[x, z, xi].

    ``method="bareiss"`` runs fraction-free elimination over trivariate
    polynomials. ``method="cofactor"`` expands along the single column that
    holds z/xi entries and evaluates the minors by Bareiss over Q[x]; this is
    what ``"auto"`` picks whenever exactly one such column exists.
    """
    if M.rows != M.cols:
        raise ValueError(f"determinant of non-square {M.rows}x{M.cols} matrix")
    T = M.map(_as_tripoly)
    n = T.rows
    symbolic_cols = [j for j in range(n) if any(not T[i, j].x_only() for i in range(n))]
    if method == "auto":
        method = "cofactor" if len(symbolic_cols) == 1 and n > 1 else "bareiss"
    if method == "bareiss":
        return _bareiss([list(r) for r in T.entries], TriPoly.const(1))
    if method != "cofactor":
        raise ValueError(f"unknown determinant method {method!r}")
    col = symbolic_cols[0] if symbolic_cols else n - 1
    total = TriPoly()
    for i in range(n):
        e = T[i, col]
        if not e:
            continue
        if n == 1:
            minor_det = TriPoly.const(1)
        else:
            sub = T.minor(i, col)
            if all(c.x_only() for r in sub.entries for c in r):
                minor_det = TriPoly.from_poly(
                    _bareiss([[c.to_poly() for c in r] for r in sub.entries], Poly.const(1))
                )
            else:
                minor_det = _bareiss([list(r) for r in sub.entries], TriPoly.const(1))
        if not minor_det:
            continue
        term = minor_det * e
        total = total + (term if (i + col) % 2 == 0 else -term)
    return total


def det_rational(rows: Sequence[Sequence[Scalar]]) -> Fraction:
    """Determinant of a rational matrix by Gaussian elimination."""
    m = [[Fraction(v) for v in r] for r in rows]
    n = len(m)
    det = _ONE
    for k in range(n):
        piv = next((i for i in range(k, n) if m[i][k]), None)
        if piv is None:
            return _ZERO
        if piv != k:
            m[k], m[piv] = m[piv], m[k]
            det = -det
        det *= m[k][k]
        inv = 1 / m[k][k]
        for i in range(k + 1, n):
            f = m[i][k] * inv
            if f:
                for j in range(k, n):
                    m[i][j] -= f * m[k][j]
    return det


# ---------------------------------------------------------------------------
# linear systems over Q


@dataclass(frozen=True)
class LinearSolution:
    """Solution set ``particular + span(nullspace)``; ``particular`` is None
    when the system is inconsistent."""

    particular: tuple[Fraction, ...] | None
    nullspace: tuple[tuple[Fraction, ...], ...]
    rank: int

    @property
    def consistent(self) -> bool:
        return self.particular is not None

    @property
    def unique(self) -> bool:
        return self.consistent and not self.nullspace


def rref(rows: Sequence[Sequence[Scalar]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (rows, pivot columns)."""
    m = [[Fraction(v) for v in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def solve_linear(
    A: Sequence[Sequence[Scalar]], b: Sequence[Scalar] | None = None, ncols: int | None = None
) -> LinearSolution:
    """Solve ``A x = b`` exactly (``b=None`` means homogeneous).

    Nullspace vectors are normalized so the free variable they belong to is
    1, which makes them 'monic' in the highest column they touch.
    """
    rows = [list(r) for r in A]
    if ncols is None:
        if not rows:
            raise ValueError("ncols is required for an empty system")
        ncols = len(rows[0])
    if any(len(r) != ncols for r in rows):
        raise ValueError("dimension mismatch: ragged coefficient matrix")
    if b is None:
        b = [0] * len(rows)
    if len(b) != len(rows):
        raise ValueError(f"dimension mismatch: {len(rows)} equations, {len(b)} right-hand sides")
    aug = [r + [Fraction(v)] for r, v in zip(rows, b)]
    red, pivots = rref(aug, ncols + 1) if aug else ([], [])
    consistent = ncols not in pivots
    pivots = [p for p in pivots if p < ncols]
    free = [c for c in range(ncols) if c not in pivots]
    particular = None
    if consistent:
        x = [_ZERO] * ncols
        for row, p in zip(red, pivots):
            x[p] = row[ncols]
        particular = tuple(x)
    basis = []
    for f in free:
        v = [_ZERO] * ncols
        v[f] = _ONE
        for row, p in zip(red, pivots):
            v[p] = -row[f]
        basis.append(tuple(v))
    return LinearSolution(particular, tuple(basis), len(pivots))


def nullspace(A: Sequence[Sequence[Scalar]], ncols: int) -> list[tuple[Fraction, ...]]:
    return list(solve_linear(A, None, ncols).nullspace)


def matrix_rank(rows: Sequence[Sequence[Scalar]], ncols: int) -> int:
    if not rows:
        return 0
    return len(rref(rows, ncols)[1])


def binomial(n: int, k: int) -> int:
    return comb(n, k)

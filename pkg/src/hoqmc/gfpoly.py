"""Polynomials over a prime field F_b.

Polynomials are immutable and stored in canonical form (no trailing zero
coefficients). The integer encoding maps coefficient ``i`` to base-``b``
digit ``i``, so over F_2 the polynomial x^2 + x + 1 is the integer 7. This
encoding is used in every file format and CLI flag of the package.

Besides the scalar :class:`PolyFb` API there are a few vectorised helpers
operating on integer encodings stored in numpy arrays; point generation and
the CBC search use those.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

__all__ = [
    "PolyFb",
    "poly_mul_mod",
    "is_irreducible",
    "laurent_digits",
    "digits_to_fraction",
    "default_modulus",
    "IRREDUCIBLE_GF2",
    "digitwise_add",
    "digitwise_scale",
    "mulx_mod",
]

# Smallest irreducible polynomial of each degree 1..20 over F_2 (integer encoding).
IRREDUCIBLE_GF2 = {
    1: 2, 2: 7, 3: 11, 4: 19, 5: 37, 6: 67, 7: 131, 8: 283, 9: 515, 10: 1033,
    11: 2053, 12: 4105, 13: 8219, 14: 16417, 15: 32771, 16: 65579,
    17: 131081, 18: 262153, 19: 524327, 20: 1048585,
}


def _check_base(b: int) -> None:
    if b < 2 or any(b % p == 0 for p in range(2, int(b**0.5) + 1)):
        raise ValueError(f"base must be a prime >= 2, got {b}")


@dataclass(frozen=True)
class PolyFb:
    """Polynomial over F_b; ``coeffs[i]`` is the coefficient of x^i."""

    base: int
    coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        _check_base(self.base)
        c = [int(v) for v in self.coeffs]
        if any(v < 0 or v >= self.base for v in c):
            raise ValueError(f"coefficients must lie in [0, {self.base}): {c}")
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_int(cls, value: int, base: int = 2) -> "PolyFb":
        if value < 0:
            raise ValueError("integer encoding must be non-negative")
        digits = []
        while value:
            value, r = divmod(value, base)
            digits.append(r)
        return cls(base, tuple(digits))

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[int], base: int = 2) -> "PolyFb":
        return cls(base, tuple(int(c) % base for c in coeffs))

    def to_int(self) -> int:
        value = 0
        for c in reversed(self.coeffs):
            value = value * self.base + c
        return value

    def __int__(self) -> int:
        return self.to_int()

    @property
    def degree(self) -> float | int:
        """Index of the leading coefficient; ``-inf`` for the zero polynomial."""
        return len(self.coeffs) - 1 if self.coeffs else float("-inf")

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def _same_base(self, other: "PolyFb") -> None:
        if self.base != other.base:
            raise ValueError(f"base mismatch: {self.base} vs {other.base}")

    def __add__(self, other: "PolyFb") -> "PolyFb":
        self._same_base(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        c = other.coeffs + (0,) * (n - len(other.coeffs))
        return PolyFb(self.base, tuple((x + y) % self.base for x, y in zip(a, c)))

    def __neg__(self) -> "PolyFb":
        return PolyFb(self.base, tuple((-x) % self.base for x in self.coeffs))

    def __sub__(self, other: "PolyFb") -> "PolyFb":
        return self + (-other)

    def __mul__(self, other: "PolyFb") -> "PolyFb":
        self._same_base(other)
        if self.is_zero() or other.is_zero():
            return PolyFb(self.base)
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, x in enumerate(self.coeffs):
            if x:
                for j, y in enumerate(other.coeffs):
                    out[i + j] = (out[i + j] + x * y) % self.base
        return PolyFb(self.base, tuple(out))

    def __divmod__(self, other: "PolyFb") -> tuple["PolyFb", "PolyFb"]:
        self._same_base(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        b = self.base
        inv = pow(other.lead, -1, b)
        rem = list(self.coeffs)
        dq = len(other.coeffs) - 1
        quot = [0] * max(len(rem) - dq, 0)
        for k in range(len(rem) - 1, dq - 1, -1):
            t = rem[k] * inv % b
            if t:
                quot[k - dq] = t
                for i, c in enumerate(other.coeffs):
                    rem[k - dq + i] = (rem[k - dq + i] - t * c) % b
        return PolyFb(b, tuple(quot)), PolyFb(b, tuple(rem[:dq]))

    def __mod__(self, other: "PolyFb") -> "PolyFb":
        return divmod(self, other)[1]

    def __floordiv__(self, other: "PolyFb") -> "PolyFb":
        return divmod(self, other)[0]

    def __repr__(self) -> str:
        if not self.coeffs:
            return f"PolyFb(0, b={self.base})"
        terms = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if not c:
                continue
            mono = "1" if i == 0 else ("x" if i == 1 else f"x^{i}")
            terms.append(mono if c == 1 and i else f"{c}" + ("" if i == 0 else "*" + mono))
        return f"PolyFb({' + '.join(terms)}, b={self.base})"


def poly_mul_mod(a: PolyFb, c: PolyFb, P: PolyFb) -> PolyFb:
    """Return ``a * c mod P``."""
    a._same_base(c)
    a._same_base(P)
    if P.is_zero():
        raise ZeroDivisionError("zero modulus")
    if P.degree < 1:
        raise ValueError("modulus must have degree >= 1")
    return (a * c) % P


def _monic_polys(b: int, d: int):
    for low in product(range(b), repeat=d):
        yield PolyFb(b, tuple(low) + (1,))


def is_irreducible(P: PolyFb) -> bool:
    """Trial division by every monic polynomial of degree <= deg(P)/2."""
    if P.is_zero() or P.degree < 1:
        raise ValueError("irreducibility is undefined for constant polynomials")
    if P.base == 2:
        return _is_irreducible_gf2(P.to_int())
    for d in range(1, P.degree // 2 + 1):
        for q in _monic_polys(P.base, d):
            if (P % q).is_zero():
                return False
    return True


def _gf2_mod(a: int, p: int) -> int:
    dp = p.bit_length()
    while a.bit_length() >= dp:
        a ^= p << (a.bit_length() - dp)
    return a


def _is_irreducible_gf2(p: int) -> bool:
    half = (p.bit_length() - 1) // 2
    for q in range(2, 1 << (half + 1)):
        if _gf2_mod(p, q) == 0:
            return False
    return True


def laurent_digits(n: PolyFb, q: PolyFb, P: PolyFb, w: int) -> tuple[int, ...]:
    """First ``w`` coefficients u_1..u_w of n(x) q(x) / P(x) = sum u_l x^-l.

    The polynomial part of the quotient is discarded, so only ``n*q mod P``
    matters. Digits come from synthetic long division.
    """
    n._same_base(q)
    n._same_base(P)
    if P.is_zero() or P.degree < 1:
        raise ValueError("modulus must have degree >= 1")
    if n.degree >= P.degree or q.degree >= P.degree:
        raise ValueError("numerator and generator must have degree < deg(P)")
    if w < 1:
        raise ValueError("digit count must be >= 1")
    if not is_irreducible(P):
        raise ValueError(f"modulus {P!r} is reducible")
    b, m = P.base, P.degree
    inv = pow(P.lead, -1, b)
    r = list(((n * q) % P).coeffs) + [0] * m
    r = r[:m]
    out = []
    for _ in range(w):
        r = [0] + r  # multiply by x; degree <= m
        u = r[m] * inv % b
        if u:
            for i, c in enumerate(P.coeffs):
                r[i] = (r[i] - u * c) % b
        out.append(u)
        r = r[:m]
    return tuple(out)


def digits_to_fraction(digits: Sequence[int], b: int) -> float:
    return sum(d * float(b) ** -(i + 1) for i, d in enumerate(digits))


def default_modulus(b: int, m: int) -> PolyFb:
    """Irreducible modulus of degree ``m``: table lookup for b=2, else search."""
    _check_base(b)
    if m < 1:
        raise ValueError("degree must be >= 1")
    if b == 2 and m in IRREDUCIBLE_GF2:
        return PolyFb.from_int(IRREDUCIBLE_GF2[m], 2)
    # smallest monic irreducible by integer encoding
    for low in range(b**m):
        P = PolyFb.from_int(b**m + low, b)
        if is_irreducible(P):
            return P
    raise ValueError(f"no irreducible polynomial of degree {m} over F_{b}")


# --- vectorised helpers on integer encodings -------------------------------


def digitwise_add(x, y, b: int, ndigits: int):
    """Coefficient-wise addition mod b of integer-encoded polynomials/digit strings."""
    if b == 2:
        return np.bitwise_xor(x, y)
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    w = 1
    for _ in range(ndigits):
        out += ((x // w % b + y // w % b) % b) * w
        w *= b
    return out


def digitwise_scale(x, d: int, b: int, ndigits: int):
    """Multiply every base-b digit of ``x`` by the scalar ``d`` mod b."""
    d %= b
    x = np.asarray(x, dtype=np.int64)
    if d == 0:
        return np.zeros_like(x)
    if d == 1:
        return x.copy()
    out = np.zeros_like(x)
    w = 1
    for _ in range(ndigits):
        out += (x // w % b) * d % b * w
        w *= b
    return out


def mulx_mod(codes, P: PolyFb):
    """Multiply each encoded residue (degree < m) by x and reduce mod P."""
    b, m = P.base, int(P.degree)
    codes = np.asarray(codes, dtype=np.int64)
    shifted = codes * b
    top = shifted // b**m
    low = shifted % b**m
    p_low = P.to_int() % b**m  # P without its leading term
    factor = top * pow(P.lead, -1, b) % b
    if b == 2:
        return np.where(top == 1, low ^ p_low, low)
    out = low.copy()
    for d in range(1, b):
        sel = factor == d
        if np.any(sel):
            out[sel] = digitwise_add(low[sel], digitwise_scale(np.full(sel.sum(), p_low), b - d, b, m), b, m)
    return out

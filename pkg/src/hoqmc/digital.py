"""Digit-level machinery for higher-order digital nets.

Coordinates are handled as fixed-point integers: a value ``x`` with ``nd``
base-``b`` digits is stored as ``X = x * b**nd``. Digit position ``a``
(``a = 1`` most significant) of ``x`` is ``X // b**(nd - a) % b``.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "dick_weight",
    "interlace",
    "interlace_array",
    "spread_digits",
    "walsh_eval",
    "walsh_kernel",
    "walsh_kernel_int",
    "to_fixed_point",
    "KernelTable",
]


def dick_weight(k: int, alpha: int, b: int = 2) -> int:
    """Sum of the positions of the ``alpha`` most significant nonzero digits of k.

    Position ``a`` is the digit multiplying ``b**(a-1)``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    positions = []
    a = 1
    while k:
        k, r = divmod(k, b)
        if r:
            positions.append(a)
        a += 1
    return sum(sorted(positions, reverse=True)[:alpha])


def spread_digits(y, slot: int, alpha: int, m: int, b: int = 2):
    """Place the m digits of ``y`` (numerator over b**m) into interlace slot ``slot``.

    Digit ``l`` of ``y`` lands on position ``alpha*(l-1) + slot`` of a
    number with ``alpha*m`` digits. ``slot`` is 1-based.
    """
    y = np.asarray(y, dtype=np.int64)
    nd = alpha * m
    out = np.zeros_like(y)
    for ell in range(1, m + 1):
        digit = y // b ** (m - ell) % b
        out += digit * b ** (nd - (alpha * (ell - 1) + slot))
    return out


def interlace_array(ys: Sequence, m: int, b: int = 2):
    """Vectorised :func:`interlace`; ``ys`` holds ``alpha`` arrays of numerators."""
    alpha = len(ys)
    if alpha < 1:
        raise ValueError("need at least one coordinate to interlace")
    out = spread_digits(ys[0], 1, alpha, m, b)
    for i in range(1, alpha):
        out = out + spread_digits(ys[i], i + 1, alpha, m, b)
    return out


def interlace(ycoords: Sequence[int], m: int, b: int = 2, alpha: int | None = None) -> int:
    """Interlace ``alpha`` numerators over ``b**m`` into one numerator over ``b**(alpha*m)``.

    >>> interlace([2, 1], m=2)   # (0.5, 0.25) -> 0.1001_2
    9
    """
    if alpha is not None and len(ycoords) != alpha:
        raise ValueError(f"expected {alpha} coordinates, got {len(ycoords)}")
    for y in ycoords:
        if not 0 <= y < b**m:
            raise ValueError(f"coordinate numerator {y} has more than {m} digits")
    nd = len(ycoords) * m
    if b ** nd >= 2**63:
        # exact big-integer path
        out = 0
        for i, y in enumerate(ycoords, start=1):
            for ell in range(1, m + 1):
                out += (y // b ** (m - ell) % b) * b ** (nd - (len(ycoords) * (ell - 1) + i))
        return out
    return int(interlace_array([np.int64(y) for y in ycoords], m, b))


def to_fixed_point(x, ndigits: int, b: int = 2) -> int:
    """Exact numerator of ``x`` over ``b**ndigits``; rejects unrepresentable values."""
    fx = Fraction(x)
    if not 0 <= fx < 1:
        raise ValueError(f"coordinate {x} outside [0, 1)")
    num = fx * b**ndigits
    if num.denominator != 1:
        raise ValueError(f"{x} is not representable with {ndigits} base-{b} digits")
    return int(num)


def _fraction_digits(x, count: int, b: int) -> list[int]:
    fx = Fraction(x)
    if not 0 <= fx < 1:
        raise ValueError(f"coordinate {x} outside [0, 1)")
    digits = []
    for _ in range(count):
        fx *= b
        d = int(fx)
        digits.append(d)
        fx -= d
    return digits


def walsh_eval(k: int, x, b: int = 2):
    """Walsh function wal_k(x); real +-1 for b=2, a complex root of unity otherwise."""
    if k < 0:
        raise ValueError("k must be non-negative")
    kd = []
    while k:
        k, r = divmod(k, b)
        kd.append(r)
    xd = _fraction_digits(x, len(kd), b)
    expo = sum(kk * xx for kk, xx in zip(kd, xd)) % b
    if b == 2:
        return -1 if expo else 1
    return cmath.exp(2j * cmath.pi * expo / b)


def walsh_kernel_int(X, alpha: int, m: int, b: int = 2):
    """Kernel sum_{k=1}^{b^(alpha m)-1} b^-mu_alpha(k) wal_k(x) for numerators ``X``.

    Digit dynamic program from the least significant position upwards in k
    (i.e. position alpha*m down to 1), with state = number of nonzero
    frequency digits already placed, capped at alpha. Only the first alpha
    nonzero digits counted from the top carry the factor b^-a.
    """
    nd = alpha * m
    X = np.asarray(X, dtype=np.int64)
    if np.any(X < 0) or np.any(X >= b**nd):
        raise ValueError("coordinate outside [0, 1)")
    state = [np.zeros(X.shape) for _ in range(alpha + 1)]
    state[0] = np.ones(X.shape)
    for a in range(nd, 0, -1):
        if b == 2:
            zero = ((X >> (nd - a)) & 1) == 0
        else:
            zero = (X // b ** (nd - a) % b) == 0
        zw = np.where(zero, (b - 1) * float(b) ** -a, -(float(b) ** -a))
        keep = np.where(zero, float(b), 0.0)  # 1 + z
        state[alpha] = state[alpha] * keep + state[alpha - 1] * zw
        for c in range(alpha - 1, 0, -1):
            state[c] = state[c] + state[c - 1] * zw
    # state[0] stays 1 and cancels the excluded k = 0 term
    out = state[1]
    for c in range(2, alpha + 1):
        out = out + state[c]
    return out


def walsh_kernel(x, alpha: int, m: int, b: int = 2) -> float:
    """Scalar kernel value at a coordinate with at most alpha*m base-b digits."""
    X = to_fixed_point(x, alpha * m, b)
    return float(walsh_kernel_int(np.int64(X), alpha, m, b))


class KernelTable:
    """Blocked form of the kernel digit DP for repeated bulk evaluation.

    Digits are consumed in blocks of ``block`` positions; for each block the
    product of the per-digit transfer matrices is tabulated over all b**block
    digit patterns, so an evaluation costs one table gather per block entry
    instead of alpha+1 updates per digit.
    """

    def __init__(self, alpha: int, m: int, b: int = 2, block: int | None = None):
        self.alpha, self.m, self.b = alpha, m, b
        nd = alpha * m
        if block is None:
            block = max(1, int(math.log(4096, b)))
        self.blocks = []  # (shift, width, tables[b**width, alpha+1, alpha+1])
        lo = nd  # positions lo..hi processed bottom-up
        while lo >= 1:
            width = min(block, lo)
            positions = range(lo, lo - width, -1)
            self.blocks.append((nd - lo, width, self._tabulate(positions, nd - lo)))
            lo -= width

    def _tabulate(self, positions, shift):
        a_, b = self.alpha, self.b
        width = len(positions)
        vals = np.arange(b**width, dtype=np.int64)
        M = np.zeros((vals.size, a_ + 1, a_ + 1))
        M[:, range(a_ + 1), range(a_ + 1)] = 1.0
        for a in positions:
            digit = vals * b**shift // b ** (self.alpha * self.m - a) % b
            zero = digit == 0
            zw = np.where(zero, (b - 1) * float(b) ** -a, -(float(b) ** -a))
            keep = np.where(zero, float(b), 0.0)
            step = np.zeros_like(M)
            step[:, range(a_), range(a_)] = 1.0
            step[:, range(a_), range(1, a_ + 1)] = zw[:, None]
            step[:, a_, a_] = keep
            M = M @ step
        return M

    def __call__(self, X):
        X = np.asarray(X, dtype=np.int64)
        a_, b = self.alpha, self.b
        state = None
        for shift, width, tab in self.blocks:
            idx = X // b**shift % b**width if b != 2 else (X >> shift) & ((1 << width) - 1)
            if state is None:
                state = [tab[idx, 0, c] for c in range(a_ + 1)]
                continue
            new = []
            for c2 in range(a_ + 1):
                acc = state[0] * tab[idx, 0, c2] if c2 > 0 else state[0]
                for c1 in range(1, c2 + 1):
                    acc = acc + state[c1] * tab[idx, c1, c2]
                new.append(acc)
            state = new
        out = state[1]
        for c in range(2, a_ + 1):
            out = out + state[c]
        return out

"""Interlaced polynomial lattice rules: rule data, point generation, files."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .digital import spread_digits
from .gfpoly import PolyFb, digitwise_add, digitwise_scale, is_irreducible, mulx_mod

__all__ = [
    "InterlacedRuleSpec",
    "PointSet",
    "generate_points",
    "laurent_codes",
    "slot_columns",
    "expand_columns",
    "interlaced_coords",
    "format_rule_spec",
    "parse_rule_spec",
    "read_rule_spec",
    "write_rule_spec",
    "write_pointset",
    "read_pointset",
    "POINTSET_HEADER",
]

POINTSET_HEADER = "hoqmc-pointset v1"
_MAX_FIXED = 2**63


@dataclass(frozen=True)
class InterlacedRuleSpec:
    """All data fixing an ``N = b**m`` point interlaced polynomial lattice rule.

    ``modulus`` and ``gen`` hold integer encodings. ``gen[(j-1)*alpha + i - 1]``
    is the generating polynomial of parametric dimension ``j``, slot ``i``.
    """

    b: int
    m: int
    alpha: int
    s: int
    modulus: int
    gen: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "gen", tuple(int(g) for g in self.gen))
        if self.m < 1 or self.alpha < 1 or self.s < 1:
            raise ValueError("m, alpha and s must all be >= 1")
        P = PolyFb.from_int(self.modulus, self.b)
        if P.degree != self.m:
            raise ValueError(f"modulus degree {P.degree} != m = {self.m}")
        if not is_irreducible(P):
            raise ValueError(f"modulus {self.modulus} is reducible over F_{self.b}")
        if len(self.gen) != self.alpha * self.s:
            raise ValueError(f"expected {self.alpha * self.s} generating polynomials, got {len(self.gen)}")
        if any(not 0 < g < self.b**self.m for g in self.gen):
            raise ValueError("generating polynomials must be nonzero with degree < m")
        if self.gen[0] != 1:
            raise ValueError("first generating polynomial must be 1")

    @property
    def N(self) -> int:
        return self.b**self.m

    @property
    def ndigits(self) -> int:
        return self.alpha * self.m

    @property
    def modulus_poly(self) -> PolyFb:
        return PolyFb.from_int(self.modulus, self.b)

    def gen_poly(self, k: int) -> PolyFb:
        return PolyFb.from_int(self.gen[k], self.b)

    def digest(self) -> str:
        return hashlib.sha256(format_rule_spec(self).encode()).hexdigest()


def laurent_codes(residues, P: PolyFb, w: int):
    """Vectorised Laurent digits of r(x)/P(x) packed as numerators over b**w."""
    b, m = P.base, int(P.degree)
    inv = pow(P.lead, -1, b)
    r = np.asarray(residues, dtype=np.int64)
    out = np.zeros_like(r)
    for _ in range(w):
        top = r * b // b**m
        out = out * b + top * inv % b
        r = mulx_mod(r, P)
    return out


def slot_columns(gens, P: PolyFb):
    """Laurent codes of x^t q mod P for t < m; shape (m, len(gens))."""
    m = int(P.degree)
    r = np.asarray(gens, dtype=np.int64)
    cols = np.empty((m, r.size), dtype=np.int64)
    for t in range(m):
        cols[t] = laurent_codes(r, P, m)
        r = mulx_mod(r, P)
    return cols


def expand_columns(cols, b: int, ndigits: int):
    """Point values for every n from per-digit columns.

    ``cols`` has shape (m, ...); the result has shape (..., b**m) with entry
    ``n`` equal to the digitwise sum of n_t * cols[t].
    """
    cols = np.asarray(cols, dtype=np.int64)
    m = cols.shape[0]
    out = np.zeros(cols.shape[1:] + (b**m,), dtype=np.int64)
    width = 1
    for t in range(m):
        col = cols[t][..., None]
        for d in range(1, b):
            term = col if d == 1 else digitwise_scale(col, d, b, ndigits)
            out[..., d * width:(d + 1) * width] = digitwise_add(out[..., :width], term, b, ndigits)
        width *= b
    return out


def interlaced_coords(b: int, m: int, alpha: int, P: PolyFb, gens) -> np.ndarray:
    """Fixed-point coordinates for a possibly partial list of generators.

    A trailing parametric dimension with fewer than ``alpha`` generators gets
    zero digits in its missing slots.
    """
    gens = [int(g) for g in gens]
    nd = alpha * m
    if b**nd >= _MAX_FIXED:
        raise ValueError(f"b**(alpha*m) = {b}**{nd} exceeds 63-bit fixed point")
    s = -(-len(gens) // alpha)
    N = b**m
    coords = np.zeros((N, s), dtype=np.int64)
    if not gens:
        return coords
    cols = slot_columns(gens, P)  # (m, k)
    for j in range(s):
        combined = np.zeros(m, dtype=np.int64)
        for i in range(alpha):
            k = j * alpha + i
            if k < len(gens):
                combined = combined + spread_digits(cols[:, k], i + 1, alpha, m, b)
        coords[:, j] = expand_columns(combined, b, nd)
    return coords


@dataclass(frozen=True, eq=False)
class PointSet:
    """``N x s`` fixed-point coordinates; value = coords / b**(alpha*m)."""

    spec: InterlacedRuleSpec
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.int64)
        if c.shape != (self.spec.N, self.spec.s):
            raise ValueError(f"coords shape {c.shape} != ({self.spec.N}, {self.spec.s})")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    b = property(lambda self: self.spec.b)
    m = property(lambda self: self.spec.m)
    alpha = property(lambda self: self.spec.alpha)
    s = property(lambda self: self.spec.s)
    N = property(lambda self: self.spec.N)

    @property
    def denominator(self) -> int:
        return self.spec.b**self.spec.ndigits

    def unit(self) -> np.ndarray:
        """Coordinates as floats in [0, 1)."""
        return self.coords.astype(np.float64) / float(self.denominator)

    def centered(self) -> np.ndarray:
        """Points mapped into the parameter box [-1/2, 1/2)^s."""
        return self.unit() - 0.5

    def __eq__(self, other):
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.coords, other.coords)


def generate_points(spec: InterlacedRuleSpec) -> PointSet:
    coords = interlaced_coords(spec.b, spec.m, spec.alpha, spec.modulus_poly, spec.gen)
    return PointSet(spec, coords)


# --- files ---------------------------------------------------------------


def format_rule_spec(spec: InterlacedRuleSpec) -> str:
    gen = ",".join(str(g) for g in spec.gen)
    return (
        f"{POINTSET_HEADER}\n"
        f"b={spec.b} m={spec.m} alpha={spec.alpha} s={spec.s} N={spec.N} "
        f"modulus={spec.modulus} gen={gen}\n"
    )


def parse_rule_spec(text: str) -> InterlacedRuleSpec:
    lines = text.splitlines()
    if len(lines) < 2 or lines[0].strip() != POINTSET_HEADER:
        raise ValueError(f"missing '{POINTSET_HEADER}' header")
    fields = dict(tok.split("=", 1) for tok in lines[1].split())
    try:
        spec = InterlacedRuleSpec(
            b=int(fields["b"]),
            m=int(fields["m"]),
            alpha=int(fields["alpha"]),
            s=int(fields["s"]),
            modulus=int(fields["modulus"]),
            gen=tuple(int(g) for g in fields["gen"].split(",")),
        )
    except KeyError as exc:
        raise ValueError(f"rule header lacks field {exc}") from None
    if int(fields.get("N", spec.N)) != spec.N:
        raise ValueError("N does not match b**m")
    return spec


def write_rule_spec(spec: InterlacedRuleSpec, path) -> None:
    Path(path).write_text(format_rule_spec(spec), encoding="utf-8")


def read_rule_spec(path) -> InterlacedRuleSpec:
    return parse_rule_spec(Path(path).read_text(encoding="utf-8"))


def write_pointset(points: PointSet, path) -> None:
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in points.coords)
    Path(path).write_text(format_rule_spec(points.spec) + rows + "\n", encoding="utf-8")


def read_pointset(path) -> PointSet:
    text = Path(path).read_text(encoding="utf-8")
    spec = parse_rule_spec(text)
    rows = [ln.split() for ln in text.splitlines()[2:] if ln.strip()]
    coords = np.array(rows, dtype=np.int64).reshape(len(rows), -1) if rows else np.zeros((0, spec.s), np.int64)
    return PointSet(spec, coords)

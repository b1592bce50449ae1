"""SPOD weights, the CBC figure of merit and the component-by-component search."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .digital import KernelTable, spread_digits, walsh_kernel_int
from .gfpoly import PolyFb, default_modulus
from .rules import (
    InterlacedRuleSpec,
    PointSet,
    expand_columns,
    generate_points,
    interlaced_coords,
    slot_columns,
)

__all__ = [
    "SPODWeightSpec",
    "spod_set_weight",
    "cbc_criterion",
    "cbc_criterion_prefix",
    "cbc_construct",
    "default_order",
]

# elements per candidate block (candidates x points)
_BLOCK = 1 << 20


@dataclass(frozen=True)
class SPODWeightSpec:
    alpha: int
    beta: tuple[float, ...]

    def __post_init__(self):
        beta = tuple(float(v) for v in self.beta)
        object.__setattr__(self, "beta", beta)
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be an integer >= 1")
        if any(v < 0 for v in beta):
            raise ValueError("beta entries must be non-negative")
        if any(beta[i] < beta[i + 1] for i in range(len(beta) - 1)):
            raise ValueError("beta must be non-increasing")

    @property
    def s(self) -> int:
        return len(self.beta)


def default_order(p0: float) -> int:
    """Interlacing order floor(1/p0) + 1."""
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie in (0, 1)")
    return math.floor(1 / p0) + 1


def _nu_factor(nu: int, alpha: int) -> float:
    return 2.0 if nu == alpha else 1.0


def spod_set_weight(u: Iterable[int], spec: SPODWeightSpec) -> float:
    """gamma_u = sum over nu in {1..alpha}^|u| of |nu|! prod_j 2^[nu_j = alpha] beta_j^nu_j."""
    u = sorted(set(u))
    if not u:
        return 1.0
    if u[0] < 1 or u[-1] > spec.s:
        raise ValueError(f"index set {u} outside the stored beta prefix 1..{spec.s}")
    total = 0.0
    for nus in product(range(1, spec.alpha + 1), repeat=len(u)):
        term = float(math.factorial(sum(nus)))
        for j, nu in zip(u, nus):
            term *= _nu_factor(nu, spec.alpha) * spec.beta[j - 1] ** nu
        total += term
    return total


def _spod_terms(R: np.ndarray, beta_j: float, alpha: int) -> np.ndarray:
    """T_l = sum_nu 2^[nu=alpha] beta^nu l!/(l-nu)! R_{l-nu}, with R_l = l! Q_l.

    ``R`` has shape (L+1, N); the result has shape (L+alpha+1, N).
    """
    L = R.shape[0] - 1
    T = np.zeros((L + alpha + 1,) + R.shape[1:])
    ell = np.arange(L + alpha + 1, dtype=np.float64)
    for nu in range(1, alpha + 1):
        falling = np.ones_like(ell)
        for i in range(nu):
            falling *= ell - i
        coef = _nu_factor(nu, alpha) * beta_j**nu * falling[nu:nu + L + 1]
        T[nu:nu + L + 1] += coef[:, None] * R
    return T


def _fsum_rows(a: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(row) for row in a.tolist()])


def cbc_criterion_prefix(b: int, m: int, alpha: int, modulus, gens: Sequence[int],
                         weights: SPODWeightSpec, coords: np.ndarray | None = None) -> float:
    """Figure of merit E for a (possibly partial) list of generating polynomials.

    Slots not yet chosen in the last parametric dimension contribute zero digits.
    """
    P = modulus if isinstance(modulus, PolyFb) else PolyFb.from_int(int(modulus), b)
    if coords is None:
        coords = interlaced_coords(b, m, alpha, P, gens)
    coords = np.asarray(coords, dtype=np.int64)
    N, j = coords.shape
    if j > weights.s:
        raise ValueError(f"weights cover {weights.s} dimensions, points have {j}")
    if weights.alpha != alpha:
        raise ValueError("weight order differs from the rule's interlacing order")
    R = np.ones((1, N))
    for r in range(j):
        omega = walsh_kernel_int(coords[:, r], alpha, m, b)
        T = _spod_terms(R, weights.beta[r], alpha)
        R = np.vstack([R, np.zeros((alpha, N))]) + omega * T
    return math.fsum(R[1:].ravel().tolist()) / N


def cbc_criterion(spec: InterlacedRuleSpec, weights: SPODWeightSpec,
                  points: PointSet | None = None) -> float:
    """E = (1/N) sum_n sum_{l>=1} l! Q_{s,l,n} for the rule ``spec``."""
    if points is None:
        points = generate_points(spec)
    if points.spec != spec:
        raise ValueError("point set was not generated from this spec")
    if spec.s > weights.s:
        raise ValueError(f"weights cover {weights.s} dimensions, rule has {spec.s}")
    return cbc_criterion_prefix(spec.b, spec.m, spec.alpha, spec.modulus_poly, spec.gen,
                                weights, points.coords)


def _candidate_set(b: int, m: int, k: int, candidates: int | None) -> np.ndarray:
    full = np.arange(1, b**m, dtype=np.int64)
    if candidates is None or candidates >= full.size:
        return full
    rng = np.random.default_rng([b, m, k])
    return np.sort(rng.choice(full, size=candidates, replace=False))


def cbc_construct(b: int, m: int, alpha: int, s: int, weights: SPODWeightSpec, *,
                  modulus: int | PolyFb | None = None, candidates: int | None = None,
                  workers: int = 1) -> InterlacedRuleSpec:
    """Greedy component-by-component search for the generating polynomials.

    ``gen[0] = 1``; each further underlying dimension picks, among the nonzero
    polynomials of degree < m, the one minimising the figure of merit with
    earlier choices fixed. Ties go to the smallest integer encoding.

    ``candidates`` limits each step to a seeded random subset of that size
    (used for overkill reference rules where the full search is too costly).
    ``workers`` evaluates candidate blocks on a thread pool; scores are
    reduced per candidate with ``math.fsum`` so the result does not depend
    on it.
    """
    if weights.s < s:
        raise ValueError(f"weights cover {weights.s} dimensions, need {s}")
    if weights.alpha != alpha:
        raise ValueError("weight order differs from requested interlacing order")
    if modulus is None:
        P = default_modulus(b, m)
    elif isinstance(modulus, PolyFb):
        P = modulus
    else:
        P = PolyFb.from_int(int(modulus), b)
    N, nd = b**m, alpha * m
    if b**nd >= 2**63:
        raise ValueError(f"b**(alpha*m) = {b}**{nd} exceeds 63-bit fixed point")

    kernel = KernelTable(alpha, m, b)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    gen: list[int] = []
    R = np.ones((1, N))
    try:
        for j in range(s):
            T = _spod_terms(R, weights.beta[j], alpha)
            A = T[1:].sum(axis=0)
            base = np.zeros(N, dtype=np.int64)
            for i in range(alpha):
                k = j * alpha + i
                if k == 0:
                    q = 1
                else:
                    cand = _candidate_set(b, m, k, candidates)
                    q = _best_candidate(cand, P, base, A, i + 1, kernel, pool)
                gen.append(q)
                col = spread_digits(slot_columns([q], P)[:, 0], i + 1, alpha, m, b)
                base = base + expand_columns(col, b, nd)
            omega = kernel(base)
            R = np.vstack([R, np.zeros((alpha, N))]) + omega * T
            peak = np.max(np.abs(R))
            if peak > 1e150:
                # positive rescaling leaves every later argmin unchanged
                R = R / peak
    finally:
        if pool is not None:
            pool.shutdown()
    return InterlacedRuleSpec(b=b, m=m, alpha=alpha, s=s, modulus=P.to_int(), gen=tuple(gen))


def _best_candidate(cand, P, base, A, slot, kernel, pool) -> int:
    alpha, m, b = kernel.alpha, kernel.m, kernel.b
    N, nd = b**m, alpha * m
    cols = spread_digits(slot_columns(cand, P), slot, alpha, m, b)  # (m, C)
    step = max(1, _BLOCK // N)
    blocks = [slice(lo, min(lo + step, cand.size)) for lo in range(0, cand.size, step)]

    def score(block):
        Y = expand_columns(cols[:, block], b, nd)  # (c, N)
        X = base[None, 1:] + Y[:, 1:]  # slots occupy disjoint digits; n = 0 is constant
        omega = kernel(X)
        return _fsum_rows(omega * A[None, 1:])

    parts = list(pool.map(score, blocks)) if pool is not None else [score(blk) for blk in blocks]
    scores = np.concatenate(parts)
    return int(cand[int(np.argmin(scores))])  # first minimum = smallest encoding

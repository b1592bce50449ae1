"""Single-level and multi-level QMC estimators of E[G(u)], plus their tooling.

All point means are reduced with ``math.fsum`` in point order, so estimates
are identical whatever the chunking or the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .cbc import SPODWeightSpec, cbc_construct, default_order
from .pde import AffineDiffusionProblem, Mesh, beta_sequence, qoi, solve
from .rules import InterlacedRuleSpec, PointSet, generate_points

__all__ = [
    "Estimate",
    "SingleLevelConfig",
    "Level",
    "LevelSchedule",
    "ErrorBreakdown",
    "TruncationBound",
    "Rates",
    "build_rule",
    "sample_qoi",
    "run_single_level",
    "run_multi_level",
    "truncation_tail_bound",
    "optimize_schedule",
    "multilevel_bound",
    "single_level_counterpart",
    "mc_baseline",
    "error_breakdown",
    "reference_config",
]

_CHUNK = 2048


@dataclass(frozen=True)
class Estimate:
    value: float
    work: int
    n_points: int
    stderr: float | None = None

    def to_dict(self) -> dict:
        return {"estimate": self.value, "work_units": self.work, "n_points": self.n_points,
                "stderr": self.stderr}


def build_rule(problem: AffineDiffusionProblem, s: int, m: int, alpha: int | None = None,
               b: int = 2, candidates: int | None = None, workers: int = 1) -> InterlacedRuleSpec:
    """CBC rule whose SPOD weights come from the problem's beta sequence."""
    alpha = default_order(problem.p0) if alpha is None else alpha
    weights = SPODWeightSpec(alpha, tuple(beta_sequence(problem, s)))
    return cbc_construct(b, m, alpha, s, weights, candidates=candidates, workers=workers)


def _points(rule) -> PointSet:
    return rule if isinstance(rule, PointSet) else generate_points(rule)


def _pad(y: np.ndarray, s: int) -> np.ndarray:
    """First ``s`` coordinates of ``y``; missing ones are zero."""
    if y.shape[1] >= s:
        return y[:, :s]
    out = np.zeros((y.shape[0], s))
    out[:, : y.shape[1]] = y
    return out


def sample_qoi(problem: AffineDiffusionProblem, y: np.ndarray, mesh: Mesh,
               workers: int = 1) -> np.ndarray:
    """G(u^h(y_n)) for every row of ``y``, solved in chunks (optionally threaded)."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError("expected a 2-D array of parameter points")
    if y.shape[1] == 0 or problem.c == 0:
        # no active parameters: the integrand is constant
        g0 = qoi(problem, solve(problem, np.zeros(1), mesh), mesh)
        return np.full(y.shape[0], g0)
    chunks = [y[i:i + _CHUNK] for i in range(0, y.shape[0], _CHUNK)]

    def run(chunk):
        return qoi(problem, solve(problem, chunk, mesh), mesh)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts)


def _mean(values: np.ndarray) -> float:
    return math.fsum(np.asarray(values).tolist()) / len(values)


@dataclass(frozen=True)
class SingleLevelConfig:
    """Truncation dimension, mesh and QMC rule; points are used as y_n - 1/2."""

    s: int
    mesh: Mesh
    rule: InterlacedRuleSpec | PointSet

    def __post_init__(self):
        if self.rule.s != self.s:
            raise ValueError(f"rule dimension {self.rule.s} != truncation dimension {self.s}")

    @property
    def spec(self) -> InterlacedRuleSpec:
        return self.rule.spec if isinstance(self.rule, PointSet) else self.rule

    @property
    def N(self) -> int:
        return self.rule.N


def run_single_level(problem: AffineDiffusionProblem, cfg: SingleLevelConfig,
                     workers: int = 1) -> Estimate:
    y = _points(cfg.rule).centered()
    values = sample_qoi(problem, y, cfg.mesh, workers)
    return Estimate(_mean(values), cfg.N * cfg.mesh.M, cfg.N)


@dataclass(frozen=True)
class Level:
    M: int
    s: int
    m: int
    rule: InterlacedRuleSpec | None = None

    def __post_init__(self):
        if self.rule is not None and (self.rule.s != self.s or self.rule.m != self.m):
            raise ValueError("level rule does not match (s, m)")


@dataclass(frozen=True)
class LevelSchedule:
    """Per-level (M, s, m); level -1 is the zero function."""

    levels: tuple[Level, ...]
    b: int = 2
    alpha: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("schedule needs at least one level")
        for prev, cur in zip(self.levels, self.levels[1:]):
            if cur.M <= prev.M:
                raise ValueError("mesh widths must strictly decrease across levels")
            if cur.s < prev.s:
                raise ValueError("truncation dimensions must not decrease across levels")

    @property
    def L(self) -> int:
        return len(self.levels) - 1

    def work_units(self) -> int:
        total, prev_M = 0, 0
        for lev in self.levels:
            total += self.b**lev.m * (lev.M + prev_M)
            prev_M = lev.M
        return total

    def with_rules(self, problem: AffineDiffusionProblem, alpha: int | None = None,
                   candidates: int | None = None, workers: int = 1) -> "LevelSchedule":
        alpha = alpha or self.alpha or default_order(problem.p0)
        levels = tuple(
            replace(lev, rule=build_rule(problem, lev.s, lev.m, alpha, self.b, candidates, workers))
            for lev in self.levels
        )
        return replace(self, levels=levels, alpha=alpha)

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "alpha": self.alpha,
            "levels": [{"M": lv.M, "s": lv.s, "m": lv.m,
                        "rule": None if lv.rule is None else lv.rule.digest()} for lv in self.levels],
        }


def run_multi_level(problem: AffineDiffusionProblem, schedule: LevelSchedule,
                    workers: int = 1) -> Estimate:
    """Telescoping sum of level-difference means, fine and coarse at shared points."""
    total = []
    prev = None
    n_points = 0
    for lev in schedule.levels:
        if lev.rule is None:
            raise ValueError("schedule levels need rules; call with_rules() first")
        y = generate_points(lev.rule).centered()
        n_points += y.shape[0]
        fine = sample_qoi(problem, _pad(y, lev.s), Mesh(lev.M), workers)
        if prev is None:
            diff = fine
        else:
            coarse = sample_qoi(problem, _pad(y, prev.s), Mesh(prev.M), workers)
            diff = fine - coarse
        total.append(_mean(diff))
        prev = lev
    return Estimate(math.fsum(total), schedule.work_units(), n_points)


@dataclass(frozen=True)
class TruncationBound:
    tail: float  # bound on sum_{j>s} beta_j
    squared: float  # bound shape for the QoI truncation error
    explicit_tail: float  # sum_{j>s} beta_j over the stored prefix


def truncation_tail_bound(beta: Sequence[float], s: int, p0: float) -> TruncationBound:
    """min(1/(1/p0-1), 1) (sum beta^p0)^(1/p0) s^-(1/p0-1), and its square."""
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie in (0, 1)")
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(np.diff(beta) > 0):
        raise ValueError("beta must be non-increasing")
    r = 1 / p0 - 1
    norm = math.fsum((beta**p0).tolist()) ** (1 / p0)
    tail = min(1 / r, 1.0) * norm * s ** (-r)
    explicit = math.fsum(beta[s:].tolist())
    return TruncationBound(tail, tail**2, explicit)


@dataclass(frozen=True)
class Rates:
    """Convergence exponents feeding the level-schedule optimizer."""

    p0: float
    p_t: float | None = None
    t: float = 1.0
    t_prime: float = 1.0

    def __post_init__(self):
        if self.p_t is None:
            object.__setattr__(self, "p_t", self.p0)
        if not 0 < self.p0 <= self.p_t < 1:
            raise ValueError("need 0 < p0 <= p_t < 1")
        if self.t <= 0 or self.t_prime <= 0:
            raise ValueError("smoothness orders t, t' must be positive")

    @property
    def pg_order(self) -> float:
        return self.t + self.t_prime

    @property
    def trunc_order(self) -> float:
        return 2 * (1 / self.p0 - 1)


def _coupling(rates: Rates, s_prev: int | None, h_prev: float | None) -> float:
    if s_prev is None:
        return 1.0
    c = h_prev**rates.pg_order
    if rates.p_t > rates.p0:
        c += s_prev ** (-(1 / rates.p0 - 1 / rates.p_t))
    return c


def multilevel_bound(rates: Rates, schedule: LevelSchedule) -> float:
    """Error bound of the multi-level estimator with all constants set to 1."""
    last = schedule.levels[-1]
    h = lambda M: 1.0 / (M + 1)  # noqa: E731
    terms = [last.s ** (-rates.trunc_order), h(last.M) ** rates.pg_order]
    prev = None
    for lev in schedule.levels:
        c = _coupling(rates, None if prev is None else prev.s, None if prev is None else h(prev.M))
        terms.append(float(schedule.b**lev.m) ** (-1 / rates.p_t) * c)
        prev = lev
    return math.fsum(terms)


def _min_m(N: float, b: int) -> int:
    m = max(1, math.ceil(math.log(N, b) - 1e-12))
    while b**m < N:
        m += 1
    return m


def optimize_schedule(rates: Rates, target: float, *, M0: int, s0: int, b: int = 2,
                      work: Callable[[int], float] = float, max_m: int = 20,
                      max_M: int = 1 << 16, max_L: int = 12) -> LevelSchedule:
    """Geometric multi-level schedule meeting ``target`` for the constant-1 bound.

    Levels: h_l = h_0 2^-l with L minimal such that h_L^(t+t') <= target/3.
    Dimensions grow as s_0 2^ceil(l (t+t') / (2 (1/p0 - 1))), and the finest
    one is raised until s_L^-2(1/p0-1) <= target/3. The per-level point
    counts N_l = b^m_l minimise total work sum N_l W_l subject to the
    integration budget (Lagrange multiplier), then round up to powers of b.
    ``work`` maps a mesh size M to the cost of one solve.
    """
    if target <= 0:
        raise ValueError("target error must be positive")
    h0 = 1.0 / (M0 + 1)
    budget = target / 3
    L = 0
    while (h0 * 2.0**-L) ** rates.pg_order > budget:
        L += 1
        if L > max_L:
            raise ValueError("infeasible target: too many levels needed")
    Ms = [(M0 + 1) * 2**ell - 1 for ell in range(L + 1)]
    if Ms[-1] > max_M:
        raise ValueError(f"infeasible target: finest mesh M={Ms[-1]} exceeds max_M={max_M}")

    growth = rates.pg_order / rates.trunc_order
    s_geo = [s0 * 2 ** math.ceil(ell * growth - 1e-12) for ell in range(L + 1)]
    s_fin = s0
    while s_fin ** (-rates.trunc_order) > budget:
        s_fin *= 2
    s_last = max(s_geo[-1], s_fin)
    ss = [min(sv, s_last) for sv in s_geo[:-1]] + [s_last]

    remaining = target - ss[-1] ** (-rates.trunc_order) - (1.0 / (Ms[-1] + 1)) ** rates.pg_order
    r = 1 / rates.p_t
    cs, Ws = [], []
    for ell in range(L + 1):
        prev_s = ss[ell - 1] if ell else None
        prev_h = 1.0 / (Ms[ell - 1] + 1) if ell else None
        cs.append(_coupling(rates, prev_s, prev_h))
        Ws.append(work(Ms[ell]) + (work(Ms[ell - 1]) if ell else 0.0))
    K = (math.fsum(c ** (1 / (r + 1)) * W ** (r / (r + 1)) for c, W in zip(cs, Ws)) / remaining) ** (1 / r)
    ms = [_min_m(K * (c / W) ** (1 / (r + 1)), b) for c, W in zip(cs, Ws)]
    if max(ms) > max_m:
        raise ValueError(f"infeasible target: needs m={max(ms)} > max_m={max_m}")
    levels = tuple(Level(M, s, m) for M, s, m in zip(Ms, ss, ms))
    return LevelSchedule(levels, b=b, alpha=math.floor(1 / rates.p0) + 1)


def single_level_counterpart(rates: Rates, target: float, M: int, s: int, b: int = 2,
                             max_m: int = 20) -> Level:
    """One-level configuration at (M, s) whose constant-1 bound meets ``target``."""
    remaining = target - s ** (-rates.trunc_order) - (1.0 / (M + 1)) ** rates.pg_order
    if remaining <= 0:
        raise ValueError("target unreachable at this mesh and truncation")
    m = _min_m(remaining ** (-rates.p_t), b)
    if m > max_m:
        raise ValueError(f"infeasible target: needs m={m} > max_m={max_m}")
    return Level(M, s, m)


def mc_baseline(problem: AffineDiffusionProblem, s: int, mesh: Mesh, N: int, seed: int,
                workers: int = 1) -> Estimate:
    """Plain Monte Carlo on [-1/2, 1/2]^s; the stream is keyed on (seed, N)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng([seed, N])
    y = rng.uniform(-0.5, 0.5, size=(N, s))
    values = sample_qoi(problem, y, mesh, workers)
    mean = _mean(values)
    stderr = float(np.std(values, ddof=1) / math.sqrt(N)) if N > 1 else float("nan")
    return Estimate(mean, N * mesh.M, N, stderr)


@dataclass(frozen=True)
class ErrorBreakdown:
    truncation: float
    integration: float
    pg: float
    total: float
    reference: float
    estimate: float = field(default=float("nan"))

    def to_dict(self) -> dict:
        return {"truncation": self.truncation, "integration": self.integration, "pg": self.pg,
                "total": self.total, "reference": self.reference, "estimate": self.estimate}


def reference_config(problem: AffineDiffusionProblem, cfg: SingleLevelConfig,
                     candidates: int | None = 32, workers: int = 1,
                     mesh_factor: int = 4, s_factor: int = 2, extra_digits: int = 3) -> SingleLevelConfig:
    """Overkill configuration: finer mesh, larger s, rule with more digits and order+1."""
    spec = cfg.spec
    s_ref = cfg.s * s_factor
    M_ref = (cfg.mesh.M + 1) * mesh_factor - 1
    rule = build_rule(problem, s_ref, spec.m + extra_digits, spec.alpha + 1, spec.b,
                      candidates=candidates, workers=workers)
    return SingleLevelConfig(s_ref, Mesh(M_ref), rule)


def error_breakdown(problem: AffineDiffusionProblem, cfg: SingleLevelConfig,
                    reference: SingleLevelConfig, workers: int = 1) -> ErrorBreakdown:
    """Split the single-level error into truncation, integration and PG parts.

    Each part is measured against the reference while the other two axes are
    held fixed, so the three parts telescope to the total.
    """
    if reference.s < cfg.s or reference.mesh.M < cfg.mesh.M or reference.N < cfg.N:
        raise ValueError("reference configuration must dominate the tested one")
    y_ref = _points(reference.rule).centered()
    y_cfg = _points(cfg.rule).centered()
    ref_full = _mean(sample_qoi(problem, y_ref, reference.mesh, workers))
    ref_s = _mean(sample_qoi(problem, _pad(y_ref, cfg.s), reference.mesh, workers))
    cfg_href = _mean(sample_qoi(problem, y_cfg, reference.mesh, workers))
    est = _mean(sample_qoi(problem, y_cfg, cfg.mesh, workers))
    return ErrorBreakdown(
        truncation=abs(ref_full - ref_s),
        integration=abs(ref_s - cfg_href),
        pg=abs(cfg_href - est),
        total=abs(ref_full - est),
        reference=ref_full,
        estimate=est,
    )

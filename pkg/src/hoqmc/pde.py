"""Affine-parametric 1D diffusion model and its piecewise-linear FEM solver.

The model problem is

    -(a(x, y) u'(x))' = f(x) on (0, 1),  u(0) = u(1) = 0,
    a(x, y) = a0 + sum_j y_j c j^-theta sin(j pi x),  y in [-1/2, 1/2]^s,

with quantity of interest G(u) = int_0^1 g(x) u(x) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import zeta

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "AffineDiffusionProblem",
    "Mesh",
    "AdmissibilityReport",
    "beta_sequence",
    "check_admissibility",
    "stability_constant",
    "coefficient",
    "solve",
    "solve_tridiagonal",
    "qoi",
    "qoi_weights",
    "load_problem",
    "default_problem",
]


def _parse_term(term: str) -> tuple[float, str, float]:
    scale, star, body = term.strip().rpartition("*")
    weight = float(scale) if star else 1.0
    kind, _, arg = body.strip().partition(":")
    kind = kind.strip()
    if kind not in ("const", "sin"):
        raise ValueError(f"unknown source '{term}', expected 'const:<v>' or 'sin:<k>'")
    value = float(arg) if arg else 1.0
    if kind == "sin" and (value != int(value) or value < 1):
        raise ValueError(f"sin frequency must be a positive integer: '{term}'")
    return weight, kind, value


def _parse_source(spec: str) -> list[tuple[float, str, float]]:
    """Terms of a source string such as ``"const:1"`` or ``"const:1+0.5*sin:2"``."""
    return [_parse_term(t) for t in spec.split("+")]


@dataclass(frozen=True)
class AffineDiffusionProblem:
    """Model instance; fluctuations psi_j(x) = c j^-theta sin(j pi x).

    ``f`` and ``g`` are ``"const:<value>"``, ``"sin:<k>"`` or a ``+``-joined sum
    of such terms, each optionally scaled as ``"<w>*sin:<k>"``. ``p0`` is the
    nominal summability exponent used to pick the interlacing order.
    """

    a0: float = 1.0
    c: float = 0.4
    theta: float = 2.0
    f: str = "const:1"
    g: str = "const:1"
    p0: float = 0.5

    def __post_init__(self):
        if self.a0 <= 0:
            raise ValueError("nominal coefficient a0 must be positive")
        if self.c < 0:
            raise ValueError("fluctuation amplitude c must be non-negative")
        if self.theta <= 1:
            raise ValueError("decay theta must exceed 1")
        if not 0 < self.p0 < 1:
            raise ValueError("p0 must lie in (0, 1)")
        _parse_source(self.f)
        _parse_source(self.g)

    @property
    def a_min(self) -> float:
        """Lower bound of a(x, y) over the whole parameter box."""
        return self.a0 - 0.5 * self.c * float(zeta(self.theta))

    def to_dict(self) -> dict:
        return {"a0": self.a0, "c": self.c, "theta": self.theta, "f": self.f,
                "g": self.g, "p0": self.p0}


def default_problem(**overrides) -> AffineDiffusionProblem:
    return AffineDiffusionProblem(**overrides)


def load_problem(path) -> AffineDiffusionProblem:
    data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    allowed = {"a0", "c", "theta", "f", "g", "p0"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown problem keys: {sorted(unknown)}")
    return AffineDiffusionProblem(**data)


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of (0, 1) with ``M`` interior nodes."""

    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("mesh needs at least one interior node")

    @property
    def h(self) -> float:
        return 1.0 / (self.M + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.M + 1) * self.h

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.M + 1) + 0.5) * self.h


@dataclass(frozen=True)
class AdmissibilityReport:
    kappa: float
    mu0: float
    mu: float
    ok: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ok", bool(self.kappa < 2))

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "mu0": self.mu0, "mu": self.mu, "ok": self.ok}


def beta_sequence(problem: AffineDiffusionProblem, s: int) -> np.ndarray:
    """beta_j = sup|psi_j| / a0 = c j^-theta / a0 for j = 1..s."""
    j = np.arange(1, s + 1, dtype=np.float64)
    return problem.c * j ** (-problem.theta) / problem.a0


def stability_constant(kappa: float, mu0: float) -> float:
    """Inf-sup constant of A(y), (1 - kappa/2) mu0."""
    return (1 - kappa / 2) * mu0


def check_admissibility(problem: AffineDiffusionProblem, s_max: int = 1000) -> AdmissibilityReport:
    """kappa = sum of beta_j over j <= s_max plus the exact (Hurwitz zeta) tail."""
    head = math.fsum(beta_sequence(problem, s_max).tolist())
    tail = problem.c / problem.a0 * float(zeta(problem.theta, s_max + 1))
    kappa = head + tail
    mu0 = problem.a0
    return AdmissibilityReport(kappa=kappa, mu0=mu0, mu=stability_constant(kappa, mu0))


def coefficient(problem: AffineDiffusionProblem, y, mesh: Mesh) -> np.ndarray:
    """Element-midpoint values of a(x, y); ``y`` is (s,) or (npts, s)."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    xm = mesh.midpoints
    a = np.full((y.shape[0], xm.size), float(problem.a0))
    for j in range(1, y.shape[1] + 1):
        psi = problem.c * j ** (-problem.theta) * np.sin(j * np.pi * xm)
        a += y[:, j - 1 : j] * psi
    return a


def _hat_integrals(source: str, mesh: Mesh) -> np.ndarray:
    """Exact integrals of the source against each hat function."""
    h = mesh.h
    out = np.zeros(mesh.M)
    for weight, kind, value in _parse_source(source):
        if kind == "const":
            out += weight * value * h
        else:
            w = value * np.pi
            out += weight * 2.0 * np.sin(w * mesh.nodes) * (1.0 - np.cos(w * h)) / (w * w * h)
    return out


def qoi_weights(problem: AffineDiffusionProblem, mesh: Mesh) -> np.ndarray:
    return _hat_integrals(problem.g, mesh)


def solve_tridiagonal(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Batched symmetric tridiagonal elimination (Thomas algorithm).

    ``diag`` and ``rhs`` are (npts, M), ``off`` is (npts, M-1).
    """
    d = np.array(diag.T, dtype=np.float64)  # row-wise sweeps over contiguous rows
    r = np.array(rhs.T, dtype=np.float64)
    e = np.ascontiguousarray(off.T)
    M = d.shape[0]
    for i in range(1, M):
        w = e[i - 1] / d[i - 1]
        d[i] -= w * e[i - 1]
        r[i] -= w * r[i - 1]
    u = np.empty_like(r)
    u[M - 1] = r[M - 1] / d[M - 1]
    for i in range(M - 2, -1, -1):
        u[i] = (r[i] - e[i] * u[i + 1]) / d[i]
    return u.T


def solve(problem: AffineDiffusionProblem, y, mesh: Mesh, element_order=None) -> np.ndarray:
    """Nodal values of the FEM solution at parameter(s) ``y``.

    Returns shape (M,) for a single parameter vector, (npts, M) for a batch.
    ``element_order`` permutes the element assembly loop (testing hook).
    """
    y_arr = np.asarray(y, dtype=np.float64)
    single = y_arr.ndim == 1
    a = coefficient(problem, y_arr, mesh)
    bad = np.argwhere(a <= 0)
    if bad.size:
        p, e = bad[0]
        raise ValueError(f"non-positive coefficient {a[p, e]:.3g} on element {e} (point {p})")
    h, M = mesh.h, mesh.M
    k = a / h
    if element_order is None:
        diag = k[:, :-1] + k[:, 1:]
        off = -k[:, 1:-1]
    else:
        diag = np.zeros((a.shape[0], M))
        off = np.zeros((a.shape[0], M - 1))
        for e in element_order:
            # element e joins nodes e and e+1; interior nodes are 1..M
            if e >= 1:
                diag[:, e - 1] += k[:, e]
            if e < M:
                diag[:, e] += k[:, e]
            if 1 <= e < M:
                off[:, e - 1] -= k[:, e]
    rhs = np.broadcast_to(_hat_integrals(problem.f, mesh), diag.shape)
    u = solve_tridiagonal(diag, off, rhs)
    return u[0] if single else u


def qoi(problem: AffineDiffusionProblem, dof, mesh: Mesh):
    """G(u^h) = int g u^h dx, exact for piecewise-linear u^h."""
    dof = np.asarray(dof, dtype=np.float64)
    if dof.shape[-1] != mesh.M:
        raise ValueError(f"dof length {dof.shape[-1]} does not match mesh M={mesh.M}")
    w = qoi_weights(problem, mesh)
    # fixed left-to-right accumulation, so a row's value never depends on the batch it is in
    acc = np.zeros(dof.shape[:-1])
    for i in range(mesh.M):
        acc = acc + dof[..., i] * w[i]
    return float(acc) if acc.ndim == 0 else acc

"""Convergence sweeps, log-log slope fits and CSV/JSON report emission.

A sweep varies one axis (mesh size, truncation dimension, number of QMC or
MC points, or the multi-level target error) against a common overkill
reference and records one row per grid value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .cbc import default_order
from .estimators import (
    Rates,
    SingleLevelConfig,
    build_rule,
    mc_baseline,
    optimize_schedule,
    run_multi_level,
    run_single_level,
    sample_qoi,
    single_level_counterpart,
)
from .pde import AffineDiffusionProblem, Mesh, load_problem, qoi, solve
from .rules import generate_points

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "AXES",
    "SweepPlan",
    "Row",
    "ConvergenceReport",
    "run_sweep",
    "fit_slope",
    "emit",
    "dumps_report",
    "dumps_json",
    "load_report",
    "load_plan",
]

AXES = ("mesh", "truncation", "qmc-N", "mc-N", "ml-vs-sl")
# rounding resolution of a computed reference, relative to its magnitude
_RESOLUTION = 4 * np.finfo(float).eps
_FLOOR_FACTOR = 1e2


def _version() -> str:
    from . import __version__

    return __version__


@dataclass(frozen=True)
class SweepPlan:
    """One-axis sweep.

    ``fixed`` freezes the other axes (keys ``M``, ``s``, ``m``, ``seeds``,
    ``M0``, ``s0``, ``p_t``, ``t``, ``t_prime``). ``reference`` overrides the
    overkill reference (``value`` for an analytic truth, or ``M``, ``s``,
    ``m``, ``alpha``, ``candidates``).
    """

    axis: str
    grid: tuple
    problem: AffineDiffusionProblem = field(default_factory=AffineDiffusionProblem)
    fixed: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    alpha: int | None = None
    b: int = 2
    workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis '{self.axis}', expected one of {AXES}")
        grid = tuple(sorted(self.grid))
        if len(grid) < 4:
            raise ValueError("a sweep grid needs at least 4 entries")
        if len(set(grid)) != len(grid):
            raise ValueError("grid entries must be distinct")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "fixed", dict(self.fixed))
        object.__setattr__(self, "reference", dict(self.reference))
        if self.axis in ("qmc-N", "mc-N"):
            for n in grid:
                if self.axis == "qmc-N" and self.b ** round(math.log(n, self.b)) != n:
                    raise ValueError(f"qmc-N grid value {n} is not a power of {self.b}")
        self._check_reference()

    @property
    def order(self) -> int:
        return self.alpha if self.alpha is not None else default_order(self.problem.p0)

    def _check_reference(self):
        ref = self.reference
        top = self.grid[-1]
        if self.axis == "mesh" and "value" not in ref and ref.get("M", top + 1) <= top:
            raise ValueError("reference mesh must be finer than every grid entry")
        if self.axis == "truncation" and ref.get("s", top + 1) <= top:
            raise ValueError("reference dimension must exceed every grid entry")
        if self.axis in ("qmc-N", "mc-N") and "m" in ref and self.b ** ref["m"] <= top:
            raise ValueError("reference rule must have more points than every grid entry")

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "grid": list(self.grid),
            "problem": self.problem.to_dict(),
            "fixed": dict(self.fixed),
            "reference": dict(self.reference),
            "alpha": self.order,
            "b": self.b,
        }


@dataclass(frozen=True)
class Row:
    value: Any
    error: float | None
    work: int | None
    status: str = "ok"  # ok | below-floor | failed: <reason>
    extra: dict = field(default_factory=dict)

    @property
    def usable(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class ConvergenceReport:
    axis: str
    rows: tuple
    abscissa: str
    slope: float | None
    halfwidth: float | None
    predicted: float | None
    degenerate: bool
    reference: float | None
    floor: float
    config: dict
    version: str

    @property
    def all_ok(self) -> bool:
        return all(not r.status.startswith("failed") for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "abscissa": self.abscissa,
            "slope": self.slope,
            "halfwidth": self.halfwidth,
            "predicted": self.predicted,
            "degenerate": self.degenerate,
            "reference": self.reference,
            "floor": self.floor,
            "rows": [{"value": r.value, "error": r.error, "work": r.work, "status": r.status,
                      "extra": r.extra} for r in self.rows],
            "config": self.config,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        rows = tuple(Row(r["value"], r["error"], r["work"], r["status"], r["extra"]) for r in d["rows"])
        return cls(d["axis"], rows, d["abscissa"], d["slope"], d["halfwidth"], d["predicted"],
                   d["degenerate"], d["reference"], d["floor"], d["config"], d["version"])


def fit_slope(rows: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of log(err) against log(x) and twice its standard error.

    Rows with non-positive or non-finite errors are dropped.
    """
    pts = [(float(x), float(e)) for x, e in rows if e is not None and math.isfinite(e) and e > 0 and x > 0]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 rows with positive error, got {len(pts)}")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    dx = lx - lx.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise ValueError("abscissae must not all coincide")
    slope = float(dx @ (ly - ly.mean())) / sxx
    resid = ly - ly.mean() - slope * dx
    se = math.sqrt(float(resid @ resid) / (len(pts) - 2) / sxx)
    return slope, 2 * se


# --- sweep execution -------------------------------------------------------


def _const_value(problem: AffineDiffusionProblem, M: int) -> float:
    mesh = Mesh(M)
    return qoi(problem, solve(problem, np.zeros(1), mesh), mesh)


def _sweep_mesh(plan: SweepPlan):
    fx, ref = plan.fixed, plan.reference
    s = int(fx.get("s", 0))
    digests = {"resolved": {"s": s, "m": int(fx.get("m", 6)) if s else None}}
    if s and plan.problem.c:
        rule = build_rule(plan.problem, s, int(fx.get("m", 6)), plan.order, plan.b)
        digests["rule"] = rule.digest()
        y = generate_points(rule).centered()

        def value(M):
            return math.fsum(sample_qoi(plan.problem, y, Mesh(M), plan.workers).tolist()) / len(y), len(y)
    else:
        def value(M):
            return _const_value(plan.problem, M), 1

    if "value" in ref:
        truth, resolution = float(ref["value"]), float(np.finfo(float).eps) * abs(float(ref["value"]))
    else:
        M_ref = int(ref.get("M", 4 * (plan.grid[-1] + 1) - 1))
        digests["resolved"]["reference_M"] = M_ref
        truth = value(M_ref)[0]
        resolution = _RESOLUTION * abs(truth)

    def row(M):
        est, n = value(M)
        return abs(est - truth), n * M, {"estimate": est, "h": 1.0 / (M + 1)}

    return truth, resolution, row, digests


def _sweep_truncation(plan: SweepPlan):
    fx, ref = plan.fixed, plan.reference
    s_ref = int(ref.get("s", 4 * plan.grid[-1]))
    M = int(fx.get("M", 255))
    rule = build_rule(plan.problem, s_ref, int(ref.get("m", fx.get("m", 8))), plan.order, plan.b,
                      workers=plan.workers)
    y = generate_points(rule).centered()
    mesh = Mesh(M)

    def mean(cols):
        yy = np.zeros_like(y)
        yy[:, :cols] = y[:, :cols]
        return math.fsum(sample_qoi(plan.problem, yy, mesh, plan.workers).tolist()) / len(y)

    truth = mean(s_ref)

    def row(s):
        est = mean(int(s))
        return abs(est - truth), len(y) * M, {"estimate": est}

    resolved = {"M": M, "reference_s": s_ref, "m": rule.m}
    return truth, _RESOLUTION * abs(truth), row, {"reference_rule": rule.digest(), "resolved": resolved}


def _qmc_reference(plan: SweepPlan, s: int, M: int):
    ref = plan.reference
    m_top = round(math.log(plan.grid[-1], plan.b))
    cand = ref.get("candidates", 32)
    rule = build_rule(plan.problem, s, int(ref.get("m", m_top + 3)), int(ref.get("alpha", plan.order + 1)),
                      plan.b, candidates=cand, workers=plan.workers)
    cfg = SingleLevelConfig(s, Mesh(M), rule)
    resolved = {"s": s, "M": M, "reference_m": rule.m, "reference_alpha": rule.alpha,
                "reference_candidates": cand}
    return run_single_level(plan.problem, cfg, plan.workers).value, rule.digest(), resolved


def _sweep_qmc(plan: SweepPlan):
    fx = plan.fixed
    s, M = int(fx.get("s", 16)), int(fx.get("M", 255))
    truth, ref_digest, resolved = _qmc_reference(plan, s, M)
    digests = {"reference_rule": ref_digest, "resolved": resolved}

    def row(N):
        m = round(math.log(N, plan.b))
        rule = build_rule(plan.problem, s, m, plan.order, plan.b, workers=plan.workers)
        digests[f"N={N}"] = rule.digest()
        est = run_single_level(plan.problem, SingleLevelConfig(s, Mesh(M), rule), plan.workers)
        return abs(est.value - truth), est.work, {"estimate": est.value, "rule": rule.digest()}

    return truth, _RESOLUTION * abs(truth), row, digests


def _sweep_mc(plan: SweepPlan):
    fx = plan.fixed
    s, M = int(fx.get("s", 16)), int(fx.get("M", 255))
    seeds = int(fx.get("seeds", 20))
    if "value" in plan.reference:
        truth, ref_digest, resolved = float(plan.reference["value"]), None, {"s": s, "M": M}
    else:
        truth, ref_digest, resolved = _qmc_reference(plan, s, M)
    resolved["seeds"] = seeds

    def row(N):
        errs = [mc_baseline(plan.problem, s, Mesh(M), int(N), seed, plan.workers).value - truth
                for seed in range(seeds)]
        rmse = math.sqrt(math.fsum(e * e for e in errs) / seeds)
        return rmse, int(N) * M, {"seeds": seeds}

    return truth, _RESOLUTION * abs(truth), row, {"reference_rule": ref_digest, "resolved": resolved}


def _sweep_ml(plan: SweepPlan):
    fx, ref = plan.fixed, plan.reference
    rates = Rates(plan.problem.p0, fx.get("p_t"), fx.get("t", 1.0), fx.get("t_prime", 1.0))
    M0, s0 = int(fx.get("M0", 63)), int(fx.get("s0", 64))
    digests = {"resolved": {"M0": M0, "s0": s0, "p_t": rates.p_t, "t": rates.t,
                            "t_prime": rates.t_prime}}

    def row(target):
        sched = optimize_schedule(rates, float(target), M0=M0, s0=s0, b=plan.b)
        sched = sched.with_rules(plan.problem, plan.order, workers=plan.workers)
        ml = run_multi_level(plan.problem, sched, plan.workers)
        top = sched.levels[-1]
        lv = single_level_counterpart(rates, float(target), top.M, top.s, plan.b)
        rule = build_rule(plan.problem, lv.s, lv.m, plan.order, plan.b, workers=plan.workers)
        sl = run_single_level(plan.problem, SingleLevelConfig(lv.s, Mesh(lv.M), rule), plan.workers)
        m_ref = max(lv.m, max(x.m for x in sched.levels)) + int(ref.get("extra_digits", 3))
        ref_rule = build_rule(plan.problem, 2 * lv.s, m_ref, plan.order + 1, plan.b,
                              candidates=ref.get("candidates", 16), workers=plan.workers)
        truth = run_single_level(
            plan.problem, SingleLevelConfig(2 * lv.s, Mesh(4 * (lv.M + 1) - 1), ref_rule), plan.workers
        ).value
        digests[f"target={target}"] = {"single": rule.digest(), "reference": ref_rule.digest(),
                                       "levels": [x.rule.digest() for x in sched.levels]}
        extra = {"estimate": ml.value, "reference": truth, "sl_estimate": sl.value,
                 "sl_error": abs(sl.value - truth), "sl_work": sl.work,
                 "levels": [[x.M, x.s, x.m] for x in sched.levels]}
        return abs(ml.value - truth), ml.work, extra

    return None, 0.0, row, digests


_RUNNERS = {"mesh": _sweep_mesh, "truncation": _sweep_truncation, "qmc-N": _sweep_qmc,
            "mc-N": _sweep_mc, "ml-vs-sl": _sweep_ml}
_ABSCISSA = {"mesh": "h", "truncation": "s", "qmc-N": "N", "mc-N": "N", "ml-vs-sl": "target"}


def _predicted(plan: SweepPlan) -> float:
    p0 = plan.problem.p0
    return {
        "mesh": 2.0,  # t + t' for piecewise-linear elements
        "truncation": -2 * (1 / p0 - 1),
        "qmc-N": -1 / p0,
        "mc-N": -0.5,
        "ml-vs-sl": 1.0,
    }[plan.axis]


def run_sweep(plan: SweepPlan) -> ConvergenceReport:
    """Evaluate every grid entry against the plan's reference and fit the slope."""
    truth, resolution, row_fn, digests = _RUNNERS[plan.axis](plan)
    floor = _FLOOR_FACTOR * resolution
    rows = []
    for v in plan.grid:
        try:
            err, work, extra = row_fn(v)
        except (ValueError, ArithmeticError) as exc:
            rows.append(Row(v, None, None, f"failed: {exc}"))
            continue
        status = "ok" if err > floor else "below-floor"
        rows.append(Row(v, float(err), int(work), status, extra))

    def x_of(r):
        return r.extra["h"] if plan.axis == "mesh" else float(r.value)

    usable = [(x_of(r), r.error) for r in rows if r.usable]
    try:
        slope, half = fit_slope(usable)
        degenerate = False
    except ValueError:
        slope, half, degenerate = None, None, True
    config = plan.to_dict()
    config["resolved"] = digests.pop("resolved", {})
    config["rule_digests"] = digests
    return ConvergenceReport(plan.axis, tuple(rows), _ABSCISSA[plan.axis], slope, half,
                             _predicted(plan), degenerate, truth, floor, config, _version())


# --- serialisation ---------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    return text if any(ch in text for ch in ".en") else text + ".0"


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _num(obj)


def dumps_json(obj) -> str:
    """JSON text with floats at 17 significant digits and a trailing newline."""
    return _encode(obj) + "\n"


def dumps_report(report: ConvergenceReport) -> str:
    return dumps_json(report.to_dict())


def emit(report: ConvergenceReport, fmt: str, path) -> Path:
    """Write ``report`` as CSV (``axis,value,error,work,slope_fit``) or JSON."""
    path = Path(path)
    if fmt == "json":
        path.write_text(dumps_report(report), encoding="utf-8")
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis", "value", "error", "work", "slope_fit"])
        slope = "" if report.slope is None else _num(report.slope)
        for r in report.rows:
            w.writerow([report.axis, _num(r.value), "" if r.error is None else _num(r.error),
                        "" if r.work is None else _num(r.work), slope])
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        raise ValueError(f"unknown format '{fmt}', expected csv or json")
    return path


def load_report(path) -> ConvergenceReport:
    return ConvergenceReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_plan(path, workers: int = 1) -> SweepPlan:
    """Read a TOML plan: axis, grid, problem-file or [problem], alpha, b, [fixed], [reference]."""
    path = Path(path)
    data = tomllib.loads(path.read_text(encoding="utf-8"))
    known = {"axis", "grid", "problem-file", "problem", "alpha", "b", "fixed", "reference"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown plan keys: {sorted(unknown)}")
    if "problem-file" in data:
        problem = load_problem(path.parent / data["problem-file"])
    else:
        problem = AffineDiffusionProblem(**data.get("problem", {}))
    return SweepPlan(axis=data["axis"], grid=tuple(data["grid"]), problem=problem,
                     fixed=data.get("fixed", {}), reference=data.get("reference", {}),
                     alpha=data.get("alpha"), b=data.get("b", 2), workers=workers)

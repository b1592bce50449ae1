"""Command line entry point ``hoqmc``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import dumps_json, emit, load_plan, run_sweep
from .cbc import SPODWeightSpec, cbc_construct
from .estimators import (
    Level,
    LevelSchedule,
    Rates,
    SingleLevelConfig,
    error_breakdown,
    mc_baseline,
    optimize_schedule,
    reference_config,
    run_multi_level,
    run_single_level,
)
from .pde import AffineDiffusionProblem, Mesh, beta_sequence, check_admissibility, load_problem
from .rules import format_rule_spec, generate_points, read_rule_spec, write_pointset


def _problem(args) -> AffineDiffusionProblem:
    return load_problem(args.problem_file) if args.problem_file else AffineDiffusionProblem()


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_beta(path) -> tuple[float, ...]:
    return tuple(float(v) for v in Path(path).read_text(encoding="utf-8").split())


def cmd_construct(args) -> int:
    if args.beta_file:
        beta = _read_beta(args.beta_file)
    else:
        beta = tuple(beta_sequence(_problem(args), args.s))
    if len(beta) < args.s:
        raise ValueError(f"beta file holds {len(beta)} values, need s={args.s}")
    weights = SPODWeightSpec(args.alpha, beta[: args.s])
    spec = cbc_construct(args.b, args.m, args.alpha, args.s, weights,
                         candidates=args.candidates, workers=args.workers)
    _write(format_rule_spec(spec), args.out)
    return 0


def cmd_points(args) -> int:
    spec = read_rule_spec(args.spec_file)
    write_pointset(generate_points(spec), args.out)
    return 0


def cmd_pde_check(args) -> int:
    report = check_admissibility(_problem(args), args.s_max)
    _write(dumps_json(report.to_dict()), args.out)
    return 0 if report.ok else 1


def cmd_run_single(args) -> int:
    problem = _problem(args)
    spec = read_rule_spec(args.spec_file)
    cfg = SingleLevelConfig(spec.s, Mesh(args.M), spec)
    est = run_single_level(problem, cfg, args.workers)
    report = {"estimate": est.value, "work_units": est.work, "n_points": est.n_points,
              "breakdown": None,
              "config": {"problem": problem.to_dict(), "M": args.M, "s": spec.s,
                         "rule": format_rule_spec(spec).splitlines()[1], "rule_digest": spec.digest()},
              "version": __version__}
    if args.breakdown:
        ref = reference_config(problem, cfg, candidates=args.candidates, workers=args.workers)
        report["breakdown"] = error_breakdown(problem, cfg, ref, args.workers).to_dict()
        report["config"]["reference"] = {"M": ref.mesh.M, "s": ref.s, "rule_digest": ref.spec.digest()}
    _write(dumps_json(report), args.out)
    return 0


def _read_schedule(path) -> LevelSchedule:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    levels = []
    for lv in data["levels"]:
        rule = read_rule_spec(path.parent / lv["spec_file"]) if lv.get("spec_file") else None
        levels.append(Level(int(lv["M"]), int(lv["s"]), int(lv["m"]), rule))
    return LevelSchedule(tuple(levels), b=int(data.get("b", 2)), alpha=data.get("alpha"))


def cmd_run_ml(args) -> int:
    problem = _problem(args)
    sched = _read_schedule(args.schedule_file)
    if any(lv.rule is None for lv in sched.levels):
        built = sched.with_rules(problem, workers=args.workers)
        sched = LevelSchedule(tuple(old if old.rule is not None else new
                                    for old, new in zip(sched.levels, built.levels)),
                              b=sched.b, alpha=built.alpha)
    est = run_multi_level(problem, sched, args.workers)
    report = {"estimate": est.value, "work_units": est.work, "n_points": est.n_points,
              "config": {"problem": problem.to_dict(), "schedule": sched.to_dict()},
              "version": __version__}
    _write(dumps_json(report), args.out)
    return 0


def cmd_optimize(args) -> int:
    rates = Rates(args.p0, args.p_t, args.t, args.t_prime)
    sched = optimize_schedule(rates, args.target, M0=args.M0, s0=args.s0, b=args.b,
                              max_m=args.max_m, max_M=args.max_M)
    _write(dumps_json(sched.to_dict()), args.out)
    return 0


def cmd_mc(args) -> int:
    problem = _problem(args)
    est = mc_baseline(problem, args.s, Mesh(args.M), args.N, args.seed, args.workers)
    report = {"estimate": est.value, "stderr": est.stderr, "work_units": est.work,
              "n_points": est.n_points,
              "config": {"problem": problem.to_dict(), "s": args.s, "M": args.M, "N": args.N,
                         "seed": args.seed},
              "version": __version__}
    _write(dumps_json(report), args.out)
    return 0


def cmd_bench(args) -> int:
    plan = load_plan(args.plan, workers=args.workers)
    report = run_sweep(plan)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.plan).stem
    emit(report, "json", out / f"{stem}.json")
    emit(report, "csv", out / f"{stem}.csv")
    slope = "degenerate" if report.degenerate else f"{report.slope:.3f} +- {report.halfwidth:.3f}"
    print(f"{report.axis}: slope {slope} (predicted {report.predicted:g}), "
          f"{sum(r.usable for r in report.rows)}/{len(report.rows)} rows fitted")
    return 0 if report.all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hoqmc", description="Higher-order QMC for parametric diffusion")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        if problem:
            sp.add_argument("--problem-file", help="TOML problem description (default problem if omitted)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", help="output path (stdout if omitted)")

    sp = sub.add_parser("construct", help="CBC construction of an interlaced polynomial lattice rule")
    sp.add_argument("--b", type=int, default=2)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--alpha", type=int, required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--beta-file", help="whitespace-separated beta_1..beta_s (else from the problem)")
    sp.add_argument("--candidates", type=int, help="random candidate subset per step")
    common(sp)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("points", help="write the point set of a rule spec")
    sp.add_argument("--spec-file", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_points)

    sp = sub.add_parser("pde-check", help="admissibility report as JSON")
    sp.add_argument("--s-max", type=int, default=1000)
    common(sp)
    sp.set_defaults(func=cmd_pde_check)

    sp = sub.add_parser("run-single", help="single-level QMC estimate")
    sp.add_argument("--spec-file", required=True)
    sp.add_argument("--M", type=int, required=True)
    sp.add_argument("--breakdown", action="store_true", help="add the error breakdown vs an overkill reference")
    sp.add_argument("--candidates", type=int, default=32)
    common(sp)
    sp.set_defaults(func=cmd_run_single)

    sp = sub.add_parser("run-ml", help="multi-level QMC estimate")
    sp.add_argument("--schedule-file", required=True)
    common(sp)
    sp.set_defaults(func=cmd_run_ml)

    sp = sub.add_parser("optimize", help="level schedule for a target error")
    sp.add_argument("--p0", type=float, default=0.5)
    sp.add_argument("--p-t", type=float)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--t-prime", type=float, default=1.0)
    sp.add_argument("--target", type=float, required=True)
    sp.add_argument("--M0", type=int, default=63)
    sp.add_argument("--s0", type=int, default=64)
    sp.add_argument("--b", type=int, default=2)
    sp.add_argument("--max-m", type=int, default=20)
    sp.add_argument("--max-M", type=int, default=1 << 16)
    common(sp, problem=False)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("mc", help="plain Monte Carlo baseline")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--s", type=int, default=16)
    sp.add_argument("--M", type=int, default=255)
    common(sp)
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("bench", help="run a convergence sweep plan")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"hoqmc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Multi-level QMC versus a single-level rule at the same target accuracy.

The optimizer picks mesh widths, truncation dimensions and rule sizes per
level; the single-level counterpart uses the finest level's mesh and
dimension. Both are compared with an overkill reference.

    python demos/03_multilevel.py [--target 3e-4] [--workers 4]
"""

import argparse

from hoqmc import AffineDiffusionProblem, Mesh, Rates, SingleLevelConfig, optimize_schedule
from hoqmc.estimators import (
    build_rule,
    error_breakdown,
    reference_config,
    run_multi_level,
    run_single_level,
    single_level_counterpart,
)

ap = argparse.ArgumentParser()
ap.add_argument("--target", type=float, default=3e-4)
ap.add_argument("--workers", type=int, default=1)
args = ap.parse_args()

problem = AffineDiffusionProblem()
rates = Rates(problem.p0)

sched = optimize_schedule(rates, args.target, M0=63, s0=64)
for i, lv in enumerate(sched.levels):
    print(f"level {i}: M={lv.M:4d} s={lv.s:4d} N=2^{lv.m}")
sched = sched.with_rules(problem, workers=args.workers)
ml = run_multi_level(problem, sched, args.workers)

top = sched.levels[-1]
lv = single_level_counterpart(rates, args.target, top.M, top.s)
cfg = SingleLevelConfig(lv.s, Mesh(lv.M), build_rule(problem, lv.s, lv.m, workers=args.workers))
sl = run_single_level(problem, cfg, args.workers)

print("building the overkill reference (takes a few seconds)...")
ref = reference_config(problem, cfg, candidates=16, workers=args.workers)
parts = error_breakdown(problem, cfg, ref, args.workers)

print(f"multi-level : {ml.value:.12f}  error {abs(ml.value - parts.reference):.2e}  work {ml.work}")
print(f"single-level: {sl.value:.12f}  error {abs(sl.value - parts.reference):.2e}  work {sl.work}")
print(f"single-level breakdown: truncation {parts.truncation:.2e}, "
      f"integration {parts.integration:.2e}, discretization {parts.pg:.2e}")

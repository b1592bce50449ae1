"""Run the convergence sweeps and print the fitted slopes.

Each sweep varies one axis (mesh width, truncation dimension, number of QMC
or MC points) against an overkill reference. Writes JSON and CSV reports to
``demo_reports/`` next to the working directory.

    python demos/02_convergence_sweeps.py [--workers 4] [--quick]
"""

import argparse
from pathlib import Path

from hoqmc import AffineDiffusionProblem
from hoqmc.bench import SweepPlan, emit, run_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--workers", type=int, default=1)
ap.add_argument("--quick", action="store_true", help="smaller QMC grid")
args = ap.parse_args()

out = Path("demo_reports")
out.mkdir(exist_ok=True)
problem = AffineDiffusionProblem()
top = 8 if args.quick else 10
qmc_grid = tuple(2**m for m in range(4, top + 1))

plans = {
    "mesh": SweepPlan("mesh", (15, 31, 63, 127, 255), AffineDiffusionProblem(c=0.0),
                      reference={"value": 1 / 12}),
    "truncation": SweepPlan("truncation", (2, 4, 8, 16, 32), problem, fixed={"M": 255, "m": 8},
                            reference={"s": 128}, workers=args.workers),
    "qmc": SweepPlan("qmc-N", qmc_grid, problem, fixed={"s": 16, "M": 255}, workers=args.workers),
}
reports = {}
for name, plan in plans.items():
    rep = reports[name] = run_sweep(plan)
    emit(rep, "json", out / f"{name}.json")
    emit(rep, "csv", out / f"{name}.csv")
    print(f"{name:>10}: slope {rep.slope:+.2f} +- {rep.halfwidth:.2f} (predicted {rep.predicted:+.1f})")

# MC on the same grid against the QMC reference value
mc = run_sweep(SweepPlan("mc-N", qmc_grid, problem, fixed={"s": 16, "M": 255, "seeds": 20},
                         reference={"value": reports["qmc"].reference}, workers=args.workers))
emit(mc, "json", out / "mc.json")
print(f"{'mc':>10}: slope {mc.slope:+.2f} +- {mc.halfwidth:.2f} (predicted {mc.predicted:+.1f})")

print("\n     N    QMC error     MC RMSE")
for q, r in zip(reports["qmc"].rows, mc.rows):
    print(f"{q.value:6d}  {q.error:11.3e}  {r.error:10.3e}")

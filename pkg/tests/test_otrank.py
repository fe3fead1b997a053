"""Transport-based axiswise operators and the squash preprocessing."""

import numpy as np
import pytest

import softops.otrank as ot
from softops.core import ConfigError, Mode, SoftConfig, fd_jacobian, jacobian
from softops.solvers import SolverParams

from oracles import (hard_argsort_matrix, hard_quantile_pair, hard_rank,
                     hard_sort, hard_topk_values, spread_sample)

ALL_MODES = list(Mode)
CRISP = SoftConfig(tau=1e-3)


def spread(rng, n, scale=1.0):
    x = np.arange(n, dtype=float) * 0.7 + rng.uniform(-0.15, 0.15, n)
    rng.shuffle(x)
    return x * scale


class TestSquash:
    def test_symmetric_inputs_map_symmetrically(self):
        x = np.array([-2.0, -1.0, 1.0, 2.0])
        xt, _ = ot.standardize_squash(x)
        assert np.allclose(xt + xt[::-1], 1.0, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.normal(size=6) * rng.uniform(0.1, 10)
            xt, st = ot.standardize_squash(x)
            assert np.abs(ot.unsquash_destandardize(xt, st) - x).max() < 1e-10

    def test_constant_input_guarded(self):
        xt, _ = ot.standardize_squash(np.full(5, 3.3))
        assert np.allclose(xt, 0.5)


class TestOtSpecValidation:
    def test_marginals_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ot.OtSpec(a=np.array([0.6, 0.6]), b=np.array([0.5, 0.5]),
                      y=np.array([0.0, 1.0]), plan_scale=2.0)

    def test_anchors_must_be_monotone(self):
        with pytest.raises(ValueError):
            ot.OtSpec(a=np.full(3, 1 / 3), b=np.full(3, 1 / 3),
                      y=np.array([0.0, 2.0, 1.0]), plan_scale=3.0)
        # descending anchors (the top-k layout) are fine
        ot.OtSpec(a=np.full(3, 1 / 3), b=np.full(3, 1 / 3),
                  y=np.array([1.0, 0.5, 0.0]), plan_scale=3.0)


class TestArgsortSortRank:
    def test_crisp_argsort_matches_hard(self):
        x = np.array([0.3, 1.0, -0.5])
        P = ot.ot_argsort(x, CRISP).values
        assert np.abs(P - hard_argsort_matrix(x)).max() < 1e-2

    def test_constant_input_uniform(self):
        P = ot.ot_argsort(np.ones(4), SoftConfig(tau=0.1)).values
        assert np.allclose(P, 0.25, atol=1e-6)

    def test_doubly_stochastic(self):
        rng = np.random.default_rng(1)
        for tau in [0.01, 0.1, 0.5]:
            P = ot.ot_argsort(rng.normal(size=6), SoftConfig(tau=tau)).values
            assert np.abs(P.sum(0) - 1).max() <= 1e-6
            assert np.abs(P.sum(1) - 1).max() <= 1e-6

    def test_constant_ranks(self):
        r = ot.ot_rank(np.full(5, 2.0), SoftConfig(tau=0.2))
        assert np.allclose(r, 3.0, atol=1e-6)

    def test_rank_sum_identity(self):
        rng = np.random.default_rng(2)
        for tau in [0.05, 0.3]:
            x = rng.normal(size=7)
            r = ot.ot_rank(x, SoftConfig(tau=tau))
            assert r.sum() == pytest.approx(28.0, abs=1e-6)

    @pytest.mark.parametrize("mode", ALL_MODES)
    def test_hard_limits(self, mode):
        # Entropic plans carry an off-vertex mass floor of roughly
        # exp(-gap_x * gap_y / tau); post-squash gaps cap near 0.045 at
        # n = 16, so smooth mode is crisp at tau = 1e-3 only for smaller n.
        # The sparse modes hit the exact vertex at any size.
        rng = np.random.default_rng(3)
        params = SolverParams(max_iter=20000, tol=1e-6)
        sizes = [4, 8] if mode is Mode.SMOOTH else [4, 8, 16]
        for n in sizes:
            x = spread_sample(rng, n)
            cfg = SoftConfig(tau=1e-3, mode=mode)
            assert np.abs(ot.ot_sort(x, cfg, params)
                          - hard_sort(x)).max() < 1e-2
            assert np.abs(ot.ot_rank(x, cfg, params)
                          - hard_rank(x)).max() < 1e-2

    def test_rank_monotone_in_value(self):
        rng = np.random.default_rng(4)
        for tau in [0.05, 0.3, 1.0]:
            x = spread(rng, 6)
            r = ot.ot_rank(x, SoftConfig(tau=tau))
            order = np.argsort(x)
            assert np.all(np.diff(r[order]) < 0)  # larger value, smaller rank

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        x = spread(rng, 6)
        perm = rng.permutation(6)
        cfg = SoftConfig(tau=0.2)
        assert np.allclose(ot.ot_sort(x[perm], cfg), ot.ot_sort(x, cfg),
                           atol=1e-8)
        assert np.allclose(ot.ot_rank(x[perm], cfg), ot.ot_rank(x, cfg)[perm],
                           atol=1e-8)

    def test_sort_jacobian_vs_fd(self):
        rng = np.random.default_rng(6)
        x = spread(rng, 4)
        params = SolverParams(max_iter=20000, tol=1e-8)
        for mode in ALL_MODES:
            cfg = SoftConfig(tau=0.3, mode=mode)
            f = lambda v: ot.ot_sort(v, cfg, params)
            J = jacobian(f, x)
            Jfd = fd_jacobian(f, x, h=1e-3)
            assert np.max(np.abs(J - Jfd)) / max(1, np.abs(Jfd).max()) < 1e-3


class TestTopkMaxMin:
    def test_crisp_topk(self):
        rng = np.random.default_rng(7)
        x = spread(rng, 6)
        vals, P = ot.ot_topk(x, 2, CRISP)
        assert np.abs(vals - hard_topk_values(x, 2)).max() < 1e-2
        assert np.abs(P.values.sum(1) - 1).max() <= 1e-6

    def test_argmax_concentrates(self):
        rng = np.random.default_rng(8)
        x = spread(rng, 6)
        val, idx = ot.ot_max(x, CRISP)
        assert idx.values[np.argmax(x)] >= 0.99
        assert val == pytest.approx(x.max(), abs=1e-2)

    def test_min_is_negated_max(self):
        rng = np.random.default_rng(9)
        x = spread(rng, 5)
        vmin, _ = ot.ot_min(x, CRISP)
        vmax, _ = ot.ot_max(-x, CRISP)
        assert vmin == pytest.approx(-vmax, abs=1e-12)
        assert vmin == pytest.approx(x.min(), abs=1e-2)

    def test_k_out_of_range(self):
        with pytest.raises(ConfigError):
            ot.ot_topk(np.ones(4), 4, SoftConfig(tau=0.1))
        with pytest.raises(ConfigError):
            ot.ot_topk(np.ones(4), 0, SoftConfig(tau=0.1))

    def test_constant_input_uniform_row(self):
        _, P = ot.ot_topk(np.full(5, 1.2), 1, SoftConfig(tau=0.2))
        assert np.allclose(P.values[0], 0.2, atol=1e-6)


class TestQuantile:
    def test_symmetric_median_midpoint(self):
        x = np.array([-2.0, -1.0, 1.0, 2.0])
        m = ot.ot_median(x, SoftConfig(tau=0.05))
        assert m == pytest.approx(0.0, abs=1e-8)

    def test_crisp_quantiles_match_order_statistics(self):
        rng = np.random.default_rng(10)
        for n in [5, 8, 12]:
            x = spread(rng, n)
            for q in [0.1, 0.25, 0.5, 0.8]:
                lo, hi = hard_quantile_pair(x, q)
                got_lo = ot.ot_quantile(x, q, CRISP, "lower")
                got_hi = ot.ot_quantile(x, q, CRISP, "upper")
                assert got_lo == pytest.approx(lo, abs=1e-2)
                assert got_hi == pytest.approx(hi, abs=1e-2)

    def test_q_zero_clamps_to_min(self):
        rng = np.random.default_rng(11)
        x = spread(rng, 6)
        got = ot.ot_quantile(x, 0.0, CRISP, "lower")
        assert got == pytest.approx(x.min(), abs=1e-2)

    def test_interpolate_between_bounds(self):
        rng = np.random.default_rng(12)
        x = spread(rng, 8)
        q = 0.3
        lo = ot.ot_quantile(x, q, CRISP, "lower")
        hi = ot.ot_quantile(x, q, CRISP, "upper")
        mid = ot.ot_quantile(x, q, CRISP, "interpolate")
        frac = q * 7 - np.floor(q * 7)
        assert mid == pytest.approx((1 - frac) * lo + frac * hi, abs=1e-10)

    def test_small_n_rejected(self):
        with pytest.raises(ConfigError):
            ot.ot_quantile(np.ones(3), 0.5, SoftConfig(tau=0.1))

    def test_bad_q_rejected(self):
        with pytest.raises(ConfigError):
            ot.ot_quantile(np.ones(5), 1.5, SoftConfig(tau=0.1))

    def test_argquantile_rows_are_indexes(self):
        rng = np.random.default_rng(13)
        x = spread(rng, 8)
        idx = ot.ot_argquantile(x, 0.25, CRISP, "lower")
        k = int(np.floor(0.25 * 7))
        assert idx.hard() == int(np.argsort(x)[k])

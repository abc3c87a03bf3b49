import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from w2fair.empirical import (
    ValueGrid,
    build_cdf,
    cdf_at,
    cor,
    exact_wasserstein,
    group_cdfs,
    inverse_cdf,
    locate_bin,
    locate_bins,
    make_grid,
    w1_distance,
    w2_distance,
)

from oracles import (
    count_below,
    linear_scan_bin,
    order_statistic_quantile,
    rank_transport,
    sorted_matching_cost,
)


class TestMakeGrid:
    def test_no_pad_spans_exactly(self):
        g = make_grid([0.2, 0.8], 10, pad=0.0)
        assert g.lo == 0.2
        assert 0.8 < g.hi < 0.8 + 1e-12

    def test_degenerate_unit_window(self):
        g = make_grid([0.5, 0.5, 0.5], 10)
        assert (g.lo, g.hi) == (0.0, 1.0)

    def test_degenerate_outside_unit(self):
        g = make_grid([3.0, 3.0], 10)
        assert (g.lo, g.hi) == (2.5, 3.5)

    def test_uniform_draw_inside(self, rng):
        scores = rng.uniform(0, 1, 1000)
        g = make_grid(scores, 50, pad=0.0)
        assert np.all(g.contains(scores))
        assert g.eta[-1] > scores.max()

    def test_pad(self):
        g = make_grid([0.0, 1.0], 4, pad=0.25)
        assert (g.lo, g.hi) == (-0.25, 1.25)
        assert np.allclose(g.eta, [-0.25, 0.125, 0.5, 0.875, 1.25])

    def test_empty(self):
        with pytest.raises(ValueError, match="empty score set"):
            make_grid([], 10)


class TestBuildCdf:
    def test_hand_counts(self):
        cdf = build_cdf([0.1, 0.5, 0.9], ValueGrid(0.0, 1.0, 10))
        # values[j-1] is H at eta_j = 0.1 j
        assert cdf.values[1] == pytest.approx(1 / 3)
        assert cdf.values[5] == pytest.approx(2 / 3)
        assert cdf.values[9] == 1.0

    def test_single_score_step(self):
        cdf = build_cdf([0.5], ValueGrid(0.0, 1.0, 10))
        assert list(cdf.values) == [0] * 5 + [1] * 5

    def test_deterministic(self, rng):
        scores = rng.random(100)
        g = make_grid(scores, 20)
        assert build_cdf(scores, g) == build_cdf(scores.copy(), g)

    def test_empty_group(self):
        with pytest.raises(ValueError, match="empty group"):
            build_cdf([], ValueGrid(0, 1, 4))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.integers(2, 30))
    def test_properties_against_counting(self, scores, J):
        grid = make_grid(scores, J, pad=0.0)
        cdf = build_cdf(scores, grid)
        n = len(scores)
        assert np.all(np.diff(cdf.values) >= 0)
        assert np.all((cdf.values >= 0) & (cdf.values <= 1))
        assert cdf.values[-1] == 1.0
        for j, knot in enumerate(grid.eta):
            assert cdf.counts[j] == count_below(scores, knot)
        assert np.allclose(cdf.values * n, np.round(cdf.values * n))


class TestLocateBin:
    def test_regular_grid(self):
        g = ValueGrid(0.0, 1.0, 10)
        j, clamped = locate_bin(g, 0.55)
        assert j == 6 and not clamped
        assert g.eta[j - 1] <= 0.55 < g.eta[j]

    def test_lower_boundary(self):
        assert locate_bin(ValueGrid(0.0, 1.0, 10), 0.0) == (1, False)

    def test_out_of_grid_clamped(self):
        g = ValueGrid(0.0, 1.0, 10)
        assert locate_bin(g, -0.3) == (1, True)
        assert locate_bin(g, 1.0) == (10, True)
        assert locate_bin(g, 7.0) == (10, True)

    def test_randomized_against_linear_scan(self, rng):
        for trial in range(20):
            lo = rng.uniform(-3, 3)
            g = ValueGrid(lo, lo + rng.uniform(0.1, 5), int(rng.integers(2, 300)))
            vs = rng.uniform(g.lo, g.hi, 500)
            idx, clamped = locate_bins(g, vs)
            assert not clamped.any()
            for v, j in zip(vs, idx):
                assert j == linear_scan_bin(g.eta, v)


class TestInverseCdf:
    def test_point_mass(self):
        g = ValueGrid(0.0, 1.0, 10)
        cdf = build_cdf([0.5], g)
        assert abs(inverse_cdf(cdf, 0.7) - 0.5) <= g.step

    def test_flat_run_left_edge(self):
        g = make_grid([0.0, 1.0], 10, pad=0.0)
        cdf = build_cdf([0.0, 1.0], g)
        assert inverse_cdf(cdf, 0.5) == g.eta[1]

    def test_against_order_statistics(self, rng):
        sample = rng.uniform(0, 1, 1000)
        g = make_grid(sample, 200)
        cdf = build_cdf(sample, g)
        for tau in np.linspace(0.01, 0.99, 50):
            assert abs(inverse_cdf(cdf, tau) - order_statistic_quantile(sample, tau)) <= 2 * g.step

    def test_roundtrip_with_cdf(self, rng):
        sample = rng.normal(size=400)
        cdf = build_cdf(sample, make_grid(sample, 64))
        taus = np.linspace(0.05, 0.95, 19)
        assert np.allclose(cdf_at(cdf, inverse_cdf(cdf, taus)), taus)

    def test_tau_clamped(self):
        cdf = build_cdf([0.5], ValueGrid(0.0, 1.0, 10))
        assert inverse_cdf(cdf, 2.0) == inverse_cdf(cdf, 1.0)


class TestCor:
    def test_identity_coupling(self, rng):
        sample = rng.uniform(0, 1, 2000)
        g = make_grid(sample, 100)
        cdf = build_cdf(sample, g)
        vs = rng.uniform(g.eta[1], g.eta[-2], 500)
        assert np.max(np.abs(cor(cdf, cdf, vs) - vs)) <= 2 * g.step

    def test_identity_at_sample_points(self, rng):
        sample = rng.normal(size=50)
        g = make_grid(sample, 400)
        cdf = build_cdf(sample, g)
        assert np.max(np.abs(cor(cdf, cdf, sample) - sample)) <= 2 * g.step

    def test_point_masses(self):
        g = make_grid([0.2, 0.7], 50, pad=0.01)
        a, b = build_cdf([0.2], g), build_cdf([0.7], g)
        assert abs(cor(a, b, 0.2) - 0.7) <= 2 * g.step

    def test_against_rank_transport(self, rng):
        src, dst = rng.uniform(0, 1, 500), rng.beta(2, 5, 500)
        g = make_grid(np.concatenate([src, dst]), 200)
        a, b = build_cdf(src, g), build_cdf(dst, g)
        for v in rng.uniform(0.05, 0.95, 100):
            assert abs(cor(a, b, v) - rank_transport(src, dst, v)) <= 3 * g.step


class TestDistances:
    def test_identical_is_zero(self, rng):
        s = rng.random(100)
        cdf = build_cdf(s, make_grid(s, 50))
        assert w2_distance(cdf, cdf) == 0.0
        assert w1_distance(cdf, cdf) == 0.0

    def test_point_masses(self):
        a0, a1 = group_cdfs([0.2, 0.6], [0, 1], 100)
        step = a0.grid.step
        assert abs(w2_distance(a0, a1) - 0.16) <= 4 * step
        assert abs(w1_distance(a0, a1) - 0.4) <= 4 * step

    @pytest.mark.parametrize("p,dist", [(2, w2_distance), (1, w1_distance)])
    def test_sorted_matching(self, rng, p, dist):
        for _ in range(20):
            a, b = rng.random(64), rng.random(64) ** 2
            c0, c1 = group_cdfs(np.concatenate([a, b]), np.repeat([0, 1], 64), 400)
            assert abs(dist(c0, c1) - sorted_matching_cost(a, b, p)) <= 5 * c0.grid.step

    def test_symmetric(self, rng):
        c0, c1 = group_cdfs(rng.random(80), rng.integers(0, 2, 80), 40)
        assert w2_distance(c0, c1) == w2_distance(c1, c0)
        assert w1_distance(c0, c1) == w1_distance(c1, c0)

    def test_grid_mismatch(self):
        a = build_cdf([0.5], ValueGrid(0, 1, 10))
        b = build_cdf([0.5], ValueGrid(0, 1, 20))
        with pytest.raises(ValueError, match="grid mismatch"):
            w2_distance(a, b)

    @pytest.mark.parametrize("J", [25, 50, 100, 200, 400, 800])
    def test_error_within_grid_step(self, J):
        # the quantile error is at most one step, so the W2 error is at most 2 * range * step
        rng = np.random.default_rng(7)
        a, b = rng.random(256), rng.beta(2, 3, 256)
        values, groups = np.concatenate([a, b]), np.repeat([0, 1], 256)
        c0, c1 = group_cdfs(values, groups, J)
        assert abs(w2_distance(c0, c1) - sorted_matching_cost(a, b)) <= 2 * c0.grid.step


class TestExactWasserstein:
    def test_equal_sizes_match_sorting(self, rng):
        a, b = rng.random(30), rng.random(30)
        assert exact_wasserstein(a, b, 2) == pytest.approx(sorted_matching_cost(a, b, 2), abs=1e-14)

    def test_w1_matches_scipy(self, rng):
        from scipy.stats import wasserstein_distance

        a, b = rng.normal(size=37), rng.normal(1, 2, size=53)
        assert exact_wasserstein(a, b, 1) == pytest.approx(wasserstein_distance(a, b), rel=1e-12)

    def test_unequal_sizes_by_replication(self, rng):
        # a sample repeated k times is the same empirical distribution
        a, b = rng.random(6), rng.random(4)
        assert exact_wasserstein(a, b) == pytest.approx(
            sorted_matching_cost(np.repeat(a, 2), np.repeat(b, 3)), abs=1e-14
        )

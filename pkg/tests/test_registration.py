import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from occgrid.errors import NoOverlapWarning, PyramidTruncatedWarning
from occgrid.grid import Grid2D, new_grid
from occgrid.pose import PoseAT
from occgrid.registration import SearchWindow, build_pyramid, correlation_score, solve_motion

RES = 0.1


def _random_map(seed, n=48):
    rng = np.random.default_rng(seed)
    g = new_grid(n, n, RES)
    g.values[:] = np.where(rng.random((n, n)) < 0.15, 0.9, 0.2)
    return g


def _shifted_view(g, sx, sy):
    """A view whose cell (ix, iy) shows the map's cell (ix + sx, iy + sy)."""
    vals = np.full(g.shape, 0.5)
    h, w = g.shape
    for iy in range(h):
        for ix in range(w):
            if 0 <= iy + sy < h and 0 <= ix + sx < w:
                vals[iy, ix] = g.values[iy + sy, ix + sx]
    return g.with_values(vals)


class TestScore:
    def test_unknown_partner_scores_zero(self):
        g = _random_map(1)
        assert correlation_score(g, g.blank()) == 0.0
        assert correlation_score(g.blank(), g, (0.3, -0.2, 0.4)) == 0.0

    def test_identity_is_best_for_a_self_match(self):
        g = _random_map(2)
        best = correlation_score(g, g)
        for t in [(RES, 0, 0), (0, -2 * RES, 0), (0.5 * RES, 0.5 * RES, 0), (0, 0, 0.05), (3 * RES, RES, -0.1)]:
            assert correlation_score(g, g, t) < best

    def test_one_cell_translate(self):
        g = _random_map(3)
        moved = Grid2D(g.width, g.height, RES, (RES, 0.0, 0.0), g.values)
        assert correlation_score(g, moved, (RES, 0, 0)) == pytest.approx(correlation_score(g, g), abs=1e-12)

    def test_disjoint(self):
        g = _random_map(4)
        with pytest.warns(NoOverlapWarning):
            assert correlation_score(g, g, (100.0, 0, 0)) == 0.0

    def test_hand_computed(self):
        a = Grid2D(2, 1, 1.0, values=[[0.9, 0.2]])
        b = Grid2D(2, 1, 1.0, values=[[0.7, 0.5]])
        # (0.8)(0.4) + (-0.6)(0) over two cells
        assert correlation_score(a, b) == pytest.approx(0.16)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(-6, 6), st.integers(-6, 6))
    def test_symmetric_under_inverse_integer_shift(self, seed, sx, sy):
        a, b = _random_map(seed, 20), _random_map(seed + 1, 20)
        t, t_inv = (sx * RES, sy * RES, 0.0), (-sx * RES, -sy * RES, 0.0)
        assert correlation_score(a, b, t) == pytest.approx(correlation_score(b, a, t_inv), abs=1e-9)


class TestPyramid:
    def test_uniform(self):
        g = new_grid(8, 8, RES)
        g.values[:] = 0.3
        for level in build_pyramid(g, 4):
            assert np.allclose(level.values, 0.3, rtol=0, atol=1e-15)

    def test_block_average(self):
        g = Grid2D(2, 2, 1.0, values=[[0.9, 0.9], [0.1, 0.1]])
        assert build_pyramid(g, 2)[1].values.tolist() == [[0.5]]

    def test_sizes(self):
        assert [lv.shape for lv in build_pyramid(new_grid(4, 4, 1.0), 3)] == [(4, 4), (2, 2), (1, 1)]

    def test_resolution_doubles(self):
        assert [lv.resolution for lv in build_pyramid(new_grid(8, 8, 0.25), 3)] == [0.25, 0.5, 1.0]

    def test_truncated(self):
        with pytest.warns(PyramidTruncatedWarning):
            assert len(build_pyramid(new_grid(2, 2, 1.0), 4)) == 2

    def test_levels_must_be_positive(self):
        with pytest.raises(ValueError):
            build_pyramid(new_grid(2, 2, 1.0), 0)

    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 1000))
    def test_mean_preserved_on_even_sides(self, kw, kh, seed):
        rng = np.random.default_rng(seed)
        g = Grid2D(4 * kw, 4 * kh, 1.0, values=rng.uniform(0.01, 0.99, (4 * kh, 4 * kw)))
        levels = build_pyramid(g, 3)
        for a, b in zip(levels, levels[1:]):
            assert b.values.mean() == pytest.approx(a.values.mean(), abs=1e-12)

    @given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 1000))
    def test_padding_accounts_for_odd_sides(self, w, h, seed):
        rng = np.random.default_rng(seed)
        g = Grid2D(w, h, 1.0, values=rng.uniform(0.01, 0.99, (h, w)))
        assume(max(w, h) > 1)
        fine, coarse = build_pyramid(g, 2)
        pad = 4 * coarse.values.size - fine.values.size
        assert 4 * coarse.values.sum() == pytest.approx(fine.values.sum() + 0.5 * pad, abs=1e-12)


class TestSearchWindow:
    def test_step_larger_than_half_width(self):
        with pytest.raises(ValueError):
            SearchWindow(0.1, 0.1, 0.1, 0.2, 0.01)

    def test_non_positive_step(self):
        with pytest.raises(ValueError):
            SearchWindow(0.1, 0.1, 0.1, 0.0, 0.01)


class TestSolveMotion:
    window = SearchWindow.in_cells(RES, 6, 5.0, 1.0, 3)

    def test_recovers_integer_shift_on_the_lattice(self):
        g = _random_map(0)
        est = solve_motion(_shifted_view(g, 3, -2), g, PoseAT.identity(), self.window, refine=False)
        assert est.informative
        np.testing.assert_array_equal(np.round(est.pose.mean / [RES, RES, 1.0], 12), [3.0, -2.0, 0.0])

    def test_refined_shift_stays_within_a_hundredth_of_a_cell(self):
        g = _random_map(0)
        est = solve_motion(_shifted_view(g, 3, -2), g, PoseAT.identity(), self.window)
        np.testing.assert_allclose(est.pose.mean[:2] / RES, [3.0, -2.0], atol=0.01)
        assert abs(est.pose.mean[2]) < 0.01 * self.window.step_theta

    def test_self_match_is_identity(self):
        g = _random_map(5)
        est = solve_motion(g, g, PoseAT.identity(), self.window, refine=False)
        assert np.all(est.pose.mean == 0)

    def test_covariance_floor_and_shape(self):
        g = _random_map(5)
        est = solve_motion(g, g, PoseAT.identity(), self.window)
        d = np.diag(est.pose.cov)
        assert d[0] >= (0.5 * RES) ** 2 and d[2] >= (0.5 * self.window.step_theta) ** 2
        assert np.count_nonzero(est.pose.cov - np.diag(d)) == 0

    def test_unknown_view_returns_prior(self):
        g = _random_map(6)
        prior = PoseAT([0.1, 0.0, 0.02], np.eye(3) * 0.01)
        est = solve_motion(g.blank(), g, prior, self.window)
        assert not est.informative
        assert est.pose is prior

    def test_prior_offsets_the_search(self):
        g = _random_map(7)
        view = _shifted_view(g, 8, 0)
        prior = PoseAT([6 * RES, 0.0, 0.0])
        est = solve_motion(view, g, prior, self.window, refine=False)
        assert est.pose.mean[0] == pytest.approx(8 * RES, abs=1e-12)
        assert math.isclose(est.pose.mean[1], 0.0, abs_tol=1e-12)

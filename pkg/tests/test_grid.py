import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occgrid.grid import (
    EPS,
    CellLabel,
    Disc,
    Grid2D,
    PolarGrid,
    Polygon,
    Segment,
    cell_to_world,
    label_cell,
    label_grid,
    new_grid,
    resample_grid,
    resample_polar_to_cartesian,
    scan_convert,
    world_to_cell,
)

probs = st.floats(0.0, 1.0, allow_nan=False)
bands = st.floats(0.0, 0.49)


class TestNewGrid:
    def test_ten_by_ten_is_half(self):
        g = new_grid(10, 10, 0.1)
        assert g.values.shape == (10, 10)
        assert np.all(g.values == 0.5)

    def test_single_cell(self):
        g = new_grid(1, 1, 1.0)
        assert g.values.tolist() == [[0.5]]

    def test_corner_cell_center_with_offset_origin(self):
        g = new_grid(3, 2, 0.25, (1.0, 1.0, 0.0))
        assert cell_to_world(g, (0, 0)) == pytest.approx((1.125, 1.125))

    @pytest.mark.parametrize("w,h,res", [(0, 3, 0.1), (3, -1, 0.1), (3, 3, 0.0), (3, 3, -0.5)])
    def test_rejects_bad_geometry(self, w, h, res):
        with pytest.raises(ValueError):
            new_grid(w, h, res)

    def test_values_are_clamped(self):
        g = Grid2D(2, 1, 1.0, values=[[0.0, 1.0]])
        assert g.values[0, 0] == EPS
        assert g.values[0, 1] == 1.0 - EPS


class TestWorldToCell:
    def test_inside(self):
        assert world_to_cell(new_grid(10, 10, 0.1), (0.05, 0.05)) == (0, 0)

    def test_outside(self):
        assert world_to_cell(new_grid(10, 10, 0.1), (-0.01, 0.0)) is None

    def test_shared_edge_goes_to_larger_index(self):
        assert world_to_cell(new_grid(10, 10, 0.1), (0.2, 0.05)) == (2, 0)

    def test_far_edge_is_outside(self):
        assert world_to_cell(new_grid(10, 10, 0.1), (1.0, 0.5)) is None

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 12),
        st.integers(1, 12),
        st.floats(0.01, 2.0),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-math.pi, math.pi),
    )
    def test_round_trip_of_cell_centers(self, w, h, res, ox, oy, th):
        g = new_grid(w, h, res, (ox, oy, th))
        for ix in range(w):
            for iy in range(h):
                assert world_to_cell(g, cell_to_world(g, (ix, iy))) == (ix, iy)


class TestLabels:
    def test_map_rule(self):
        assert label_cell(0.7) is CellLabel.OCCUPIED
        assert label_cell(0.3) is CellLabel.EMPTY
        assert label_cell(0.5) is CellLabel.UNKNOWN

    def test_band(self):
        assert label_cell(0.54, 0.05) is CellLabel.UNKNOWN
        assert label_cell(0.56, 0.05) is CellLabel.OCCUPIED

    @pytest.mark.parametrize("band", [-0.1, 0.5, 0.7])
    def test_band_out_of_range(self, band):
        with pytest.raises(ValueError):
            label_cell(0.6, band)

    @given(probs, bands)
    def test_symmetry_about_half(self, p, band):
        assert (label_cell(1 - p, band) is CellLabel.OCCUPIED) == (label_cell(p, band) is CellLabel.EMPTY)

    @given(st.lists(probs, min_size=1, max_size=30), bands)
    def test_vector_labels_match_scalar(self, ps, band):
        vec = label_grid(np.array(ps), band)
        assert [int(label_cell(p, band)) for p in ps] == vec.tolist()


def _polar(value=0.5, n_range=20, d_rho=0.1, n_angle=11, d_phi=0.1, pole=(0.0, 0.0, 0.0)):
    pg = PolarGrid(n_range, d_rho, n_angle, d_phi, pole)
    pg.values[:] = value
    return pg


class TestPolarResample:
    def test_uniform_half_fixed_point(self):
        out = resample_polar_to_cartesian(_polar(), new_grid(40, 40, 0.05, (-1, -1, 0)))
        assert np.all(out.values == 0.5)

    def test_nearest_neighbour_identity(self):
        pg = _polar()
        pg.values[5, 19] = 0.9  # phi in [-0.05, 0.05), rho in [1.9, 2.0)
        # a single cell centred at range 1.95, bearing 0
        dst = new_grid(1, 1, 0.01, (1.945, -0.005, 0.0))
        assert resample_polar_to_cartesian(pg, dst).values[0, 0] == pytest.approx(0.9)

    def test_beyond_max_range_is_unknown(self):
        pg = _polar(0.8)
        dst = new_grid(1, 1, 0.01, (2.5, -0.005, 0.0))
        assert resample_polar_to_cartesian(pg, dst).values[0, 0] == 0.5

    def test_angle_bins_symmetric(self):
        pg = _polar(n_angle=7, d_phi=0.1)
        c = pg.angle_centers()
        np.testing.assert_allclose(c, -c[::-1], atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 0.99))
    def test_uniform_value_in_view_half_outside(self, c):
        pg = _polar(c)
        dst = new_grid(50, 50, 0.05, (-0.5, -1.25, 0.0))
        out = resample_polar_to_cartesian(pg, dst).values
        xs, ys = dst.cell_centers()
        rho = np.hypot(xs, ys)
        phi = np.arctan2(ys, xs)
        # stay away from bin boundaries, where the snapped floor decides
        inside = (rho < pg.max_range - 1e-6) & (np.abs(phi) < pg.half_extent - 1e-6)
        outside = (rho > pg.max_range + 1e-6) | (np.abs(phi) > pg.half_extent + 1e-6)
        assert np.all(out[inside] == pytest.approx(c))
        assert np.all(out[outside] == 0.5)


class TestScanConvert:
    frame = new_grid(8, 8, 1.0)

    def test_empty_geometry(self):
        assert np.all(scan_convert([], self.frame).values == 0.5)

    def test_rectangle(self):
        g = scan_convert([Polygon.rectangle(2.0, 2.0, 5.0, 5.0)], self.frame, 0.95)
        marked = np.argwhere(g.values == 0.95)
        assert sorted(map(tuple, marked.tolist())) == [(y, x) for y in range(2, 5) for x in range(2, 5)]

    def test_small_disc_marks_one_cell(self):
        g = scan_convert([Disc(3.5, 4.5, 0.4)], self.frame)
        assert np.argwhere(g.values > 0.5).tolist() == [[4, 3]]

    def test_segment_marks_crossed_cells(self):
        g = scan_convert([Segment(0.5, 3.5, 6.5, 3.5)], self.frame)
        assert np.argwhere(g.values > 0.5)[:, 1].tolist() == list(range(7))

    def test_free_region_then_obstacle(self):
        g = scan_convert([Disc(3.5, 3.5, 0.4)], self.frame, free=[Polygon.rectangle(0, 0, 8, 8)])
        assert g.values[3, 3] == 0.95
        assert np.count_nonzero(g.values == 0.05) == 63

    def test_malformed(self):
        with pytest.raises(ValueError):
            scan_convert([(1, 2, 3)], self.frame)
        with pytest.raises(ValueError):
            Segment(1, 1, 1, 1)
        with pytest.raises(ValueError):
            scan_convert([], self.frame, p_occ=0.4)


class TestRigidResample:
    def test_integer_shift(self):
        src = new_grid(6, 6, 1.0)
        src.values[2, 3] = 0.9
        out = resample_grid(src, src.blank(), (1.0, 2.0, 0.0))
        assert out.values[4, 4] == pytest.approx(0.9)
        assert np.count_nonzero(out.values != 0.5) == 1

    def test_quarter_turn(self):
        src = new_grid(4, 4, 1.0, (-2.0, -2.0, 0.0))
        src.values[2, 3] = 0.9  # centre (1.5, 0.5)
        out = resample_grid(src, src.blank(), (0.0, 0.0, math.pi / 2))
        # (1.5, 0.5) rotates to (-0.5, 1.5): cell (1, 3)
        assert out.values[3, 1] == pytest.approx(0.9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.0, 2.0, allow_nan=False), min_size=4, max_size=4))
def test_clamp_invariant(vals):
    g = Grid2D(2, 2, 1.0, values=np.array(vals).reshape(2, 2))
    assert np.all((g.values >= EPS) & (g.values <= 1 - EPS))

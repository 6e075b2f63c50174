import math

import numpy as np
import pytest
from scipy import integrate, stats

from occgrid.estimation import write_scan_log
from occgrid.grid import Disc, Segment, new_grid
from occgrid.sensor_models import forward_density
from occgrid.simulator import SCANLINE, SONAR, SensorSpec, World, ray_cast, sense, true_range


def _wall_world(at=3.0):
    return World((-1, -5, 10, 5), [Segment(at, -4, at, 4)])


class TestRayCast:
    def test_perpendicular_wall(self):
        assert ray_cast(_wall_world(), (0, 0), 0.0) == pytest.approx(3.0, abs=1e-12)

    def test_miss(self):
        assert ray_cast(_wall_world(), (0, 0), math.pi) is None

    def test_nearest_of_two(self):
        w = World((-1, -5, 10, 5), [Segment(5, -4, 5, 4)], [Disc(2.5, 0, 0.5)])
        assert ray_cast(w, (0, 0), 0.0) == pytest.approx(2.0, abs=1e-12)

    def test_beyond_reach(self):
        assert ray_cast(_wall_world(), (0, 0), 0.0, r_max=2.0) is None

    def test_oblique(self):
        assert ray_cast(_wall_world(), (0, 0), math.pi / 4) == pytest.approx(3.0 * math.sqrt(2), abs=1e-12)

    def test_origin_outside(self):
        with pytest.raises(ValueError):
            ray_cast(_wall_world(), (20, 0), 0.0)

    def test_origin_inside_disc(self):
        w = World((-5, -5, 5, 5), [], [Disc(0, 0, 1)])
        assert ray_cast(w, (0.2, 0), 1.0) == 0.0


class TestWorld:
    def test_obstacles_must_fit(self):
        with pytest.raises(ValueError):
            World((0, 0, 1, 1), [Segment(0.5, 0.5, 2.0, 0.5)])
        with pytest.raises(ValueError):
            World((0, 0, 1, 1), [], [Disc(0.9, 0.5, 0.2)])

    def test_json_round_trip(self, tmp_path):
        w = World((-1, -5, 10, 5), [Segment(3, -4, 3, 4)], [Disc(1, 1, 0.25)])
        w.save(tmp_path / "w.json")
        back = World.load(tmp_path / "w.json")
        assert back.to_dict() == w.to_dict()

    def test_malformed(self):
        with pytest.raises(ValueError):
            World.from_dict({"segments": []})

    def test_ground_truth(self):
        frame = new_grid(11, 10, 1.0, (-1, -5, 0))
        gt = _wall_world().ground_truth(frame)
        assert set(np.unique(gt.values)) == {0.05, 0.95}
        assert np.all(gt.values[:, 4] == 0.95)


def _spec(kind=SCANLINE, d0=1.0, s0=0.0, s1=0.0, bearings=(0.0,)):
    return SensorSpec(kind, 8.0, 0.02 if kind == SCANLINE else 0.2, d0, s0, s1, bearings)


class TestSense:
    def test_noiseless_reading_is_exact(self):
        out = sense(_wall_world(), (0, 0, 0), _spec(), np.random.default_rng(0))
        assert out[0].range == 3.0 and not out[0].max_range

    def test_noiseless_matches_ray_cast(self):
        rng = np.random.default_rng(1)
        w = World((-5, -5, 5, 5), [Segment(-4, 3, 4, 3), Segment(2, -4, 2, 4)], [Disc(-2, -2, 0.5)])
        bearings = tuple(np.linspace(-math.pi, math.pi, 37)[:-1])
        for r in sense(w, (0.1, -0.3, 0.2), _spec(bearings=bearings), rng):
            ref = ray_cast(w, (0.1, -0.3), r.direction, 8.0)
            assert r.range == (8.0 if ref is None else ref)

    def test_never_detecting_sensor(self):
        out = sense(_wall_world(), (0, 0, 0), _spec(d0=0.0, bearings=(0.0, 0.5, -0.5)), np.random.default_rng(0))
        assert all(r.max_range and r.range == 8.0 for r in out)

    def test_sonar_takes_nearest_reflector_in_cone(self):
        w = World((-1, -5, 10, 5), [Segment(5, -4, 5, 4)], [Disc(2.0, 0.5, 0.1)])
        sonar = SensorSpec(SONAR, 8.0, 0.3, 1.0, 0.0)
        line = SensorSpec(SCANLINE, 8.0, 0.02, 1.0, 0.0)
        assert true_range(w, 0, 0, 0.0, line) == pytest.approx(5.0)
        assert true_range(w, 0, 0, 0.0, sonar) < 2.1

    def test_pose_outside(self):
        with pytest.raises(ValueError):
            sense(_wall_world(), (20, 0, 0), _spec(), np.random.default_rng(0))

    def test_readings_stay_in_range(self):
        rng = np.random.default_rng(2)
        out = sense(_wall_world(0.05), (0, 0, 0), _spec(s0=0.5, bearings=(0.0,) * 200), rng)
        assert all(0.0 <= r.range <= 8.0 for r in out)

    def test_same_seed_gives_identical_log(self, tmp_path):
        w = World((-5, -5, 5, 5), [Segment(-4, 3, 4, 3)], [Disc(1, -1, 0.4)])
        spec = SensorSpec.ring(SONAR, 16, r_max=6.0, half_angle=0.2, d0=0.8, sigma0=0.05, sigma1=0.01)
        for name in ("a", "b"):
            rng = np.random.default_rng(42)
            log = [r for k in range(5) for r in sense(w, (0.2 * k, 0, 0.1 * k), spec, rng, t=float(k))]
            write_scan_log(tmp_path / f"{name}.jsonl", log)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


class TestCalibration:
    spec = _spec(d0=0.9, s0=0.05, s1=0.02, bearings=(0.0,) * 10_000)

    def readings(self):
        return [r for r in sense(_wall_world(), (0, 0, 0), self.spec, np.random.default_rng(7))]

    def test_detection_rate_and_spread(self):
        out = self.readings()
        hits = np.array([r.range for r in out if not r.max_range])
        assert abs(hits.size / len(out) - 0.9) <= 0.01
        sigma = 0.05 + 0.02 * 3.0
        assert abs(hits.std(ddof=1) / sigma - 1.0) <= 0.05

    def test_histogram_matches_forward_density(self):
        out = self.readings()
        hits = np.array([r.range for r in out if not r.max_range])
        model = self.spec.model()
        edges = np.linspace(3.0 - 0.33, 3.0 + 0.33, 13)
        edges[0], edges[-1] = 0.0, 8.0
        mass = np.array(
            [integrate.quad(lambda r: forward_density(model, r, 3.0), a, b, points=[3.0])[0] for a, b in zip(edges, edges[1:])]
        )
        expected = hits.size * mass / mass.sum()
        observed, _ = np.histogram(hits, edges)
        assert stats.chisquare(observed, expected).pvalue > 0.01

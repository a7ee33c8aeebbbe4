"""Reference-path construction: geometry, sampling, feasibility."""

import math

import numpy as np
import pytest

from avcodesign.paths import PathError, PathSpec, make_path


class TestStraight:
    def test_headings_all_zero(self):
        p = make_path("straight", 0.0, 40.0)
        assert np.all(p.headings == 0.0)
        assert np.all(p.points[:, 1] == 0.0)

    def test_sampling_grid(self):
        p = make_path("straight", 0.0, 5.0)
        assert p.arclengths[0] == 0.0
        assert np.allclose(np.diff(p.arclengths), 0.1)
        assert p.length == pytest.approx(5.0, abs=1e-12)
        assert p.points[-1, 0] == pytest.approx(5.0, abs=1e-12)

    def test_endpoint_kept_off_grid(self):
        p = make_path("straight", 0.0, 1.23)
        assert p.arclengths[-1] == pytest.approx(1.23, abs=1e-12)


class TestNinetyDegreeTurn:
    @pytest.mark.parametrize("kappa", [0.05, 0.125])
    def test_net_heading_change(self, kappa):
        p = make_path("ninety_degree_turn", kappa, 80.0)
        assert p.headings[-1] - p.headings[0] == pytest.approx(math.pi / 2,
                                                               abs=1e-6)

    def test_lead_in_is_straight(self):
        p = make_path("ninety_degree_turn", 0.125, 80.0)
        before = p.arclengths < 10.0 - 1e-9
        assert np.all(p.headings[before] == 0.0)
        assert np.all(p.points[before, 1] == 0.0)

    def test_turn_radius(self):
        kappa = 0.125
        p = make_path("ninety_degree_turn", kappa, 80.0)
        # the arc's chord from its start to its end spans sqrt(2) radii
        i0 = int(np.searchsorted(p.arclengths, 10.0))
        i1 = int(np.searchsorted(p.arclengths, 10.0 + (math.pi / 2) / kappa))
        chord = np.linalg.norm(p.points[i1] - p.points[i0])
        assert chord == pytest.approx(math.sqrt(2) / kappa, rel=1e-2)


class TestLaneChange:
    @pytest.mark.parametrize("kappa", [0.05, 0.125])
    def test_offset_and_heading(self, kappa):
        p = make_path("lane_change", kappa, 80.0)
        assert p.headings[-1] - p.headings[0] == pytest.approx(0.0, abs=1e-6)
        assert p.points[-1, 1] - p.points[0, 1] == pytest.approx(3.5, abs=1e-3)

    def test_peak_heading_positive(self):
        p = make_path("lane_change", 0.125, 80.0)
        assert p.headings.max() > 0.05
        assert p.headings.min() >= -1e-9


class TestFeasibility:
    def test_curvature_beyond_steering_rejected(self):
        # atan(2.7 * 0.3) = 0.68 rad exceeds the 0.6 rad steering range
        with pytest.raises(PathError, match="steering"):
            make_path("ninety_degree_turn", 0.3, 80.0)

    def test_too_short_rejected(self):
        with pytest.raises(PathError, match="short"):
            make_path("ninety_degree_turn", 0.05, 12.0)

    def test_bad_inputs_rejected(self):
        with pytest.raises(PathError):
            make_path("zigzag", 0.05, 40.0)
        with pytest.raises(PathError):
            make_path("straight", 0.0, -1.0)
        with pytest.raises(PathError):
            make_path("lane_change", 0.0, 40.0)


class TestPathSpecApi:
    def test_nearest_index_matches_linear_scan(self):
        p = make_path("ninety_degree_turn", 0.125, 60.0)
        rng = np.random.default_rng(11)
        for _ in range(40):
            q = rng.uniform(-5, 40, size=2)
            best = min(range(len(p)),
                       key=lambda i: (p.points[i, 0] - q[0]) ** 2
                       + (p.points[i, 1] - q[1]) ** 2)
            assert p.nearest_index(q[0], q[1]) == best

    def test_window_covers_lookahead(self):
        p = make_path("straight", 0.0, 30.0)
        w = p.window(50, 4.0)
        assert w.arclengths[0] == pytest.approx(5.0)
        assert w.arclengths[-1] - w.arclengths[0] >= 4.0 - 1e-9

    def test_window_at_end_keeps_two_samples(self):
        p = make_path("straight", 0.0, 30.0)
        w = p.window(len(p) - 1, 5.0)
        assert len(w) >= 2

    def test_tangent_unit_vector(self):
        p = make_path("ninety_degree_turn", 0.05, 80.0)
        tx, ty = p.tangent(len(p) - 1)
        assert math.hypot(tx, ty) == pytest.approx(1.0)
        assert math.atan2(ty, tx) == pytest.approx(math.pi / 2, abs=1e-6)

    def test_invariants_enforced(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        with pytest.raises(PathError, match="increase"):
            PathSpec(kind="straight", peak_curvature=0.0, points=pts,
                     headings=np.zeros(3), arclengths=np.array([0.0, 1.0, 1.0]))
        with pytest.raises(PathError, match="jump"):
            PathSpec(kind="straight", peak_curvature=0.0, points=pts,
                     headings=np.array([0.0, 3.5, 0.0]),
                     arclengths=np.array([0.0, 1.0, 2.0]))

    def test_rows_export(self):
        p = make_path("straight", 0.0, 1.0)
        rows = list(p.to_rows())
        assert rows[0] == (0.0, 0.0, 0.0, 0.0)
        assert rows[-1][0] == pytest.approx(1.0)

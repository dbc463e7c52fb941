import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aspire.world import (ObstacleMap, Pose2D, SensorFootprint, box, in_fov, pose_in_free_space,
                          points_clearance_ok, random_free_point, segment_intersects_obstacles,
                          segments_blocked, visible, wrap_angle)

FP = SensorFootprint(1.0, 6.0, math.pi / 4)
EMPTY = ObstacleMap.empty(10, 10)


def unit_square(cx, cy):
    return box(cx, cy, 1.0, 1.0)


class TestPose:
    def test_theta_wrapped_on_construction(self):
        assert Pose2D(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
        assert Pose2D(0, 0, -math.pi).theta == pytest.approx(math.pi)
        assert Pose2D(0, 0, 2 * math.pi).theta == 0.0

    @given(st.floats(-50, 50), st.integers(-5, 5))
    def test_wrap_periodic(self, th, k):
        a, b = wrap_angle(th), wrap_angle(th + 2 * math.pi * k)
        assert -math.pi < a <= math.pi
        assert abs(a) <= math.pi
        assert abs(wrap_angle(a - b)) < 1e-9


class TestObstacleMap:
    def test_clockwise_polygon_is_reoriented(self):
        m = ObstacleMap((0, 0, 10, 10), [box(5, 5, 2, 2)[::-1]])
        p = m.obstacles[0]
        area2 = np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
        assert area2 > 0

    @pytest.mark.parametrize("poly", [
        [[0, 0], [4, 0], [1, 1], [0, 4]],       # non-convex
        [[0, 0], [1, 1], [2, 2]],               # zero area
        [[8, 8], [12, 8], [12, 9]],             # outside bounds
    ])
    def test_invalid_polygons(self, poly):
        with pytest.raises(ValueError):
            ObstacleMap((0, 0, 10, 10), [poly])

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            ObstacleMap((0, 0, 0, 10))


class TestSegments:
    def test_degenerate_segment_empty_map(self):
        assert not segment_intersects_obstacles((0, 0), (0, 0), EMPTY)

    def test_segment_through_square(self):
        m = ObstacleMap((-5, -5, 15, 15), [unit_square(2, 0)])
        assert segment_intersects_obstacles((0, 0), (4, 0), m)

    def test_disjoint(self):
        m = ObstacleMap((-5, -5, 15, 15), [unit_square(10, 10)])
        assert not segment_intersects_obstacles((0, 0), (4, 4), m)

    def test_segment_inside_obstacle(self):
        m = ObstacleMap((0, 0, 10, 10), [box(5, 5, 4, 4)])
        assert segment_intersects_obstacles((4.5, 5), (5.5, 5), m)

    def test_batch_matches_scalar(self, rng):
        m = ObstacleMap((0, 0, 20, 20), [box(5, 5, 2, 3), box(12, 14, 4, 2)])
        p = rng.uniform(0, 20, (200, 2))
        q = rng.uniform(0, 20, (200, 2))
        batch = segments_blocked(p, q, m)
        single = [segment_intersects_obstacles(a, b, m) for a, b in zip(p, q)]
        assert list(batch) == single


class TestFov:
    def test_in_range_ahead(self):
        assert in_fov(Pose2D(0, 0, 0), (3, 0), FP, EMPTY)

    def test_below_r_min(self):
        assert not in_fov(Pose2D(0, 0, 0), (0.5, 0), FP, EMPTY)

    def test_outside_bearing(self):
        assert not in_fov(Pose2D(0, 0, 0), (3, 4), FP, EMPTY)

    def test_boundary_counts_as_inside(self):
        assert in_fov(Pose2D(0, 0, 0), (6, 0), FP, EMPTY)
        assert in_fov(Pose2D(0, 0, 0), (1, 0), FP, EMPTY)
        a = math.pi / 4 - 1e-12
        assert in_fov(Pose2D(0, 0, 0), (3 * math.cos(a), 3 * math.sin(a)), FP, EMPTY)

    def test_occluded(self):
        m = ObstacleMap((-10, -10, 10, 10), [unit_square(2, 0)])
        assert not in_fov(Pose2D(0, 0, 0), (4, 0), FP, m)
        assert in_fov(Pose2D(0, 0, 0), (4, 2.5), FP, m)

    def test_visible_implies_clear_line_of_sight(self, rng):
        m = ObstacleMap((0, 0, 20, 20), [box(8, 8, 2, 2), box(12, 10, 1, 4), box(6, 13, 3, 1)])
        robot = Pose2D(10, 10, 0.3)
        pts = rng.uniform(0, 20, (2000, 2))
        vis = visible(Pose2D(robot.x, robot.y, robot.theta), pts, FP, m)
        assert vis.any()
        assert not segments_blocked(np.array([robot.x, robot.y]), pts[vis], m).any()

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-math.pi, math.pi), st.floats(-20, 20), st.floats(-20, 20), st.integers(0, 10_000))
    def test_rigid_motion_invariance(self, phi, tx, ty, seed):
        r = np.random.default_rng(seed)
        obstacles = [box(3, 1, 1.5, 1.0), box(-2, 3, 1.0, 2.0)]
        c, s = math.cos(phi), math.sin(phi)
        R = np.array([[c, -s], [s, c]])
        t = np.array([tx, ty])
        moved = [[R @ v + t for v in np.array(o)] for o in obstacles]
        m0 = ObstacleMap((-60, -60, 60, 60), obstacles)
        m1 = ObstacleMap((-60, -60, 60, 60), moved)
        robot = Pose2D(0, 0, r.uniform(-math.pi, math.pi))
        robot1 = Pose2D(*(R @ np.zeros(2) + t), robot.theta + phi)
        pts = r.uniform(-7, 7, (100, 2))
        # keep only points whose gates are not within 1e-6 of a threshold
        d = np.hypot(pts[:, 0], pts[:, 1])
        brg = np.abs(wrap_angle(np.arctan2(pts[:, 1], pts[:, 0]) - robot.theta))
        ok = (np.abs(d - FP.r_min) > 1e-6) & (np.abs(d - FP.r_max) > 1e-6) & (np.abs(brg - FP.half_angle) > 1e-6)
        pts = pts[ok]
        v0 = visible(robot, pts, FP, m0)
        v1 = visible(robot1, pts @ R.T + t, FP, m1)
        assert np.array_equal(v0, v1)


class TestFreeSpace:
    def test_open_space(self):
        assert pose_in_free_space(Pose2D(5, 5, 0), EMPTY, 0.2)

    def test_vertex_counts_as_collision(self):
        m = ObstacleMap((0, 0, 10, 10), [box(5, 5, 2, 2)])
        assert not pose_in_free_space(Pose2D(4, 4, 0), m, 0.0)

    def test_out_of_bounds(self):
        assert not pose_in_free_space(Pose2D(11, 5, 0), EMPTY, 0.0)
        assert not pose_in_free_space(Pose2D(9.9, 5, 0), EMPTY, 0.2)

    def test_touching_disc_collides(self):
        m = ObstacleMap((0, 0, 10, 10), [box(5, 5, 2, 2)])
        assert not pose_in_free_space(Pose2D(6.5, 5, 0), m, 0.5)
        assert pose_in_free_space(Pose2D(6.5 + 1e-9, 5, 0), m, 0.5)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            pose_in_free_space(Pose2D(5, 5), EMPTY, -1)

    def test_random_free_point(self, rng):
        m = ObstacleMap((0, 0, 10, 10), [box(5, 5, 6, 6)])
        for _ in range(50):
            p = random_free_point(m, rng, 0.5)
            assert points_clearance_ok(p, m, 0.5)


def test_footprint_validation():
    with pytest.raises(ValueError):
        SensorFootprint(6, 1)
    with pytest.raises(ValueError):
        SensorFootprint(1, 6, 0.0)

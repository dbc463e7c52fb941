"""Planar workspace: poses, convex obstacles and the fan-shaped field of view.

All geometric queries are vectorised over batches of points so that the
particle filter and the reward can test hundreds of particles per call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), TWO_PI)


def _wrap_scalar(a: float) -> float:
    return float(np.pi - (np.pi - a) % TWO_PI)


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; ``theta`` is kept in (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", _wrap_scalar(float(self.theta)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, a) -> "Pose2D":
        return cls(a[0], a[1], a[2] if len(a) > 2 else 0.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ObstacleMap:
    """Axis-aligned bounds ``(xmin, ymin, xmax, ymax)`` plus convex polygons.

    Polygons may be given in either orientation; they are stored
    counter-clockwise. Internally all polygons are padded to a common vertex
    count by repeating the last vertex, which yields zero-length edges with
    zero normals that never constrain the clipping tests.
    """

    bounds: tuple[float, float, float, float]
    obstacles: tuple[np.ndarray, ...] = ()
    _verts: np.ndarray = field(init=False, repr=False, compare=False)
    _normals: np.ndarray = field(init=False, repr=False, compare=False)
    _edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(b) for b in self.bounds)
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"invalid bounds {self.bounds}")
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        polys = []
        for poly in self.obstacles:
            p = np.array(poly, dtype=float)
            if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
                raise ValueError("obstacle must be a list of at least 3 (x, y) vertices")
            area2 = np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
            if abs(area2) < 1e-12:
                raise ValueError("obstacle polygon has zero area")
            if area2 < 0:
                p = p[::-1].copy()
            e = np.roll(p, -1, axis=0) - p
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.any(cross < -1e-12):
                raise ValueError("obstacle polygon is not convex")
            if (p[:, 0].min() < xmin or p[:, 0].max() > xmax
                    or p[:, 1].min() < ymin or p[:, 1].max() > ymax):
                raise ValueError("obstacle vertices must lie within bounds")
            polys.append(_frozen(p))
        object.__setattr__(self, "obstacles", tuple(polys))

        vmax = max((len(p) for p in polys), default=0)
        verts = np.zeros((len(polys), vmax, 2))
        for i, p in enumerate(polys):
            verts[i, : len(p)] = p
            verts[i, len(p):] = p[-1]
        edges = np.zeros_like(verts)
        for i, p in enumerate(polys):
            nxt = np.roll(p, -1, axis=0)
            edges[i, : len(p)] = nxt - p
        normals = np.stack([edges[..., 1], -edges[..., 0]], axis=-1)
        object.__setattr__(self, "_verts", _frozen(verts))
        object.__setattr__(self, "_edges", _frozen(edges))
        object.__setattr__(self, "_normals", _frozen(normals))

    @classmethod
    def empty(cls, width: float = 50.0, height: float = 50.0) -> "ObstacleMap":
        return cls((0.0, 0.0, width, height))

    @property
    def n_obstacles(self) -> int:
        return len(self.obstacles)

    def in_bounds(self, pts, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        xmin, ymin, xmax, ymax = self.bounds
        x, y = pts[..., 0], pts[..., 1]
        return (x - margin >= xmin) & (x + margin <= xmax) & (y - margin >= ymin) & (y + margin <= ymax)

    def to_dict(self) -> dict:
        return {"bounds": list(self.bounds), "obstacles": [p.tolist() for p in self.obstacles]}


@dataclass(frozen=True)
class SensorFootprint:
    """Annular sector: ``r_min <= range <= r_max`` and ``|bearing| <= half_angle``."""

    r_min: float = 1.0
    r_max: float = 6.0
    half_angle: float = np.pi / 4

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max):
            raise ValueError("need 0 <= r_min < r_max")
        if not (0.0 < self.half_angle <= np.pi):
            raise ValueError("need 0 < half_angle <= pi")


def segments_blocked(p, q, omap: ObstacleMap) -> np.ndarray:
    """Batch segment/obstacle test by Cyrus-Beck clipping.

    ``p`` and ``q`` are broadcastable arrays of shape (..., 2). Returns a
    boolean array that is True where the closed segment meets any (closed)
    obstacle, including segments lying entirely inside one.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    shape = np.broadcast_shapes(p.shape, q.shape)[:-1]
    if omap.n_obstacles == 0:
        return np.zeros(shape, dtype=bool)
    p = np.broadcast_to(p, shape + (2,)).reshape(-1, 1, 1, 2)
    q = np.broadcast_to(q, shape + (2,)).reshape(-1, 1, 1, 2)
    d = q - p
    n = omap._normals[None]
    num = np.sum((p - omap._verts[None]) * n, axis=-1)
    den = np.sum(d * n, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -num / den
    t_enter = np.max(np.where(den < 0, t, 0.0), axis=-1)
    t_exit = np.min(np.where(den > 0, t, 1.0), axis=-1)
    outside = np.any((den == 0) & (num > 0), axis=-1)
    hit = (~outside) & (np.maximum(t_enter, 0.0) <= np.minimum(t_exit, 1.0))
    return np.any(hit, axis=-1).reshape(shape)


def segment_intersects_obstacles(p, q, omap: ObstacleMap) -> bool:
    return bool(segments_blocked(np.asarray(p, float), np.asarray(q, float), omap))


def points_clearance_ok(pts, omap: ObstacleMap, radius: float = 0.0) -> np.ndarray:
    """True where a disc of ``radius`` at each point is inside bounds and
    strictly away from every obstacle (touching counts as collision)."""
    pts = np.asarray(pts, dtype=float)
    ok = omap.in_bounds(pts, radius)
    if omap.n_obstacles == 0:
        return ok
    flat = pts.reshape(-1, 1, 1, 2)
    rel = flat - omap._verts[None]
    inside = np.all(np.sum(rel * omap._normals[None], axis=-1) <= 0.0, axis=-1)
    ee = np.sum(omap._edges * omap._edges, axis=-1)[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ee > 0, np.sum(rel * omap._edges[None], axis=-1) / ee, 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = omap._verts[None] + t[..., None] * omap._edges[None]
    dist2 = np.min(np.sum((flat - closest) ** 2, axis=-1), axis=-1)
    collide = inside | (dist2 <= radius * radius)
    return ok & ~np.any(collide, axis=-1).reshape(pts.shape[:-1])


def pose_in_free_space(p: Pose2D, omap: ObstacleMap, robot_radius: float = 0.0) -> bool:
    if robot_radius < 0:
        raise ValueError("robot_radius must be non-negative")
    return bool(points_clearance_ok(np.array([p.x, p.y]), omap, robot_radius))


def visible(robot: Pose2D, pts, fp: SensorFootprint, omap: ObstacleMap) -> np.ndarray:
    """Vectorised FOV indicator for target positions ``pts`` of shape (K, 2+).

    Range and bearing gates are applied first; the occlusion test only runs
    on the survivors.
    """
    pts = np.asarray(pts, dtype=float)
    dx = pts[..., 0] - robot.x
    dy = pts[..., 1] - robot.y
    r2 = dx * dx + dy * dy
    mask = (r2 >= fp.r_min * fp.r_min) & (r2 <= fp.r_max * fp.r_max)
    if fp.half_angle < np.pi and np.any(mask):
        bearing = wrap_angle(np.arctan2(dy, dx) - robot.theta)
        mask &= np.abs(bearing) <= fp.half_angle
    if omap.n_obstacles and np.any(mask):
        idx = np.nonzero(mask)
        cand = np.stack([dx[idx] + robot.x, dy[idx] + robot.y], axis=-1)
        mask[idx] = ~segments_blocked(np.array([robot.x, robot.y]), cand, omap)
    return mask


def in_fov(robot: Pose2D, target_pos, fp: SensorFootprint, omap: ObstacleMap) -> bool:
    """Detection indicator for a single target position."""
    return bool(visible(robot, np.asarray(target_pos, float)[None, :2], fp, omap)[0])


def random_free_point(omap: ObstacleMap, rng, margin: float = 0.0, max_tries: int = 10000) -> np.ndarray:
    xmin, ymin, xmax, ymax = omap.bounds
    for _ in range(max_tries):
        pt = rng.uniform([xmin + margin, ymin + margin], [xmax - margin, ymax - margin])
        if points_clearance_ok(pt, omap, margin):
            return pt
    raise RuntimeError("could not find a free point")


def box(cx: float, cy: float, w: float, h: float) -> list[list[float]]:
    """Axis-aligned rectangle centred at (cx, cy), counter-clockwise."""
    return [[cx - w / 2, cy - h / 2], [cx + w / 2, cy - h / 2],
            [cx + w / 2, cy + h / 2], [cx - w / 2, cy + h / 2]]


def regular_polygon(cx: float, cy: float, radius: float, n: int, phase: float = 0.0) -> list[list[float]]:
    ang = phase + TWO_PI * np.arange(n) / n
    return np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=-1).tolist()


__all__ = [
    "Pose2D", "ObstacleMap", "SensorFootprint", "wrap_angle", "segments_blocked",
    "segment_intersects_obstacles", "points_clearance_ok", "pose_in_free_space",
    "visible", "in_fov", "random_free_point", "box", "regular_polygon",
]

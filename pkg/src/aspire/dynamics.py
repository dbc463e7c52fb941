"""Unicycle kinematics, motion primitives and the stochastic target model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ControlLimitError
from .world import ObstacleMap, Pose2D, points_clearance_ok, wrap_angle

#: interior sub-samples per primitive used for collision checking
ARC_SUBSAMPLES = 5
_LIMIT_TOL = 1e-9


class ControlInput(NamedTuple):
    v: float
    w: float


@dataclass(frozen=True)
class RobotModel:
    """Velocity limits, step length and the discrete primitive grid.

    ``v_levels`` and ``w_levels`` are fractions of ``v_max`` and ``w_max``.
    """

    dt: float = 0.5
    v_max: float = 2.0
    w_max: float = np.pi / 2
    radius: float = 0.3
    v_levels: tuple = (0.0, 0.5, 1.0)
    w_levels: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)
    controls: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dt <= 0 or self.v_max < 0 or self.w_max < 0 or self.radius < 0:
            raise ValueError("dt must be positive; limits and radius non-negative")
        object.__setattr__(self, "v_levels", tuple(float(a) for a in self.v_levels))
        object.__setattr__(self, "w_levels", tuple(float(a) for a in self.w_levels))
        if any(abs(a) > 1 for a in self.v_levels + self.w_levels):
            raise ValueError("primitive levels are fractions in [-1, 1]")
        ctrls = tuple(ControlInput(a * self.v_max, b * self.w_max)
                      for a in self.v_levels for b in self.w_levels)
        object.__setattr__(self, "controls", ctrls)

    def check(self, u: ControlInput) -> None:
        if abs(u.v) > self.v_max + _LIMIT_TOL or abs(u.w) > self.w_max + _LIMIT_TOL:
            raise ControlLimitError(f"control {tuple(u)} outside limits "
                                    f"(v_max={self.v_max}, w_max={self.w_max})")


def unicycle_step(x: Pose2D, u, dt: float, limits: Optional[RobotModel] = None) -> Pose2D:
    """One forward-Euler step of the unicycle; heading re-wrapped."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = ControlInput(*u)
    if limits is not None:
        limits.check(u)
    c, s = np.cos(x.theta), np.sin(x.theta)
    return Pose2D(x.x + u.v * c * dt, x.y + u.v * s * dt, x.theta + u.w * dt)


def unicycle_batch(states: np.ndarray, v: float, w: float, dt: float) -> np.ndarray:
    """Vectorised :func:`unicycle_step` over an (N, 3) array of poses."""
    th = states[:, 2]
    out = np.empty_like(states)
    out[:, 0] = states[:, 0] + v * dt * np.cos(th)
    out[:, 1] = states[:, 1] + v * dt * np.sin(th)
    out[:, 2] = wrap_angle(th + w * dt)
    return out


def _path_points(x: Pose2D, controls, dt: float) -> np.ndarray:
    # Euler motion is a straight segment from x along its heading.
    frac = np.arange(1, ARC_SUBSAMPLES + 2) / (ARC_SUBSAMPLES + 1)
    v = np.array([u.v for u in controls])
    step = v[:, None] * dt * frac[None, :]
    px = x.x + np.cos(x.theta) * step
    py = x.y + np.sin(x.theta) * step
    return np.stack([px, py], axis=-1)


def motion_primitives(x: Pose2D, robot: RobotModel, omap: ObstacleMap) -> list[tuple[ControlInput, Pose2D]]:
    """Collision-free primitives from ``x``: list of (control, end pose).

    May be empty when the robot is boxed in.
    """
    controls = robot.controls
    ok = points_clearance_ok(_path_points(x, controls, robot.dt), omap, robot.radius).all(axis=1)
    return [(u, unicycle_step(x, u, robot.dt)) for u, keep in zip(controls, ok) if keep]


def sample_feasible_primitive(x: Pose2D, robot: RobotModel, omap: ObstacleMap, rng,
                              max_tries: int = 8) -> Optional[ControlInput]:
    """Uniform draw from the feasible primitive set.

    Rejection sampling keeps the draw uniform over feasible controls without
    checking the whole grid; falls back to the full set after ``max_tries``.
    Returns None if no primitive is feasible.
    """
    controls = robot.controls
    for _ in range(max_tries):
        u = controls[rng.integers(len(controls))]
        if points_clearance_ok(_path_points(x, (u,), robot.dt)[0], omap, robot.radius).all():
            return u
    feasible = motion_primitives(x, robot, omap)
    if not feasible:
        return None
    return feasible[rng.integers(len(feasible))][0]


@dataclass(frozen=True)
class MotionNoise:
    """Additive Gaussian noise on (x, y, theta) with covariance ``Q``."""

    Q: np.ndarray
    _sqrt: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.shape != (3, 3) or not np.allclose(Q, Q.T):
            raise ValueError("Q must be a symmetric 3x3 matrix")
        vals, vecs = np.linalg.eigh(Q)
        if vals.min() < -1e-12:
            raise ValueError("Q must be positive semi-definite")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        sq = vecs * np.sqrt(np.clip(vals, 0.0, None))
        object.__setattr__(self, "_sqrt", sq)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.Q)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.standard_normal((n, 3)) @ self._sqrt.T


@dataclass(frozen=True)
class TargetModel:
    """Target transition: deterministic drift followed by Gaussian noise.

    ``controlled`` targets follow a known control schedule (one
    :class:`ControlInput` per step; the last entry is held beyond the end).
    ``autonomous`` targets follow ``drift_map`` if given, otherwise a
    constant-speed unicycle along the current heading.
    """

    kind: str = "controlled"
    dt: float = 0.5
    noise: MotionNoise = field(default_factory=lambda: MotionNoise(np.zeros((3, 3))))
    controls: Optional[np.ndarray] = None
    speed: float = 0.0
    drift_map: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("controlled", "autonomous"):
            raise ValueError(f"unknown target model kind {self.kind!r}")
        if not isinstance(self.noise, MotionNoise):
            object.__setattr__(self, "noise", MotionNoise(self.noise))
        if self.kind == "controlled":
            if self.controls is None or len(self.controls) == 0:
                raise ValueError("controlled target needs a control schedule")
            c = np.array(self.controls, dtype=float).reshape(-1, 2)
            c.setflags(write=False)
            object.__setattr__(self, "controls", c)

    def control_at(self, k: int) -> ControlInput:
        c = self.controls[min(max(k, 0), len(self.controls) - 1)]
        return ControlInput(float(c[0]), float(c[1]))

    def drift(self, states: np.ndarray, k: int = 0) -> np.ndarray:
        """Noise-free transition of (N, 3) states from step ``k`` to ``k + 1``."""
        if self.kind == "controlled":
            v, w = self.control_at(k)
            return unicycle_batch(states, v, w, self.dt)
        if self.drift_map is not None:
            out = np.array(self.drift_map(states), dtype=float)
            out[:, 2] = wrap_angle(out[:, 2])
            return out
        return unicycle_batch(states, self.speed, 0.0, self.dt)

    def add_noise(self, states: np.ndarray, rng) -> np.ndarray:
        if self.noise.is_zero:
            return states.copy()
        out = states + self.noise.sample(rng, len(states))
        out[:, 2] = wrap_angle(out[:, 2])
        return out

    def propagate(self, states: np.ndarray, k: int, rng) -> np.ndarray:
        return self.add_noise(self.drift(states, k), rng)


def target_step(x: Pose2D, model: TargetModel, rng, k: int = 0) -> Pose2D:
    return Pose2D.from_array(model.propagate(x.as_array()[None, :], k, rng)[0])

"""Range-bearing sensor with FOV-gated (intermittent) detections.

A measurement is either a :class:`Detection` or ``None`` for the empty
observation (target outside the field of view).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateGeometryError
from .world import ObstacleMap, Pose2D, SensorFootprint, visible, wrap_angle

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Detection:
    range: float
    bearing: float

    def as_array(self) -> np.ndarray:
        return np.array([self.range, self.bearing])


Measurement = Optional[Detection]


@dataclass(frozen=True)
class MeasurementNoise:
    """Gaussian measurement noise; caches the Cholesky factor and log-determinant."""

    Sigma: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)
    chol_inv: np.ndarray = field(init=False, repr=False, compare=False)
    logdet: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        S = np.atleast_2d(np.array(self.Sigma, dtype=float))
        if S.shape[0] != S.shape[1] or not np.allclose(S, S.T):
            raise ValueError("Sigma must be a symmetric square matrix")
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Sigma must be positive definite") from exc
        for a in (S, L):
            a.setflags(write=False)
        object.__setattr__(self, "Sigma", S)
        object.__setattr__(self, "chol", L)
        Linv = np.linalg.inv(L)
        Linv.setflags(write=False)
        object.__setattr__(self, "chol_inv", Linv)
        object.__setattr__(self, "logdet", float(2.0 * np.sum(np.log(np.diag(L)))))

    @property
    def dim(self) -> int:
        return self.Sigma.shape[0]

    @property
    def log_norm(self) -> float:
        """log of the Gaussian normaliser (2 pi)^(m/2) |Sigma|^(1/2)."""
        return 0.5 * (self.dim * LOG_2PI + self.logdet)


def h(robot: Pose2D, target) -> tuple[float, float]:
    """Noise-free (range, bearing) of ``target`` seen from ``robot``."""
    tx, ty = (target.x, target.y) if isinstance(target, Pose2D) else (target[0], target[1])
    dx, dy = tx - robot.x, ty - robot.y
    r = float(np.hypot(dx, dy))
    if r == 0.0:
        raise DegenerateGeometryError("robot and target positions coincide")
    return r, float(wrap_angle(np.arctan2(dy, dx) - robot.theta))


def h_batch(robot: Pose2D, pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`h` for (K, 2+) positions, returns (K, 2)."""
    dx = pts[:, 0] - robot.x
    dy = pts[:, 1] - robot.y
    out = np.empty((len(pts), 2))
    out[:, 0] = np.hypot(dx, dy)
    out[:, 1] = wrap_angle(np.arctan2(dy, dx) - robot.theta)
    return out


def sample_measurement(robot: Pose2D, target, fp: SensorFootprint, omap: ObstacleMap,
                       noise: MeasurementNoise, rng) -> Measurement:
    pos = np.array([target.x, target.y]) if isinstance(target, Pose2D) else np.asarray(target, float)[:2]
    if not visible(robot, pos[None, :], fp, omap)[0]:
        return None
    mean = np.array(h(robot, pos))
    z = mean + noise.chol @ rng.standard_normal(noise.dim)
    r, b = float(z[0]), float(z[1])
    if r <= 0.0:
        # (-r, b) and (r, b + pi) are the same point in the plane
        r, b = -r, b + np.pi
    return Detection(r, float(wrap_angle(b)))


def log_likelihood_batch(z: Measurement, robot: Pose2D, particles: np.ndarray,
                         fp: SensorFootprint, omap: ObstacleMap,
                         noise: MeasurementNoise) -> np.ndarray:
    """log P(z | particle) for every row of ``particles``; -inf for impossible."""
    inside = visible(robot, particles, fp, omap)
    if z is None:
        return np.where(inside, -np.inf, 0.0)
    out = np.full(len(particles), -np.inf)
    if np.any(inside):
        mu = h_batch(robot, particles[inside])
        r = np.array([z.range, z.bearing])[None, :] - mu
        r[:, 1] = wrap_angle(r[:, 1])
        white = r @ noise.chol_inv.T
        out[inside] = -0.5 * np.sum(white * white, axis=1) - noise.log_norm
    return out


def log_likelihood(z: Measurement, robot: Pose2D, particle, fp: SensorFootprint,
                   omap: ObstacleMap, noise: MeasurementNoise) -> float:
    pt = particle.as_array() if isinstance(particle, Pose2D) else np.asarray(particle, float)
    return float(log_likelihood_batch(z, robot, pt[None, :], fp, omap, noise)[0])


def measurement_to_json(z: Measurement) -> Union[None, list]:
    return None if z is None else [z.range, z.bearing]

"""Particle-filter belief over the target pose."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import ControlInput, TargetModel, unicycle_step
from .errors import DegenerateUpdateError
from .sensing import Measurement, MeasurementNoise, log_likelihood_batch
from .world import ObstacleMap, Pose2D, SensorFootprint


@dataclass(frozen=True)
class ParticleBelief:
    """Known robot pose plus ``N`` weighted target particles.

    ``particles`` is an (N, 3) array of (x, y, theta); ``k`` is the time step
    the belief refers to, used to index scheduled target controls. Instances
    are treated as immutable: every operation returns a new belief.
    """

    robot: Pose2D
    particles: np.ndarray
    weights: np.ndarray
    k: int = 0

    @classmethod
    def create(cls, robot: Pose2D, particles, weights=None, k: int = 0) -> "ParticleBelief":
        p = np.array(particles, dtype=float).reshape(-1, 3)
        if len(p) < 1:
            raise ValueError("a belief needs at least one particle")
        if weights is None:
            w = np.full(len(p), 1.0 / len(p))
        else:
            w = np.array(weights, dtype=float)
            if w.shape != (len(p),) or np.any(w < 0) or not np.isfinite(w).all():
                raise ValueError("weights must be finite, non-negative and one per particle")
            total = w.sum()
            if total <= 0:
                raise ValueError("weights sum to zero")
            w = w / total
        return cls(robot, p, w, k)

    @property
    def n(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class SimplifiedBelief:
    particles: np.ndarray
    weights: np.ndarray
    cell_size: float


def predict(b: ParticleBelief, robot_u, target_model: TargetModel, rng,
            dt: float | None = None) -> ParticleBelief:
    """Advance robot and particles one step; weights are untouched."""
    dt = target_model.dt if dt is None else dt
    robot = unicycle_step(b.robot, robot_u, dt)
    return ParticleBelief(robot, target_model.propagate(b.particles, b.k, rng), b.weights, b.k + 1)


def update(b: ParticleBelief, z: Measurement, fp: SensorFootprint, omap: ObstacleMap,
           noise: MeasurementNoise) -> ParticleBelief:
    """Bayes update of the weights with measurement ``z``.

    Raises :class:`DegenerateUpdateError` if no particle can explain ``z``.
    """
    ll = log_likelihood_batch(z, b.robot, b.particles, fp, omap, noise)
    with np.errstate(divide="ignore"):
        ll = ll + np.log(b.weights)
    top = ll.max()
    if not np.isfinite(top):
        raise DegenerateUpdateError("measurement has zero likelihood under every particle")
    w = np.exp(ll - top)
    return replace(b, weights=w / w.sum())


def effective_sample_size(b) -> float:
    return float(1.0 / np.sum(np.square(b.weights)))


def systematic_indices(weights: np.ndarray, u: float) -> np.ndarray:
    """Comb of N pointers ``(u + i) / N`` over the weight CDF; ``u`` in [0, 1)."""
    n = len(weights)
    # work in units of pointer spacing; the small shift absorbs cumsum
    # rounding so a pointer sitting on a cell boundary goes to the next cell
    edges = np.cumsum(weights) * (n / np.sum(weights)) - 1e-9
    return np.minimum(np.searchsorted(edges, u + np.arange(n), side="right"), n - 1)


def resample_low_variance(b: ParticleBelief, rng=None, u: float | None = None) -> ParticleBelief:
    """Low-variance (systematic) resampling; output weights are uniform.

    ``u`` is the comb offset as a fraction of the pointer spacing, drawn
    uniformly from [0, 1) when not given.
    """
    if u is None:
        u = rng.random()
    idx = systematic_indices(b.weights, u)
    n = b.n
    return replace(b, particles=b.particles[idx], weights=np.full(n, 1.0 / n))


def maybe_resample(b: ParticleBelief, rng, ess_fraction: float = 0.5) -> ParticleBelief:
    if effective_sample_size(b) < ess_fraction * b.n:
        return resample_low_variance(b, rng)
    return b


def point_estimate(b) -> np.ndarray:
    """Weighted mean position (x, y)."""
    return b.weights @ b.particles[:, :2]


def simplify_arrays(particles: np.ndarray, weights: np.ndarray, cell_size: float):
    """Merge particles sharing a grid cell into their weighted average.

    Zero-weight particles are dropped. Headings are averaged on the circle.
    Returns ``(particles, weights)`` with one row per occupied cell.
    """
    keep = weights > 0
    if not keep.all():
        particles, weights = particles[keep], weights[keep]
    cells = np.floor(particles[:, :2] / cell_size).astype(np.int64)
    cells -= cells.min(axis=0)
    key = cells[:, 0] * (int(cells[:, 1].max()) + 1) + cells[:, 1]
    uniq, inv = np.unique(key, return_inverse=True)
    m = len(uniq)
    if m == len(key):
        return particles, weights
    wsum = np.bincount(inv, weights=weights, minlength=m)
    out = np.empty((m, 3))
    out[:, 0] = np.bincount(inv, weights=weights * particles[:, 0], minlength=m) / wsum
    out[:, 1] = np.bincount(inv, weights=weights * particles[:, 1], minlength=m) / wsum
    s = np.bincount(inv, weights=weights * np.sin(particles[:, 2]), minlength=m)
    c = np.bincount(inv, weights=weights * np.cos(particles[:, 2]), minlength=m)
    out[:, 2] = np.arctan2(s, c)
    return out, wsum


def simplify(b, cell_size: float = 0.5) -> SimplifiedBelief:
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    p, w = simplify_arrays(b.particles, b.weights, cell_size)
    return SimplifiedBelief(p, w / w.sum(), cell_size)


@dataclass
class FilterStep:
    """Result of one predict/update/resample cycle."""

    belief: ParticleBelief
    degenerate: bool = False
    resampled: bool = False


def filter_step(b: ParticleBelief, robot_u: ControlInput, z: Measurement,
                target_model: TargetModel, fp: SensorFootprint, omap: ObstacleMap,
                noise: MeasurementNoise, rng, ess_fraction: float = 0.5,
                dt: float | None = None) -> FilterStep:
    """Predict, update and (ESS-gated) resample.

    A degenerate update keeps the predicted weights and flags the step.
    """
    pred = predict(b, robot_u, target_model, rng, dt)
    try:
        post = update(pred, z, fp, omap, noise)
        degenerate = False
    except DegenerateUpdateError:
        post, degenerate = pred, True
    out = maybe_resample(post, rng, ess_fraction)
    return FilterStep(out, degenerate, out is not post)

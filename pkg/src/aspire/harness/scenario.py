"""Turning a config plus a seed into a concrete scenario and ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..belief import ParticleBelief
from ..dynamics import TargetModel, unicycle_batch
from ..errors import ConfigError
from ..task import TaskModel
from ..world import ObstacleMap, Pose2D, points_clearance_ok, random_free_point, wrap_angle
from .config import PriorComponent, RandomControls, ScenarioConfig, target_model

STREAMS = ("scenario", "prior", "target", "measurement", "filter", "planner")

#: attempts per ground-truth step before the target turns around in place
TRUTH_TRIES = 100


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per concern, so the planner cannot perturb ground truth."""
    kids = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(STREAMS, kids)}


@dataclass(frozen=True)
class Scenario:
    """A fully specified episode: initial poses, prior and target schedule."""

    cfg: ScenarioConfig
    seed: int
    robot_pose: Pose2D
    target_pose: Pose2D
    prior: tuple
    target: TargetModel

    @property
    def model(self) -> TaskModel:
        c = self.cfg
        return TaskModel(c.omap, c.footprint, c.noise, c.robot, self.target)


def random_target_controls(start: Pose2D, spec: RandomControls, n_steps: int, dt: float,
                           omap: ObstacleMap, rng) -> np.ndarray:
    """Piecewise-constant (v, w) schedule whose noise-free path keeps
    ``spec.clearance`` from obstacles and the map boundary."""
    out = np.zeros((n_steps, 2))
    x = start.as_array()[None, :]
    k = 0
    while k < n_steps:
        n = min(spec.hold, n_steps - k)
        for attempt in range(50):
            if attempt < 40:
                v, w = rng.uniform(*spec.v), rng.uniform(*spec.w)
            else:
                # boxed in: turn on the spot
                v, w = 0.0, spec.w[1] if spec.w[1] != 0 else 0.5
            path, y = [], x
            for _ in range(n):
                y = unicycle_batch(y, v, w, dt)
                path.append(y[0, :2])
            if points_clearance_ok(np.array(path), omap, spec.clearance).all():
                break
        out[k:k + n] = (v, w)
        x = y
        k += n
    return out


def _random_pose(omap: ObstacleMap, rng, margin: float) -> Pose2D:
    p = random_free_point(omap, rng, margin)
    return Pose2D(p[0], p[1], rng.uniform(-np.pi, np.pi))


def realize(cfg: ScenarioConfig, seed: Optional[int] = None) -> Scenario:
    """Draw the seed-dependent parts of a scenario."""
    seed = cfg.seed if seed is None else seed
    rng = rng_streams(seed)["scenario"]
    g = cfg.generator
    tpose, rpose = cfg.target.initial_pose, cfg.robot_pose
    if g is not None:
        if tpose is None:
            tpose = _random_pose(cfg.omap, rng, g.margin)
        if rpose is None:
            for _ in range(10000):
                cand = _random_pose(cfg.omap, rng, max(g.margin, cfg.robot.radius))
                if g.min_distance <= np.hypot(cand.x - tpose.x, cand.y - tpose.y) <= g.max_distance:
                    rpose = cand
                    break
            else:
                raise ConfigError("generator: no robot pose at the requested distance from the target")
    means = [tpose.as_array()]
    prior = []
    for c in cfg.prior:
        mean = c.mean
        if mean == "target":
            mean = tpose
        elif mean == "random":
            sep = g.distractor_separation
            for _ in range(10000):
                mean = _random_pose(cfg.omap, rng, g.margin)
                if all(np.hypot(mean.x - m[0], mean.y - m[1]) >= sep for m in means):
                    break
            else:
                raise ConfigError("generator: cannot place distractor means with the requested separation")
            means.append(mean.as_array())
        prior.append(PriorComponent(c.weight, mean, c.cov))
    ts = cfg.target
    controls = ts.controls
    if ts.kind == "controlled" and ts.random_controls is not None:
        controls = random_target_controls(tpose, ts.random_controls, cfg.T_max + 1, ts.dt, cfg.omap, rng)
    return Scenario(cfg, seed, rpose, tpose, tuple(prior), target_model(ts, controls))


def sample_prior(prior, n: int, omap: ObstacleMap, rng, robot: Pose2D = Pose2D(0.0, 0.0)) -> ParticleBelief:
    """``n`` particles from the Gaussian mixture, rejecting any inside an
    obstacle or outside the map; uniform weights."""
    if n < 1:
        raise ValueError("need at least one particle")
    w = np.array([c.weight for c in prior], dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError("prior weights must be non-negative and sum to 1")
    means = np.array([c.mean.as_array() for c in prior])
    roots = []
    for c in prior:
        vals, vecs = np.linalg.eigh(np.asarray(c.cov, dtype=float))
        roots.append(vecs * np.sqrt(np.clip(vals, 0.0, None)))
    roots = np.array(roots)
    out = np.empty((0, 3))
    drawn, budget = 0, 1000 * n
    while len(out) < n:
        if drawn >= budget:
            raise ConfigError(f"prior rejection sampling failed after {drawn} draws")
        m = min(max(2 * (n - len(out)), 64), budget - drawn)
        comp = rng.choice(len(w), size=m, p=w / w.sum())
        eps = rng.standard_normal((m, 3))
        x = means[comp] + np.einsum("nij,nj->ni", roots[comp], eps)
        drawn += m
        ok = points_clearance_ok(x[:, :2], omap, 0.0)
        out = np.vstack([out, x[ok]])
    out = out[:n]
    out[:, 2] = wrap_angle(out[:, 2])
    return ParticleBelief.create(robot, out)


def ground_truth(sc: Scenario, rng) -> np.ndarray:
    """Target poses for steps 0..T_max from the target model.

    Noise draws that would put the target inside an obstacle or off the map
    are redrawn; if every draw fails the target turns around in place.
    """
    cfg, model = sc.cfg, sc.target
    traj = np.empty((cfg.T_max + 1, 3))
    traj[0] = sc.target_pose.as_array()
    for k in range(cfg.T_max):
        drift = model.drift(traj[k:k + 1], k)
        for _ in range(TRUTH_TRIES):
            nxt = model.add_noise(drift, rng)
            if points_clearance_ok(nxt[0, :2], cfg.omap, 0.0):
                break
        else:
            nxt = traj[k:k + 1].copy()
            nxt[0, 2] = wrap_angle(nxt[0, 2] + np.pi)
        traj[k + 1] = nxt[0]
    return traj

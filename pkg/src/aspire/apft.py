"""Adaptive Particle Filter Tree: UCB tree search over particle beliefs with
progressive widening on observations and a rollout that stops early once a
single step's information reward exceeds a threshold.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from . import _kernels as K
from .belief import ParticleBelief, maybe_resample, update
from .dynamics import ARC_SUBSAMPLES, ControlInput, motion_primitives, sample_feasible_primitive
from .errors import DegenerateUpdateError, PlanningInfeasibleError
from .info import MIParams, gaussian_entropy_h0, reward_from_drift
from .sensing import (Detection, Measurement, MeasurementNoise, measurement_to_json,
                      sample_measurement)
from .task import TaskModel
from .world import ObstacleMap, Pose2D, SensorFootprint


@dataclass(frozen=True)
class PlannerParams:
    """Tree-search hyperparameters.

    ``ucb_c=None`` resolves to ``2 * H0`` and ``delta_r=None`` to
    ``0.6 * H0``, where ``H0`` is the measurement-noise entropy. Pass
    ``delta_r=math.inf`` to disable early rollout termination.
    """

    iterations: int = 300
    horizon: int = 20
    discount: float = 0.95
    ucb_c: Optional[float] = None
    k_o: float = 2.0
    alpha_o: float = 0.5
    delta_r: Optional[float] = None
    mi: MIParams = MIParams()
    final_selection: str = "ucb"
    obs_selection: str = "uniform"
    resample_in_tree: bool = True
    ess_fraction: float = 0.5
    reward_scale: float = 1.0
    record_returns: bool = False
    backend: str = "numba"

    def __post_init__(self):
        if self.iterations < 1 or self.horizon < 1:
            raise ValueError("iterations and horizon must be >= 1")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")
        if self.k_o <= 0 or not 0 < self.alpha_o < 1:
            raise ValueError("need k_o > 0 and 0 < alpha_o < 1")
        if self.ucb_c is not None and self.ucb_c < 0:
            raise ValueError("ucb_c must be non-negative")
        if self.final_selection not in ("ucb", "max_q"):
            raise ValueError("final_selection must be 'ucb' or 'max_q'")
        if self.obs_selection not in ("uniform", "visits"):
            raise ValueError("obs_selection must be 'uniform' or 'visits'")
        if self.backend not in ("numba", "numpy"):
            raise ValueError("backend must be 'numba' or 'numpy'")

    def resolved(self, noise: MeasurementNoise) -> "PlannerParams":
        h0 = abs(gaussian_entropy_h0(noise.dim, noise.Sigma))
        return replace(self,
                       ucb_c=2.0 * h0 if self.ucb_c is None else self.ucb_c,
                       delta_r=0.6 * h0 if self.delta_r is None else self.delta_r)


class ActionNode:
    __slots__ = ("control", "robot_next", "depth", "W", "Q", "children", "empty_child", "returns")

    def __init__(self, control: ControlInput, robot_next: Pose2D, depth: int):
        self.control = control
        self.robot_next = robot_next
        self.depth = depth
        self.W = 0
        self.Q = 0.0
        self.children: list[ObservationNode] = []
        self.empty_child: Optional[ObservationNode] = None
        self.returns: Optional[list] = None


class ObservationNode:
    """Belief node. The root is an observation node with no observation."""

    __slots__ = ("observation", "depth", "W", "children")

    def __init__(self, observation: Measurement = None, depth: int = 0):
        self.observation = observation
        self.depth = depth
        self.W = 0
        self.children: Optional[list[ActionNode]] = None


@dataclass
class SearchStats:
    iterations: int = 0
    rollout_calls: int = 0
    rollout_steps: int = 0
    early_stops: int = 0
    reward_evals: int = 0
    max_depth: int = 0
    wall_time: float = 0.0

    @property
    def mean_rollout_depth(self) -> float:
        return self.rollout_steps / self.rollout_calls if self.rollout_calls else 0.0


@dataclass
class SearchResult:
    control: ControlInput
    root: ObservationNode
    stats: SearchStats = field(default_factory=SearchStats)


def ucb_score(q: float, w: int, parent_w: int, c: float) -> float:
    if w == 0:
        return math.inf
    return q + c * math.sqrt(math.log(parent_w) / w) if parent_w > 0 else q


def ucb_select(parent_w: int, children, c: float):
    """argmax of ``Q + c sqrt(log W_parent / W)``; unvisited children first,
    ties go to the lowest index."""
    best, best_score = None, -math.inf
    for child in children:
        if child.W == 0:
            return child
        s = ucb_score(child.Q, child.W, parent_w, c)
        if s > best_score:
            best, best_score = child, s
    return best


def sample_new_observation(b_pred: ParticleBelief, fp: SensorFootprint, omap: ObstacleMap,
                           noise: MeasurementNoise, rng) -> Measurement:
    """Draw a particle by weight and simulate the sensor on it from ``b_pred.robot``."""
    cdf = np.cumsum(b_pred.weights)
    j = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), b_pred.n - 1)
    return sample_measurement(b_pred.robot, b_pred.particles[j], fp, omap, noise, rng)


def _poly_array(a: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 1, 2))
    return np.ascontiguousarray(a, dtype=float).reshape(n, -1, 2)


class _Compiled:
    """Flat arrays handed to the compiled kernels."""

    #: rejection-sampling attempts per rollout primitive draw
    TRIES = 8

    def __init__(self, model: TaskModel, params: PlannerParams):
        om, fp, nz, rb, tg = model.omap, model.footprint, model.noise, model.robot, model.target
        self.bounds = np.array(om.bounds)
        self.verts, self.edges, self.normals = (_poly_array(a, om.n_obstacles)
                                                for a in (om._verts, om._edges, om._normals))
        self.ctrl_v = np.array([u.v for u in rb.controls])
        self.ctrl_w = np.array([u.w for u in rb.controls])
        self.dt, self.radius = rb.dt, rb.radius
        self.tkind = K.TARGET_CONTROLLED if tg.kind == "controlled" else K.TARGET_AUTONOMOUS
        self.tctrl = np.zeros((1, 2)) if tg.controls is None else np.ascontiguousarray(tg.controls)
        self.tdt, self.tspeed = tg.dt, float(tg.speed)
        self.qsqrt = np.ascontiguousarray(tg.noise._sqrt)
        self.q_zero = tg.noise.is_zero
        self.r_min, self.r_max, self.half = fp.r_min, fp.r_max, fp.half_angle
        self.linv = np.ascontiguousarray(nz.chol_inv)
        self.log_norm = nz.log_norm
        mi = params.mi
        self.lam = 1.0 if mi.lam is None else float(mi.lam)
        self.cell = mi.cell_size if mi.estimator == "sp_simplify" else 0.0
        self.h0 = gaussian_entropy_h0(nz.dim, nz.Sigma)

    @staticmethod
    def supports(model: TaskModel, params: PlannerParams) -> bool:
        return (params.mi.estimator in ("sp", "sp_simplify") and model.noise.dim == 2
                and model.target.drift_map is None)

    def drift(self, b: ParticleBelief) -> np.ndarray:
        out = b.particles.copy()
        K.drift_inplace(out, b.k, self.tkind, self.tctrl, self.tdt, self.tspeed)
        return out

    def reward(self, pose: Pose2D, parts: np.ndarray, w: np.ndarray) -> float:
        return K.mi_sp(pose.x, pose.y, pose.theta, parts, w, self.cell, self.r_min, self.r_max,
                       self.half, self.verts, self.normals, self.linv, self.log_norm,
                       self.lam, self.h0)

    def add_noise(self, parts: np.ndarray, rng) -> np.ndarray:
        if not self.q_zero:
            K.add_noise_inplace(parts, rng.standard_normal(parts.shape), self.qsqrt)
        return parts

    def loglik(self, z: Measurement, b: ParticleBelief) -> np.ndarray:
        out = np.empty(b.n)
        zr, zb = (0.0, 0.0) if z is None else (z.range, z.bearing)
        K.loglik_batch(zr, zb, z is None, b.robot.x, b.robot.y, b.robot.theta, b.particles,
                       self.r_min, self.r_max, self.half, self.verts, self.normals,
                       self.linv, self.log_norm, out)
        return out

    def visible(self, pose: Pose2D, x: float, y: float) -> bool:
        return K.point_visible(pose.x, pose.y, pose.theta, x, y, self.r_min, self.r_max,
                               self.half, self.verts, self.normals)


class APFTPlanner:
    """Plans one action from a particle belief.

    A planner instance holds no state between :meth:`plan` calls apart from
    its configuration, so one instance may be reused across time steps.
    With ``backend="numba"`` (the default) rewards, filter updates and
    rollouts run through compiled kernels whenever the estimator is
    sigma-point based; the numpy reference path is used otherwise.
    """

    def __init__(self, model: TaskModel, params: PlannerParams = PlannerParams()):
        self.model = model
        self.params = params.resolved(model.noise)
        self._h0 = gaussian_entropy_h0(model.noise.dim, model.noise.Sigma)
        self._fast = None
        if self.params.backend == "numba" and _Compiled.supports(model, self.params):
            self._fast = _Compiled(model, self.params)

    # -- public -----------------------------------------------------------
    def plan(self, b: ParticleBelief, rng) -> ControlInput:
        return self.search(b, rng).control

    def search(self, b: ParticleBelief, rng) -> SearchResult:
        t0 = time.perf_counter()
        p = self.params
        stats = SearchStats()
        root = ObservationNode()
        self._expand(root, b.robot)
        if not root.children:
            raise PlanningInfeasibleError("no collision-free motion primitive from the current pose")
        for _ in range(p.iterations):
            self.simulate(b, root, p.horizon, rng, stats)
            root.W += 1
            stats.iterations += 1
        if p.final_selection == "ucb":
            best = ucb_select(root.W, root.children, p.ucb_c)
        else:
            best = max(root.children, key=lambda n: (n.W > 0, n.Q))
        stats.wall_time = time.perf_counter() - t0
        return SearchResult(best.control, root, stats)

    # -- algorithm --------------------------------------------------------
    def _expand(self, node: ObservationNode, robot: Pose2D) -> None:
        node.children = [ActionNode(u, pose, node.depth + 1)
                         for u, pose in motion_primitives(robot, self.model.robot, self.model.omap)]

    def _reward(self, robot_next: Pose2D, drifted: np.ndarray, b: ParticleBelief, rng,
                stats: SearchStats) -> float:
        stats.reward_evals += 1
        r = reward_from_drift(robot_next, drifted, b.weights, self.model, self.params.mi, self._h0, rng)
        return r * self.params.reward_scale

    def _step(self, b: ParticleBelief, robot_next: Pose2D, rng, stats: SearchStats):
        """Reward of moving to ``robot_next`` and the predicted belief."""
        f = self._fast
        if f is None:
            drifted = self.model.target.drift(b.particles, b.k)
            r = self._reward(robot_next, drifted, b, rng, stats)
            return r, ParticleBelief(robot_next, self.model.target.add_noise(drifted, rng),
                                     b.weights, b.k + 1)
        stats.reward_evals += 1
        parts = f.drift(b)
        r = f.reward(robot_next, parts, b.weights) * self.params.reward_scale
        return r, ParticleBelief(robot_next, f.add_noise(parts, rng), b.weights, b.k + 1)

    def _sample_observation(self, bp: ParticleBelief, rng) -> Measurement:
        m, f = self.model, self._fast
        if f is None:
            return sample_new_observation(bp, m.footprint, m.omap, m.noise, rng)
        cdf = np.cumsum(bp.weights)
        j = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), bp.n - 1)
        x, y = bp.particles[j, 0], bp.particles[j, 1]
        if not f.visible(bp.robot, x, y):
            return None
        dx, dy = x - bp.robot.x, y - bp.robot.y
        mean = np.array([math.hypot(dx, dy), math.atan2(dy, dx) - bp.robot.theta])
        zr, zb = mean + m.noise.chol @ rng.standard_normal(2)
        if zr <= 0.0:
            zr, zb = -zr, zb + math.pi
        return Detection(float(zr), float(K.wrap(zb)))

    def _observe(self, b: ParticleBelief, z: Measurement, rng) -> ParticleBelief:
        m, f = self.model, self._fast
        if f is None:
            try:
                b = update(b, z, m.footprint, m.omap, m.noise)
            except DegenerateUpdateError:
                return b
        else:
            with np.errstate(divide="ignore"):
                ll = f.loglik(z, b) + np.log(b.weights)
            top = ll.max()
            if not np.isfinite(top):
                return b
            w = np.exp(ll - top)
            b = replace(b, weights=w / w.sum())
        if self.params.resample_in_tree:
            b = maybe_resample(b, rng, self.params.ess_fraction)
        return b

    def _select_observation(self, node: ActionNode, rng) -> ObservationNode:
        kids = node.children
        if self.params.obs_selection == "visits":
            w = np.array([c.W for c in kids], dtype=float)
            cdf = np.cumsum(w)
            i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            return kids[min(i, len(kids) - 1)]
        return kids[int(rng.integers(len(kids)))]

    def simulate(self, b: ParticleBelief, node: ObservationNode, d: int, rng,
                 stats: Optional[SearchStats] = None) -> float:
        if d == 0:
            return 0.0
        stats = stats if stats is not None else SearchStats()
        p, m = self.params, self.model
        if node.children is None:
            self._expand(node, b.robot)
        if not node.children:
            return 0.0
        stats.max_depth = max(stats.max_depth, node.depth + 1)
        na = ucb_select(node.W, node.children, p.ucb_c)
        r, bp = self._step(b, na.robot_next, rng, stats)

        if len(na.children) <= p.k_o * na.W ** p.alpha_o:
            z = self._sample_observation(bp, rng)
            if z is None and na.empty_child is not None:
                # the empty observation is a single atom: revisit its node
                child = na.empty_child
                ret = r + p.discount * self.simulate(self._observe(bp, z, rng), child, d - 1, rng, stats)
            else:
                child = ObservationNode(z, na.depth)
                na.children.append(child)
                if z is None:
                    na.empty_child = child
                ret = r + p.discount * self.rollout(self._observe(bp, z, rng), d - 1, rng, stats)
        else:
            child = self._select_observation(na, rng)
            ret = r + p.discount * self.simulate(self._observe(bp, child.observation, rng),
                                                 child, d - 1, rng, stats)

        child.W += 1
        na.W += 1
        na.Q += (ret - na.Q) / na.W
        if p.record_returns:
            if na.returns is None:
                na.returns = []
            na.returns.append(ret)
        return ret

    def rollout(self, b: ParticleBelief, d: int, rng, stats: Optional[SearchStats] = None) -> float:
        """Random-primitive rollout, stopping after the first reward above ``delta_r``."""
        stats = stats if stats is not None else SearchStats()
        p, m = self.params, self.model
        stats.rollout_calls += 1
        if self._fast is not None:
            return self._rollout_compiled(b, d, rng, stats)
        total, disc = 0.0, 1.0
        for step in range(d):
            u = sample_feasible_primitive(b.robot, m.robot, m.omap, rng)
            if u is None:
                break
            robot_next = _unicycle(b.robot, u, m.robot.dt)
            drifted = m.target.drift(b.particles, b.k)
            r = self._reward(robot_next, drifted, b, rng, stats)
            stats.rollout_steps += 1
            total += disc * r
            if r > p.delta_r:
                stats.early_stops += 1
                break
            if step + 1 < d:
                b = ParticleBelief(robot_next, m.target.add_noise(drifted, rng), b.weights, b.k + 1)
                disc *= p.discount
        return total

    def _rollout_compiled(self, b: ParticleBelief, d: int, rng, stats: SearchStats) -> float:
        f, p = self._fast, self.params
        pose = b.robot.as_array()
        parts = b.particles.copy()
        acc = np.array([0.0, 1.0])
        k, done, chunk = b.k, 0, 2
        # noise is drawn in doubling chunks so early stops waste little
        while done < d:
            n = min(chunk, d - done)
            eps = rng.standard_normal((n,) + parts.shape)
            unif = rng.random((n, f.TRIES + 1))
            steps, status, k = K.rollout_chunk(
                pose, parts, b.weights, k, acc, n, p.delta_r, p.discount, p.reward_scale,
                f.ctrl_v, f.ctrl_w, f.dt, f.radius, ARC_SUBSAMPLES, f.bounds, f.verts, f.edges,
                f.normals, f.tkind, f.tctrl, f.tdt, f.tspeed, f.qsqrt,
                f.r_min, f.r_max, f.half, f.linv, f.log_norm, f.lam, f.h0, f.cell, eps, unif)
            done += steps
            stats.rollout_steps += steps
            stats.reward_evals += steps
            if status == 1:
                stats.early_stops += 1
            if status:
                break
            chunk *= 2
        return float(acc[0])


def _unicycle(x: Pose2D, u: ControlInput, dt: float) -> Pose2D:
    return Pose2D(x.x + u.v * math.cos(x.theta) * dt, x.y + u.v * math.sin(x.theta) * dt,
                  x.theta + u.w * dt)


def plan(b: ParticleBelief, params: PlannerParams, model: TaskModel, rng) -> ControlInput:
    """Run the tree search from ``b`` and return the control to execute."""
    return APFTPlanner(model, params).plan(b, rng)


# -- inspection helpers ------------------------------------------------------

def iter_action_nodes(root: ObservationNode) -> Iterator[ActionNode]:
    stack = [root]
    while stack:
        node = stack.pop()
        for a in node.children or ():
            yield a
            stack.extend(a.children)


def tree_depth(root: ObservationNode) -> int:
    return max((a.depth for a in iter_action_nodes(root)), default=0)


def tree_to_dict(node, max_depth: Optional[int] = None) -> dict:
    """JSON-serialisable dump of node statistics."""
    if isinstance(node, ActionNode):
        out = {"kind": "action", "control": list(node.control), "W": node.W, "Q": node.Q}
        kids = node.children
    else:
        out = {"kind": "root" if node.depth == 0 else "observation",
               "observation": measurement_to_json(node.observation), "W": node.W}
        kids = node.children or []
    if max_depth is None or node.depth < max_depth:
        out["children"] = [tree_to_dict(c, max_depth) for c in kids]
    return out

"""Closed-loop episodes and their metrics."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..apft import APFTPlanner, PlannerParams
from ..baselines import nbv_plan, rollout_params
from ..belief import ParticleBelief, filter_step, point_estimate
from ..dynamics import ControlInput, unicycle_step
from ..errors import PlanningInfeasibleError
from ..sensing import Measurement, measurement_to_json, sample_measurement
from ..task import TaskModel
from .config import PLANNER_KINDS, ScenarioConfig
from .scenario import Scenario, ground_truth, realize, rng_streams, sample_prior


@dataclass
class EpisodeRecord:
    """Per-step trace of one episode. Index ``i`` holds step ``i + 1``."""

    config: str
    planner: str
    seed: int
    T_max: int
    dt: float
    robot: list = field(default_factory=list)
    target: list = field(default_factory=list)
    measurements: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    plan_times: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.measurements)

    def trace_rows(self, timing: bool = True) -> list[dict]:
        rows = []
        for i in range(self.steps):
            row = {"step": i + 1, "robot": self.robot[i], "target": self.target[i],
                   "control": self.controls[i], "z": measurement_to_json(self.measurements[i]),
                   "estimate": self.estimates[i], "degenerate_update": self.degenerate[i]}
            if timing:
                row["plan_time"] = self.plan_times[i]
            rows.append(row)
        return rows


@dataclass(frozen=True)
class EpisodeMetrics:
    """``t_s`` is the first step with a detection (None if never).
    ``r_vis``, ``r_los`` and ``eps_est`` are over steps ``t_s..end`` and are
    None when the target was never detected."""

    steps: int
    detected: bool
    t_s: Optional[int]
    t_s_seconds: Optional[float]
    r_vis: Optional[float]
    r_los: Optional[float]
    eps_est: Optional[float]
    mean_plan_time: float


def metrics(rec: EpisodeRecord) -> EpisodeMetrics:
    hits = [z is not None for z in rec.measurements]
    mean_t = float(np.mean(rec.plan_times)) if rec.plan_times else 0.0
    if not any(hits):
        return EpisodeMetrics(rec.steps, False, None, None, None, None, None, mean_t)
    first = hits.index(True)
    tracked = hits[first:]
    r_vis = sum(tracked) / len(tracked)
    est = np.array(rec.estimates[first:])
    tru = np.array(rec.target[first:])[:, :2]
    eps = float(np.mean(np.linalg.norm(est - tru, axis=1)))
    return EpisodeMetrics(rec.steps, True, first + 1, (first + 1) * rec.dt, r_vis, 1.0 - r_vis,
                          eps, mean_t)


Planner = Callable[[ParticleBelief, np.random.Generator], ControlInput]


def make_planner(kind: str, model: TaskModel, params: PlannerParams) -> Planner:
    if kind == "aspire":
        return APFTPlanner(model, params).plan
    if kind == "nbv":
        return lambda b, rng: nbv_plan(b, model, params.mi, rng)
    if kind.startswith("rollout") and kind in PLANNER_KINDS:
        return APFTPlanner(model, rollout_params(params, int(kind[len("rollout"):]))).plan
    raise ValueError(f"unknown planner {kind!r}; expected one of {PLANNER_KINDS}")


def run_episode(cfg: ScenarioConfig, planner: str = "aspire", seed: Optional[int] = None,
                scenario: Optional[Scenario] = None) -> EpisodeRecord:
    """Plan, move, observe and filter for up to ``T_max`` steps.

    The ground-truth target trajectory is drawn up front from its own random
    stream, so it does not depend on the planner.
    """
    seed = cfg.seed if seed is None else seed
    sc = scenario if scenario is not None else realize(cfg, seed)
    streams = rng_streams(seed)
    truth = ground_truth(sc, streams["target"])
    model = sc.model
    b = sample_prior(sc.prior, cfg.n_particles, cfg.omap, streams["prior"], sc.robot_pose)
    choose = make_planner(planner, model, cfg.planner)
    rec = EpisodeRecord(cfg.name, planner, seed, cfg.T_max, cfg.robot.dt)
    first_hit = None
    for k in range(1, cfg.T_max + 1):
        t0 = time.perf_counter()
        try:
            u = choose(b, streams["planner"])
        except PlanningInfeasibleError as e:
            raise PlanningInfeasibleError(f"step {k}: {e}") from e
        rec.plan_times.append(time.perf_counter() - t0)
        robot = unicycle_step(b.robot, u, cfg.robot.dt)
        target = truth[k]
        z: Measurement = sample_measurement(robot, target, cfg.footprint, cfg.omap, cfg.noise,
                                            streams["measurement"])
        fs = filter_step(b, u, z, model.target, cfg.footprint, cfg.omap, cfg.noise,
                         streams["filter"], cfg.resample_ess, dt=cfg.robot.dt)
        b = fs.belief
        rec.robot.append([robot.x, robot.y, robot.theta])
        rec.target.append([float(v) for v in target])
        rec.measurements.append(z)
        rec.estimates.append([float(v) for v in point_estimate(b)])
        rec.controls.append([u.v, u.w])
        rec.degenerate.append(fs.degenerate)
        if z is not None and first_hit is None:
            first_hit = k
            if cfg.stop_on_detection:
                break
        if first_hit is not None and cfg.track_steps is not None and k - first_hit >= cfg.track_steps:
            break
    return rec


def penalised_t_s(m: EpisodeMetrics, T_max: int) -> float:
    """Search time with undetected episodes counted as ``T_max + 1``."""
    return float(m.t_s) if m.t_s is not None else float(T_max + 1)


def nan_if_none(x) -> float:
    return math.nan if x is None else float(x)

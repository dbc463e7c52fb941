"""Accuracy and cost of the MI estimators along a pursuit trajectory.

A scripted robot follows the true target at a fixed standoff so the target
stays in view. At every step each estimator scores the robot's next move and
is compared with a large-sample Monte Carlo oracle.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from ..belief import filter_step
from ..dynamics import ControlInput, _path_points
from ..info import MIParams, mutual_information
from ..sensing import sample_measurement
from ..world import Pose2D, points_clearance_ok, wrap_angle
from .config import ScenarioConfig
from .scenario import ground_truth, realize, rng_streams, sample_prior

METHODS = ("sp", "sp_simplify", "taylor2", "taylor0", "mc")


@dataclass(frozen=True)
class BenchRow:
    method: str
    eps_a: float
    eps_r: float
    tau: float
    n: int


def pursuit_control(robot: Pose2D, target, cfg: ScenarioConfig, standoff: float = 3.0,
                    k_v: float = 1.0, k_w: float = 2.0) -> ControlInput:
    """Proportional heading control toward ``target`` holding ``standoff`` metres."""
    rb = cfg.robot
    dx, dy = target[0] - robot.x, target[1] - robot.y
    err = float(wrap_angle(math.atan2(dy, dx) - robot.theta))
    w = float(np.clip(k_w * err, -rb.w_max, rb.w_max))
    v = float(np.clip(k_v * (math.hypot(dx, dy) - standoff), 0.0, rb.v_max)) * max(math.cos(err), 0.0)
    u = ControlInput(v, w)
    if v > 0 and not points_clearance_ok(_path_points(robot, (u,), rb.dt)[0], cfg.omap, rb.radius).all():
        u = ControlInput(0.0, w)
    return u


def _standoff_pose(target, omap, radius: float, rng, standoff: float = 3.0) -> Pose2D:
    for _ in range(1000):
        ang = rng.uniform(-math.pi, math.pi)
        p = Pose2D(target[0] - standoff * math.cos(ang), target[1] - standoff * math.sin(ang), ang)
        if points_clearance_ok(np.array([p.x, p.y]), omap, radius):
            return p
    raise RuntimeError("no free standoff pose around the target")


def mi_benchmark(cfg: ScenarioConfig, n_scenarios: int, seed: int = 0, samples: int = 10_000,
                 oracle_samples: int = 100_000, steps: int = 10,
                 methods=METHODS, min_mi: float = 1e-3) -> tuple[list[BenchRow], list[dict]]:
    """Average absolute error, relative error and per-call time per estimator.

    Steps whose oracle MI is below ``min_mi`` are skipped (relative error is
    meaningless there). Returns the aggregate rows and the per-call records.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be >= 1")
    base = cfg.planner.mi
    records = []
    for s in range(n_scenarios):
        sd = seed + s
        sc = realize(cfg, sd)
        streams = rng_streams(sd)
        truth = ground_truth(sc, streams["target"])
        robot = _standoff_pose(truth[0], cfg.omap, cfg.robot.radius, streams["scenario"])
        b = sample_prior(sc.prior, cfg.n_particles, cfg.omap, streams["prior"], robot)
        model = sc.model
        oracle_rng = np.random.default_rng(np.random.SeedSequence([sd, 1]))
        mc_rng = np.random.default_rng(np.random.SeedSequence([sd, 2]))
        for k in range(1, min(steps, cfg.T_max) + 1):
            u = pursuit_control(b.robot, truth[k], cfg)
            oracle = mutual_information(b, u, model, "mc", replace(base, mc_samples=oracle_samples),
                                        oracle_rng)
            if oracle >= min_mi:
                for meth in methods:
                    params = replace(base, estimator=meth, mc_samples=samples)
                    t0 = time.perf_counter()
                    val = mutual_information(b, u, model, meth, params, mc_rng)
                    dt = time.perf_counter() - t0
                    records.append({"scenario": sd, "step": k, "method": meth, "mi": val,
                                    "oracle": oracle, "time": dt})
            robot_next = Pose2D(b.robot.x + u.v * math.cos(b.robot.theta) * cfg.robot.dt,
                                b.robot.y + u.v * math.sin(b.robot.theta) * cfg.robot.dt,
                                b.robot.theta + u.w * cfg.robot.dt)
            z = sample_measurement(robot_next, truth[k], cfg.footprint, cfg.omap, cfg.noise,
                                   streams["measurement"])
            b = filter_step(b, u, z, model.target, cfg.footprint, cfg.omap, cfg.noise,
                            streams["filter"], cfg.resample_ess, dt=cfg.robot.dt).belief
    return aggregate(records, methods), records


def aggregate(records: list[dict], methods=METHODS) -> list[BenchRow]:
    rows = []
    for meth in methods:
        rs = [r for r in records if r["method"] == meth]
        if not rs:
            rows.append(BenchRow(meth, math.nan, math.nan, math.nan, 0))
            continue
        ea = np.array([abs(r["oracle"] - r["mi"]) for r in rs])
        er = ea / np.array([r["oracle"] for r in rs])
        rows.append(BenchRow(meth, float(ea.mean()), float(er.mean()),
                             float(np.mean([r["time"] for r in rs])), len(rs)))
    return rows

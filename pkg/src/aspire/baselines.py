"""Comparison planners: greedy next-best-view and fixed-depth rollout search."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional

import numpy as np

from .apft import APFTPlanner, PlannerParams
from .belief import ParticleBelief
from .dynamics import ControlInput, motion_primitives
from .errors import PlanningInfeasibleError
from .info import MIParams, gaussian_entropy_h0, reward_from_drift
from .task import TaskModel

ROLLOUT_PRESETS = (10, 20, 30)


def nbv_plan(b: ParticleBelief, model: TaskModel, mi: Optional[MIParams] = None, rng=None,
             tie_tol: float = 1e-12) -> ControlInput:
    """One-step greedy: the feasible primitive with the largest MI.

    Ties, including the all-zero case far from the target, are broken
    uniformly at random.
    """
    mi = mi or MIParams()
    prims = motion_primitives(b.robot, model.robot, model.omap)
    if not prims:
        raise PlanningInfeasibleError("no collision-free motion primitive from the current pose")
    h0 = gaussian_entropy_h0(model.noise.dim, model.noise.Sigma)
    drifted = model.target.drift(b.particles, b.k)
    scores = np.array([reward_from_drift(pose, drifted, b.weights, model, mi, h0, rng)
                       for _, pose in prims])
    best = np.flatnonzero(scores >= scores.max() - tie_tol)
    pick = best[0] if len(best) == 1 else best[rng.integers(len(best))]
    return prims[int(pick)][0]


def rollout_params(params: PlannerParams, depth: int) -> PlannerParams:
    """APFT parameters for a fixed-depth search: horizon ``depth`` and no
    early rollout termination."""
    return replace(params, horizon=depth, delta_r=math.inf)


def fixed_rollout_plan(b: ParticleBelief, params: PlannerParams, model: TaskModel, rng,
                       depth: int = 20) -> ControlInput:
    return APFTPlanner(model, rollout_params(params, depth)).plan(b, rng)

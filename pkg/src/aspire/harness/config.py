"""Scenario configuration: YAML loading, validation and model construction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from ..apft import PlannerParams
from ..dynamics import MotionNoise, RobotModel, TargetModel
from ..errors import ConfigError
from ..info import ESTIMATORS, MIParams
from ..sensing import MeasurementNoise
from ..world import ObstacleMap, Pose2D, SensorFootprint, pose_in_free_space

PLANNER_KINDS = ("aspire", "nbv", "rollout10", "rollout20", "rollout30")

MeanSpec = Union[Pose2D, str]


@dataclass(frozen=True)
class PriorComponent:
    """One Gaussian of the prior mixture.

    ``mean`` is a pose, ``"target"`` (the true initial target pose) or
    ``"random"`` (drawn in free space when the scenario is realised).
    """

    weight: float
    mean: MeanSpec
    cov: np.ndarray


@dataclass(frozen=True)
class RandomControls:
    """Piecewise-constant random target controls."""

    v: tuple = (0.3, 0.8)
    w: tuple = (-0.3, 0.3)
    hold: int = 8
    clearance: float = 1.0


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    Q: np.ndarray
    initial_pose: Optional[Pose2D]
    controls: Optional[np.ndarray] = None
    random_controls: Optional[RandomControls] = None
    speed: float = 0.0
    dt: float = 0.5


@dataclass(frozen=True)
class GeneratorSpec:
    """Per-seed randomisation of initial poses and distractor means.

    ``min_distance``/``max_distance`` bound the initial robot-target
    distance; ``distractor_separation`` is the minimum distance between any
    two prior means.
    """

    min_distance: float = 10.0
    max_distance: float = 18.0
    distractor_separation: float = 10.0
    margin: float = 1.5


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    T_max: int
    omap: ObstacleMap
    footprint: SensorFootprint
    noise: MeasurementNoise
    robot: RobotModel
    robot_pose: Optional[Pose2D]
    target: TargetSpec
    prior: tuple
    n_particles: int = 500
    resample_ess: float = 0.5
    planner: PlannerParams = PlannerParams()
    generator: Optional[GeneratorSpec] = None
    stop_on_detection: bool = False
    track_steps: Optional[int] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)


_TOP_KEYS = {"name", "seed", "T_max", "map", "sensor", "robot", "target", "prior", "filter",
             "planner", "generator", "stop_on_detection", "track_steps"}


def _check_keys(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required key '{key}'")
    return d[key]


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    if not math.isfinite(x) and not (where.endswith("delta_r") and x == math.inf):
        raise ConfigError(f"{where}: must be finite")
    return float(x)


def _matrix(x, n: int, where: str) -> np.ndarray:
    """Full n x n matrix or a length-n diagonal."""
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: not a numeric array") from None
    if a.shape == (n,):
        a = np.diag(a)
    if a.shape != (n, n):
        raise ConfigError(f"{where}: expected {n} diagonal entries or an {n}x{n} matrix")
    if not np.allclose(a, a.T) or np.linalg.eigvalsh(a).min() < -1e-12:
        raise ConfigError(f"{where}: must be symmetric positive semi-definite")
    return a


def _pose(x, where: str) -> Pose2D:
    if not isinstance(x, (list, tuple)) or len(x) not in (2, 3):
        raise ConfigError(f"{where}: expected [x, y] or [x, y, theta]")
    return Pose2D(*(_number(v, where) for v in x))


def _map(d: dict) -> ObstacleMap:
    _check_keys(d, {"bounds", "obstacles"}, "map")
    bounds = _need(d, "bounds", "map")
    if not isinstance(bounds, list) or len(bounds) != 4:
        raise ConfigError("map.bounds: expected [xmin, ymin, xmax, ymax]")
    try:
        return ObstacleMap(tuple(_number(b, "map.bounds") for b in bounds), d.get("obstacles") or [])
    except ValueError as e:
        raise ConfigError(f"map: {e}") from None


def _sensor(d: dict) -> tuple[SensorFootprint, MeasurementNoise]:
    _check_keys(d, {"r_min", "r_max", "half_angle", "Sigma"}, "sensor")
    kw = {k: _number(d[k], f"sensor.{k}") for k in ("r_min", "r_max", "half_angle") if k in d}
    try:
        fp = SensorFootprint(**kw)
        noise = MeasurementNoise(_matrix(_need(d, "Sigma", "sensor"), 2, "sensor.Sigma"))
    except ValueError as e:
        raise ConfigError(f"sensor: {e}") from None
    return fp, noise


def _robot(d: dict) -> tuple[RobotModel, Optional[Pose2D]]:
    _check_keys(d, {"dt", "v_max", "w_max", "v_levels", "w_levels", "radius", "initial_pose"}, "robot")
    kw: dict[str, Any] = {k: _number(d[k], f"robot.{k}") for k in ("dt", "v_max", "w_max", "radius") if k in d}
    for k in ("v_levels", "w_levels"):
        if k in d:
            kw[k] = tuple(_number(v, f"robot.{k}") for v in d[k])
    try:
        robot = RobotModel(**kw)
    except ValueError as e:
        raise ConfigError(f"robot: {e}") from None
    pose = _pose(d["initial_pose"], "robot.initial_pose") if d.get("initial_pose") is not None else None
    return robot, pose


def _target(d: dict, dt: float) -> TargetSpec:
    _check_keys(d, {"kind", "Q", "initial_pose", "controls", "random_controls", "speed"}, "target")
    kind = d.get("kind", "controlled")
    if kind not in ("controlled", "autonomous"):
        raise ConfigError(f"target.kind: expected 'controlled' or 'autonomous', got {kind!r}")
    Q = _matrix(_need(d, "Q", "target"), 3, "target.Q")
    pose = _pose(d["initial_pose"], "target.initial_pose") if d.get("initial_pose") is not None else None
    controls = rc = None
    if kind == "controlled":
        if ("controls" in d) == ("random_controls" in d):
            raise ConfigError("target: a controlled target needs exactly one of 'controls' or 'random_controls'")
        if "controls" in d:
            controls = np.array(d["controls"], dtype=float)
            if controls.ndim != 2 or controls.shape[1] != 2 or len(controls) == 0:
                raise ConfigError("target.controls: expected a list of [v, w] pairs")
        else:
            r = d["random_controls"]
            _check_keys(r, {"v", "w", "hold", "clearance"}, "target.random_controls")
            rc = RandomControls(
                v=tuple(_number(x, "target.random_controls.v") for x in r.get("v", RandomControls.v)),
                w=tuple(_number(x, "target.random_controls.w") for x in r.get("w", RandomControls.w)),
                hold=int(r.get("hold", RandomControls.hold)),
                clearance=_number(r.get("clearance", RandomControls.clearance), "target.random_controls.clearance"))
            if len(rc.v) != 2 or len(rc.w) != 2 or rc.hold < 1:
                raise ConfigError("target.random_controls: v and w are [lo, hi] ranges, hold >= 1")
    speed = _number(d.get("speed", 0.0), "target.speed")
    return TargetSpec(kind, Q, pose, controls, rc, speed, dt)


def _prior(items) -> tuple:
    if not isinstance(items, list) or not items:
        raise ConfigError("prior: expected a non-empty list of components")
    comps = []
    for i, c in enumerate(items):
        where = f"prior[{i}]"
        _check_keys(c, {"weight", "mean", "cov"}, where)
        w = _number(_need(c, "weight", where), f"{where}.weight")
        if w < 0:
            raise ConfigError(f"{where}.weight: must be non-negative")
        mean = _need(c, "mean", where)
        if isinstance(mean, str):
            if mean not in ("target", "random"):
                raise ConfigError(f"{where}.mean: expected a pose, 'target' or 'random'")
        else:
            mean = _pose(mean, f"{where}.mean")
        comps.append(PriorComponent(w, mean, _matrix(_need(c, "cov", where), 3, f"{where}.cov")))
    total = sum(c.weight for c in comps)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"prior: weights sum to {total}, expected 1")
    return tuple(comps)


_PLANNER_KEYS = {"iterations", "horizon", "discount", "ucb_c", "k_o", "alpha_o", "delta_r",
                 "final_selection", "obs_selection", "resample_in_tree", "backend",
                 "estimator", "lam", "cell_size", "mc_samples"}


def _planner(d: dict, ess: float) -> PlannerParams:
    _check_keys(d, _PLANNER_KEYS, "planner")
    mi_kw = {}
    if "estimator" in d:
        if d["estimator"] not in ESTIMATORS:
            raise ConfigError(f"planner.estimator: expected one of {list(ESTIMATORS)}")
        mi_kw["estimator"] = d["estimator"]
    for k in ("lam", "cell_size"):
        if d.get(k) is not None:
            mi_kw[k] = _number(d[k], f"planner.{k}")
    if "mc_samples" in d:
        mi_kw["mc_samples"] = int(d["mc_samples"])
    kw: dict[str, Any] = {}
    for k in ("iterations", "horizon"):
        if k in d:
            kw[k] = int(d[k])
    for k in ("discount", "ucb_c", "k_o", "alpha_o", "delta_r"):
        if d.get(k) is not None:
            v = d[k]
            kw[k] = math.inf if v in ("inf", ".inf") else _number(v, f"planner.{k}")
    for k in ("final_selection", "obs_selection", "backend"):
        if k in d:
            kw[k] = str(d[k])
    if "resample_in_tree" in d:
        kw["resample_in_tree"] = bool(d["resample_in_tree"])
    try:
        return PlannerParams(mi=MIParams(**mi_kw), ess_fraction=ess, **kw)
    except ValueError as e:
        raise ConfigError(f"planner: {e}") from None


def _generator(d) -> Optional[GeneratorSpec]:
    if d is None:
        return None
    _check_keys(d, {"min_distance", "max_distance", "distractor_separation", "margin"}, "generator")
    g = GeneratorSpec(**{k: _number(v, f"generator.{k}") for k, v in d.items()})
    if not 0 <= g.min_distance <= g.max_distance:
        raise ConfigError("generator: need 0 <= min_distance <= max_distance")
    return g


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a config mapping and build the typed scenario description."""
    _check_keys(raw, _TOP_KEYS, "config")
    omap = _map(_need(raw, "map", "config"))
    fp, noise = _sensor(_need(raw, "sensor", "config"))
    robot, robot_pose = _robot(_need(raw, "robot", "config"))
    target = _target(_need(raw, "target", "config"), robot.dt)
    prior = _prior(_need(raw, "prior", "config"))
    filt = raw.get("filter") or {}
    _check_keys(filt, {"n_particles", "resample_ess"}, "filter")
    n = int(filt.get("n_particles", 500))
    ess = _number(filt.get("resample_ess", 0.5), "filter.resample_ess")
    if n < 1 or not 0 <= ess <= 1:
        raise ConfigError("filter: need n_particles >= 1 and 0 <= resample_ess <= 1")
    gen = _generator(raw.get("generator"))
    if gen is None:
        if robot_pose is None or target.initial_pose is None:
            raise ConfigError("initial poses are required when no generator section is given")
        if any(isinstance(c.mean, str) and c.mean == "random" for c in prior):
            raise ConfigError("prior: 'random' means need a generator section")
    for name, pose in (("robot", robot_pose), ("target", target.initial_pose)):
        if pose is not None and not pose_in_free_space(pose, omap, robot.radius if name == "robot" else 0.0):
            raise ConfigError(f"{name}.initial_pose is not collision-free")
    T_max = int(_need(raw, "T_max", "config"))
    seed = int(raw.get("seed", 0))
    if T_max < 1 or seed < 0:
        raise ConfigError("T_max must be >= 1 and seed non-negative")
    track = raw.get("track_steps")
    return ScenarioConfig(
        name=str(raw.get("name", "scenario")), seed=seed, T_max=T_max, omap=omap, footprint=fp,
        noise=noise, robot=robot, robot_pose=robot_pose, target=target, prior=prior,
        n_particles=n, resample_ess=ess, planner=_planner(raw.get("planner") or {}, ess),
        generator=gen, stop_on_detection=bool(raw.get("stop_on_detection", False)),
        track_steps=None if track is None else int(track), raw=raw)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from None
    return parse_config(raw)


def target_model(spec: TargetSpec, controls: Optional[np.ndarray]) -> TargetModel:
    return TargetModel(spec.kind, spec.dt, MotionNoise(spec.Q), controls, spec.speed)

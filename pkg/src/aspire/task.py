"""Bundle of the models a planner needs to simulate the search task."""
from __future__ import annotations

from dataclasses import dataclass

from .dynamics import RobotModel, TargetModel
from .sensing import MeasurementNoise
from .world import ObstacleMap, SensorFootprint


@dataclass(frozen=True)
class TaskModel:
    omap: ObstacleMap
    footprint: SensorFootprint
    noise: MeasurementNoise
    robot: RobotModel
    target: TargetModel

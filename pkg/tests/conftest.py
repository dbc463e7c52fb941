import numpy as np
import pytest

from aspire import (MeasurementNoise, MotionNoise, ObstacleMap, RobotModel, SensorFootprint,
                    TargetModel, TaskModel, box)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def open_map():
    return ObstacleMap.empty(50.0, 50.0)


@pytest.fixture(scope="session")
def task(open_map):
    """Open 50 m map, Sigma = diag(0.5, 0.05), stationary target with Q = diag(0.5, 0.5, 0.1)."""
    tm = TargetModel("controlled", 0.5, MotionNoise(np.diag([0.5, 0.5, 0.1])), np.zeros((1, 2)))
    return TaskModel(open_map, SensorFootprint(), MeasurementNoise(np.diag([0.5, 0.05])),
                     RobotModel(), tm)


@pytest.fixture(scope="session")
def cluttered_task():
    omap = ObstacleMap((0, 0, 50, 50), [box(25, 25, 4, 4), box(15, 30, 3, 6), box(35, 12, 5, 3)])
    tm = TargetModel("controlled", 0.5, MotionNoise(np.diag([0.5, 0.5, 0.1])),
                     np.tile([0.5, 0.1], (300, 1)))
    return TaskModel(omap, SensorFootprint(), MeasurementNoise(np.diag([0.5, 0.05])), RobotModel(), tm)


#: one line per acceptance criterion, printed at the end of the session
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])

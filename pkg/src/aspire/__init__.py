"""Target search and tracking with sigma-point mutual information and an
adaptive particle-filter tree planner."""

from .apft import APFTPlanner, PlannerParams, SearchResult, plan
from .baselines import ROLLOUT_PRESETS, fixed_rollout_plan, nbv_plan
from .belief import (ParticleBelief, filter_step, maybe_resample, point_estimate, predict,
                     resample_low_variance, simplify, update)
from .dynamics import (ControlInput, MotionNoise, RobotModel, TargetModel, motion_primitives,
                       target_step, unicycle_step)
from .errors import (AspireError, ConfigError, ControlLimitError, DegenerateGeometryError,
                     DegenerateUpdateError, PlanningInfeasibleError)
from .info import MIParams, gaussian_entropy_h0, mutual_information
from .sensing import Detection, MeasurementNoise, sample_measurement
from .task import TaskModel
from .world import ObstacleMap, Pose2D, SensorFootprint, box, visible

__version__ = "0.1.0"

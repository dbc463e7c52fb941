"""Scenarios, closed-loop episodes, metrics, benchmarks and the CLI."""

from .bench import BenchRow, mi_benchmark, pursuit_control
from .compare import aggregate, run_batch
from .config import PLANNER_KINDS, ScenarioConfig, load_config, parse_config
from .episode import EpisodeMetrics, EpisodeRecord, metrics, run_episode
from .scenario import Scenario, ground_truth, realize, rng_streams, sample_prior

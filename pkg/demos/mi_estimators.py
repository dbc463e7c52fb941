"""
Comparing entropy estimators on a predicted measurement
=======================================================

A robot looks at a two-lobed particle cloud. We build the censored
measurement mixture it would see after one step and score its entropy with
every estimator, using a large Monte Carlo run as the reference.
"""

import time

import numpy as np

from aspire import MeasurementNoise, ObstacleMap, ParticleBelief, Pose2D, SensorFootprint
from aspire.info import (build_censored_mixture, entropy_mc, entropy_sp, entropy_taylor0,
                         entropy_taylor2, gaussian_entropy_h0)

rng = np.random.default_rng(0)

# Two clumps of target hypotheses in front of the robot, a third one behind it
# (out of view, so it ends up in the empty-observation atom).
clumps = [(14.0, 11.0, 150), (13.0, 8.0, 150), (5.0, 10.0, 100)]
pts = np.vstack([np.c_[rng.normal(x, 0.6, n), rng.normal(y, 0.6, n), np.zeros(n)]
                 for x, y, n in clumps])
robot = Pose2D(10.0, 10.0, 0.0)
b = ParticleBelief.create(robot, pts)

noise = MeasurementNoise(np.diag([0.5, 0.05]))
mix = build_censored_mixture(b, robot, SensorFootprint(), ObstacleMap.empty(30, 30), noise)
print(f"{mix.n_components} particles in view, empty-observation mass {mix.empty_mass:.3f}")

h0 = gaussian_entropy_h0(2, noise.Sigma)
ref, se = entropy_mc(mix, 200_000, rng)
print(f"reference entropy {ref:.4f} +/- {se:.4f} nats, MI {ref - h0 * mix.detect_mass:.4f}")

for name, f in [("sigma points", entropy_sp), ("taylor, 2nd", entropy_taylor2),
                ("taylor, 0th", entropy_taylor0)]:
    t0 = time.perf_counter()
    val = f(mix)
    ms = (time.perf_counter() - t0) * 1e3
    print(f"{name:>13}: {val:.4f}  error {abs(val - ref):.4f}  ({ms:.1f} ms)")

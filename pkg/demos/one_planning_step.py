"""
Looking inside one tree search
==============================

Plan a single action from a belief that sits just outside the sensor's
field of view and look at what the search built.
"""

import numpy as np

from aspire import APFTPlanner, PlannerParams, ParticleBelief, Pose2D
from aspire.apft import iter_action_nodes, tree_depth
from aspire.harness.config import load_config
from aspire.harness.scenario import realize

cfg = load_config("configs/unimodal.yaml")
model = realize(cfg, 0).model

# Target hypotheses 8 m to the robot's left: the robot has to turn and drive
# before anything can be seen.
rng = np.random.default_rng(1)
robot = Pose2D(30.0, 18.0, 0.0)
pts = np.c_[rng.normal(30.0, 1.5, 500), rng.normal(26.0, 1.5, 500), rng.uniform(-3, 3, 500)]
b = ParticleBelief.create(robot, pts)

planner = APFTPlanner(model, PlannerParams(final_selection="max_q"))
res = planner.search(b, rng)
st = res.stats
print(f"chosen control v={res.control.v:.2f} m/s, w={res.control.w:.2f} rad/s")
print(f"{st.iterations} iterations in {st.wall_time:.2f} s; tree depth {tree_depth(res.root)}")
print(f"rollouts: {st.rollout_calls}, mean length {st.mean_rollout_depth:.1f} steps, "
      f"{st.early_stops} stopped early on a large reward")

# Root children: visits and value. Widening keeps observation branching small.
for a in sorted(res.root.children, key=lambda a: -a.W):
    print(f"  v={a.control.v:4.1f} w={a.control.w:5.2f}  W={a.W:3d}  Q={a.Q:.3f}  "
          f"observation children={len(a.children)}")

widest = max(len(a.children) for a in iter_action_nodes(res.root))
print("widest observation fan-out anywhere in the tree:", widest)

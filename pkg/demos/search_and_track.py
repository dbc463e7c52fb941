"""
A full search-and-track episode
===============================

Run ASPIRe and the greedy next-best-view baseline on the same seed (same
target path, same prior) and compare how quickly each finds the target and
how well it keeps it in view afterwards.
"""

import sys

from aspire.harness.config import load_config
from aspire.harness.episode import metrics, run_episode

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = load_config("configs/unimodal.yaml")

for planner in ("aspire", "nbv"):
    rec = run_episode(cfg, planner, seed)
    m = metrics(rec)
    if not m.detected:
        print(f"{planner:>6}: never saw the target in {rec.steps} steps")
        continue
    print(f"{planner:>6}: found at step {m.t_s} ({m.t_s_seconds:.1f} s), "
          f"in view {m.r_vis:.0%} of the time afterwards, "
          f"mean position error {m.eps_est:.2f} m, {m.mean_plan_time * 1e3:.0f} ms per plan")

# The trace has one row per step, e.g. the last few measurements of ASPIRe:
rec = run_episode(cfg, "aspire", seed)
for row in rec.trace_rows(timing=False)[-3:]:
    print(row["step"], row["z"], [round(v, 2) for v in row["estimate"]])

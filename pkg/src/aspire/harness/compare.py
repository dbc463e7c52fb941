"""Batches of episodes over seeds and planners, and CSV/JSONL writers."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import ScenarioConfig
from .episode import EpisodeMetrics, EpisodeRecord, metrics, penalised_t_s, run_episode

METRIC_FIELDS = ("config", "planner", "seed", "steps", "detected", "t_s", "t_s_seconds",
                 "r_vis", "r_los", "eps_est")
TIMING_FIELDS = ("mean_plan_time",)
AGG_FIELDS = ("planner", "episodes", "detected", "mean_t_s", "median_t_s", "mean_r_vis",
              "mean_r_los", "mean_eps_est")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def metrics_row(rec: EpisodeRecord, m: EpisodeMetrics, timing: bool = False) -> dict:
    row = {"config": rec.config, "planner": rec.planner, "seed": rec.seed}
    row.update(asdict(m))
    if not timing:
        row.pop("mean_plan_time")
    return row


def write_csv(rows: Sequence[dict], fields: Sequence[str], fh) -> None:
    w = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f)) for f in fields])


def csv_text(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    write_csv(rows, fields, buf)
    return buf.getvalue()


def trace_lines(rec: EpisodeRecord, timing: bool = False) -> Iterable[str]:
    head = {"config": rec.config, "planner": rec.planner, "seed": rec.seed}
    for row in rec.trace_rows(timing):
        yield json.dumps({**head, **row}, sort_keys=True, allow_nan=False)


def _one(args) -> tuple[EpisodeRecord, EpisodeMetrics]:
    cfg, planner, seed = args
    rec = run_episode(cfg, planner, seed)
    return rec, metrics(rec)


def run_batch(cfg: ScenarioConfig, planners: Sequence[str], seeds: Sequence[int],
              jobs: int = 1) -> list[tuple[EpisodeRecord, EpisodeMetrics]]:
    """All (seed, planner) episodes, ordered by seed then planner order."""
    tasks = [(cfg, p, s) for s in seeds for p in planners]
    if jobs <= 1:
        return [_one(t) for t in tasks]
    with ProcessPoolExecutor(jobs) as ex:
        return list(ex.map(_one, tasks))


def aggregate(results, T_max: int, timing: bool = False) -> list[dict]:
    """Per-planner summary. Undetected episodes count as ``T_max + 1`` in
    the search-time statistics and are left out of the tracking metrics."""
    by: dict[str, list[EpisodeMetrics]] = {}
    for rec, m in results:
        by.setdefault(rec.planner, []).append(m)
    out = []
    for planner, ms in by.items():
        ts = [penalised_t_s(m, T_max) for m in ms]

        def mean_of(attr):
            vals = [getattr(m, attr) for m in ms if getattr(m, attr) is not None]
            return float(np.mean(vals)) if vals else None

        row = {"planner": planner, "episodes": len(ms), "detected": sum(m.detected for m in ms),
               "mean_t_s": float(np.mean(ts)), "median_t_s": float(np.median(ts)),
               "mean_r_vis": mean_of("r_vis"), "mean_r_los": mean_of("r_los"),
               "mean_eps_est": mean_of("eps_est")}
        if timing:
            row["mean_plan_time"] = float(np.mean([m.mean_plan_time for m in ms]))
        out.append(row)
    return out


def agg_fields(timing: bool) -> tuple:
    return AGG_FIELDS + (TIMING_FIELDS if timing else ())


def metric_fields(timing: bool) -> tuple:
    return METRIC_FIELDS + (TIMING_FIELDS if timing else ())


def seeds_from(base: int, n: int, explicit: Optional[Sequence[int]] = None) -> list[int]:
    return list(explicit) if explicit else [base + i for i in range(n)]

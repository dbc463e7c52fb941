"""Command line entry point: ``aspire {run,bench-mi,compare,validate-config}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from ..errors import ConfigError
from .bench import METHODS, mi_benchmark
from .compare import (agg_fields, aggregate, csv_text, metric_fields, metrics_row, run_batch,
                      seeds_from, trace_lines)
from .config import PLANNER_KINDS, load_config
from .episode import metrics, run_episode

log = logging.getLogger("aspire")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            yield fh


def _trace_path(out: Optional[str], trace: Optional[str]) -> Optional[str]:
    if trace:
        return trace
    if out and out != "-":
        return str(Path(out).with_suffix(".jsonl"))
    return None


def cmd_run(a) -> int:
    cfg = load_config(a.config)
    seed = cfg.seed if a.seed is None else a.seed
    rec = run_episode(cfg, a.planner, seed)
    m = metrics(rec)
    with _output(a.out) as fh:
        fh.write(csv_text([metrics_row(rec, m, a.timing)], metric_fields(a.timing)))
    tp = _trace_path(a.out, a.trace)
    if tp:
        with open(tp, "w") as fh:
            for line in trace_lines(rec, a.timing):
                fh.write(line + "\n")
    log.info("planner=%s seed=%d steps=%d t_s=%s", a.planner, seed, rec.steps, m.t_s)
    return EXIT_OK


def cmd_bench(a) -> int:
    cfg = load_config(a.config)
    seed = cfg.seed if a.seed is None else a.seed
    rows, _ = mi_benchmark(cfg, a.scenarios, seed, samples=a.samples,
                           oracle_samples=a.oracle_samples, steps=a.steps, methods=tuple(a.methods))
    fields = ("method", "eps_a", "eps_r", "tau", "n")
    with _output(a.out) as fh:
        fh.write(csv_text([asdict(r) for r in rows], fields))
    return EXIT_OK


def cmd_compare(a) -> int:
    cfg = load_config(a.config)
    seeds = seeds_from(cfg.seed, a.seeds, a.seed_list)
    if a.t_max is not None:
        cfg = replace(cfg, T_max=a.t_max)
    results = run_batch(cfg, a.planners, seeds, a.jobs)
    with _output(a.out) as fh:
        fh.write(csv_text(aggregate(results, cfg.T_max, a.timing), agg_fields(a.timing)))
    if a.episodes:
        with _output(a.episodes) as fh:
            fh.write(csv_text([metrics_row(r, m, a.timing) for r, m in results],
                              metric_fields(a.timing)))
    if a.trace:
        with open(a.trace, "w") as fh:
            for rec, _ in results:
                for line in trace_lines(rec, a.timing):
                    fh.write(line + "\n")
    return EXIT_OK


def cmd_validate(a) -> int:
    cfg = load_config(a.config)
    print(f"ok: {cfg.name} ({len(cfg.prior)} prior component(s), {cfg.omap.n_obstacles} obstacle(s))")
    return EXIT_OK


def _planners(text: str) -> list[str]:
    out = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in out if p not in PLANNER_KINDS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown planner(s) {bad}; choose from {PLANNER_KINDS}")
    return out


def _methods(text: str) -> list[str]:
    out = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in out if p not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown estimator(s) {bad}; choose from {METHODS}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aspire", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", required=True, help="scenario YAML file")
        sp.add_argument("--out", default=None, help=out_help + " (default: stdout)")

    r = sub.add_parser("run", help="run one episode")
    common(r, "metrics CSV")
    r.add_argument("--planner", choices=PLANNER_KINDS, default="aspire")
    r.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    r.add_argument("--trace", default=None, help="JSON-lines trace (default: --out with .jsonl)")
    r.add_argument("--timing", action="store_true", help="include wall-clock planning times")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench-mi", help="MI estimator accuracy and cost benchmark")
    common(b, "table CSV")
    b.add_argument("--scenarios", type=int, default=20)
    b.add_argument("--samples", type=int, default=10_000, help="samples for the 'mc' row")
    b.add_argument("--oracle-samples", type=int, default=100_000)
    b.add_argument("--steps", type=int, default=10, help="pursuit steps per scenario")
    b.add_argument("--methods", type=_methods, default=list(METHODS))
    b.add_argument("--seed", type=int, default=None)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("compare", help="batch of seeds x planners, aggregated")
    common(c, "aggregate CSV")
    c.add_argument("--planners", type=_planners, default=["aspire", "nbv", "rollout30"])
    c.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds from the config seed")
    c.add_argument("--seed-list", type=int, nargs="+", default=None)
    c.add_argument("--t-max", type=int, default=None)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--episodes", default=None, help="per-episode metrics CSV")
    c.add_argument("--trace", default=None, help="JSON-lines traces of every episode")
    c.add_argument("--timing", action="store_true")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate-config", help="check a scenario file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

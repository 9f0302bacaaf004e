"""Command line entry point: ``sgreplan run ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .detect import DetectorConfig
from .harness import (DEFAULT_STRATEGIES, DEFAULT_THRESHOLDS, HarnessConfig, Strategy,
                      build_buffer, run_ablations, run_benchmark, run_sweep)
from .membank import BufferLoadError, load_buffer, save_buffer
from .simworld import NoiseConfig, ScenarioError, load_suite

log = logging.getLogger("sgreplan")


def bundled_suite_path() -> Path:
    return Path(str(resources.files("sgreplan") / "data" / "kitchen_suite.yaml"))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgreplan", description="Scene-graph replanning benchmark")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the benchmark and write a report")
    run.add_argument("--suite", type=Path, default=None,
                     help="scenario suite YAML (default: bundled kitchen suite)")
    run.add_argument("--strategies", default=",".join(s.name for s in DEFAULT_STRATEGIES),
                     help="comma list of kind[:detector], e.g. none,proactive:object_count")
    run.add_argument("--threshold", type=float, default=0.9)
    run.add_argument("--sweep", action="store_true", help="also sweep the detection threshold")
    run.add_argument("--ablations", action="store_true", help="also run the ablation study")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--buffer", type=Path, default=None,
                     help="demonstration buffer; built from the suite and saved here if absent")
    run.add_argument("--report", type=Path, default=Path("report.json"))
    run.add_argument("--traces", type=Path, default=None, help="directory for episode traces")
    run.add_argument("--reasoner-endpoint", default=None)
    run.add_argument("--noise", type=float, default=0.0,
                     help="per-object drop and state-flip probability of observations")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def _setup(args):
    suite = load_suite(args.suite or bundled_suite_path())
    strategies = tuple(Strategy.parse(s) for s in args.strategies.split(",") if s.strip())
    if not strategies:
        raise ValueError("no strategies given")
    noise = NoiseConfig(drop_prob=args.noise, flip_prob=args.noise)
    cfg = HarnessConfig(detector=DetectorConfig(threshold=args.threshold), noise=noise,
                        reasoner_endpoint=args.reasoner_endpoint)
    if args.buffer is not None and args.buffer.exists():
        buffer = load_buffer(args.buffer)
    else:
        buffer = build_buffer(suite, cfg.geometry)
        if args.buffer is not None:
            save_buffer(buffer, args.buffer)
    return suite, strategies, cfg, buffer


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        suite, strategies, cfg, buffer = _setup(args)
    except (ValueError, OSError, ScenarioError, BufferLoadError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    report = run_benchmark(suite, strategies, cfg, args.seed, buffer)
    if args.sweep:
        report = report.merge(run_sweep(suite, DEFAULT_THRESHOLDS, cfg, args.seed, buffer))
    if args.ablations:
        report = report.merge(run_ablations(suite, cfg, args.seed, buffer))
    report.write(args.report)
    if args.traces is not None:
        report.write_traces(args.traces)
    print(report.to_csv(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())

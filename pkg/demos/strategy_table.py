"""Run the four strategies over the bundled kitchen suite and print the table.

Pass a threshold as the first argument to change the detection cutoff,
e.g. ``python3 demos/strategy_table.py 0.85``.
"""
import sys

from sgreplan import HarnessConfig, build_buffer, run_benchmark
from sgreplan.simworld import builtin_suite


def main(argv):
    theta = float(argv[1]) if len(argv) > 1 else 0.9
    suite = builtin_suite()
    cfg = HarnessConfig().with_threshold(theta)
    report = run_benchmark(suite, config=cfg, buffer=build_buffer(suite))
    sec = report.sections[0]
    print(f"{len(suite.scenarios)} scenarios, threshold {theta:.2f}\n")
    print(f"{'strategy':16s} {'SR %':>7s} {'FDR %':>7s} {'TET s':>7s} {'replans':>8s}")
    for row in sec.rows:
        fdr = f"{row['fdr']:7.1f}" if "fdr" in row else f"{'-':>7s}"
        print(f"{row['strategy']:16s} {row['sr']:7.1f} {fdr} {row['tet']:7.2f} {row['replans']:8d}")

    by_cat = {}
    for e in sec.episodes:
        if e.strategy == "proactive":
            ok, n = by_cat.get(e.failure_category, (0, 0))
            by_cat[e.failure_category] = (ok + e.success, n + 1)
    print("\nproactive success by failure category")
    for cat, (ok, n) in sorted(by_cat.items()):
        print(f"  {cat:12s} {ok}/{n}")


if __name__ == "__main__":
    main(sys.argv)

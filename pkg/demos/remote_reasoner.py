"""Point episodes at a replay server for the reasoning step.

Answers given by the rule table are recorded as fixtures first. The server
then replays them, and afterwards misbehaves in each supported way; the
client falls back to the rules every time, so outcomes do not move.
"""
import logging
from dataclasses import replace

from sgreplan import HarnessConfig, Reasoner, Strategy, build_buffer, run_episode
from sgreplan.fixture_server import MODES, FixtureServer, FixtureStore, RecordingRules
from sgreplan.harness import scripted_failing_step
from sgreplan.simworld import builtin_suite

logging.basicConfig(level=logging.ERROR)

NAMES = ["heat_potato/bowl-in-microwave-a", "cook_egg/potato-on-pan-a", "make_salad/apple-in-bowl-b"]


def run(specs, buffer, cfg, reasoner=None):
    pro = Strategy.parse("proactive")
    out = []
    for spec in specs:
        f = scripted_failing_step(spec, cfg, 0, buffer)
        r = run_episode(spec, pro, cfg, 0, buffer, f, reasoner() if reasoner else None)
        sources = [ev["source"] for ev in r.trace if ev["event"] == "replan"]
        out.append((spec.name, r.success, r.tet, sources))
    return out


def main():
    suite = builtin_suite()
    buffer = build_buffer(suite)
    specs = [s for s in suite.scenarios if s.name in NAMES]
    cfg = HarnessConfig()

    store = FixtureStore()
    base = run(specs, buffer, cfg, lambda: Reasoner(RecordingRules(store)))
    print(f"recorded {len(store.pairs)} fixtures")
    for mode in MODES:
        with FixtureServer(store, mode=mode, stall=0.3) as srv:
            rcfg = replace(cfg, reasoner_endpoint=srv.url, reasoner_timeout=0.1, remote_first=True)
            got = run(specs, buffer, rcfg)
        same = [(n, s, t) for n, s, t, _ in got] == [(n, s, t) for n, s, t, _ in base]
        print(f"{mode:18s} answered by {sorted({x for *_, src in got for x in src})} "
              f"outcomes unchanged: {same}")


if __name__ == "__main__":
    main()

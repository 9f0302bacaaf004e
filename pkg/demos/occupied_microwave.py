"""Walk through one pre-step check on the heat-potato task.

The microwave already holds a bowl when the plan wants to put the plate
in. The script scores the scene against the demonstrations, diagnoses the
mismatch, prints the recovery and then runs the episode with and without
the pre-step check.
"""
import logging

from sgreplan import (HarnessConfig, Strategy, build_buffer, build_scene_graph, proactive_check,
                      run_episode)
from sgreplan.core import graph_to_text
from sgreplan.harness import scripted_failing_step
from sgreplan.replan import RuleReasoner, build_request
from sgreplan.simworld import builtin_suite, init_scenario, observe, step

logging.basicConfig(level=logging.WARNING)


def main():
    suite = builtin_suite()
    buffer = build_buffer(suite)
    spec = next(s for s in suite.scenarios if s.name == "heat_potato/bowl-in-microwave-a")
    plan = spec.task.nominal_plan

    world = step(init_scenario(spec), plan[0]).world  # open microwave
    g = build_scene_graph(observe(world), plan[1], focus=True)
    print("observed before", plan[1])
    print(graph_to_text(g), "\n")

    decision = proactive_check(g, buffer)
    best = decision.best_report
    print(f"best reference {decision.best_reference.demo_id}: S={best.s:.4f} "
          f"(node {best.s_node:.3f}, edge {best.s_edge:.3f}, struc {best.s_struc:.3f})")
    print("triggered:", decision.triggered, "\n")

    req = build_request(g, decision.best_reference.graph, best.matching,
                        spec.task.goal.render(),
                        [o.category for o in observe(world).objects])
    rules = RuleReasoner()
    diag = rules.diagnose(req)
    print(diag.kind, "-", diag.explanation)
    print("recovery:", [str(a) for a in rules.propose(diag, req).actions], "\n")

    cfg = HarnessConfig()
    f = scripted_failing_step(spec, cfg, 0, buffer)
    for name in ("none", "proactive"):
        r = run_episode(spec, Strategy.parse(name), cfg, 0, buffer, f)
        print(f"{name:10s} success={r.success} replans={r.replans} tet={r.tet:.1f}s")


if __name__ == "__main__":
    main()

import json

import pytest

from sgreplan.core import ConfigurationError
from sgreplan.harness import (DEFAULT_STRATEGIES, EpisodeResult, HarnessConfig, Strategy,
                              aggregate, run_benchmark, run_episode, run_sweep,
                              scripted_failing_step)
from sgreplan.simmatch import MatchToggles

CFG = HarnessConfig()


def _tasks(suite, *names):
    return suite.filter(lambda s: s.task.name in names)


def _episode(suite, buffer, name, strategy, cfg=CFG):
    spec = next(s for s in suite.scenarios if s.name == name)
    f = scripted_failing_step(spec, cfg, 0, buffer)
    return run_episode(spec, Strategy.parse(strategy), cfg, 0, buffer, f)


def test_strategy_parsing():
    assert Strategy.parse("proactive").detector == "scene_graph"
    assert Strategy.parse("proactive:object_count").name == "proactive:object_count"
    assert Strategy.parse("none").detector is None
    with pytest.raises(ConfigurationError):
        Strategy("none", "scene_graph")
    with pytest.raises(ConfigurationError):
        Strategy.parse("sometimes")
    with pytest.raises(ConfigurationError):
        Strategy("proactive", "pixels")


def test_occupied_microwave_proactive(suite, buffer):
    r = _episode(suite, buffer, "heat_potato/bowl-in-microwave-a", "proactive")
    assert r.success and r.replans == 1
    assert r.detection_step == 1 == r.failing_step  # the put_in step
    assert r.detected_before_failure
    kinds = [ev["event"] for ev in r.trace]
    assert kinds.index("replan") < len(kinds) - 1 and kinds[-1] == "end"


def test_occupied_microwave_none(suite, buffer):
    r = _episode(suite, buffer, "heat_potato/bowl-in-microwave-a", "none")
    assert not r.success and r.replans == 0 and not r.detected


def test_dropped_potato_online_too_late(suite, buffer):
    r = _episode(suite, buffer, "cook_egg/potato-dropped-on-pan-a", "posthoc_online")
    assert r.damaged and not r.success
    pro = _episode(suite, buffer, "cook_egg/potato-dropped-on-pan-a", "proactive")
    assert pro.success and not pro.damaged


def test_none_is_cheapest(suite, buffer):
    for name in ("heat_potato/bowl-in-microwave-a", "cook_egg/potato-on-pan-b"):
        base = _episode(suite, buffer, name, "none").tet
        for s in ("proactive", "posthoc_online", "posthoc_end"):
            assert base <= _episode(suite, buffer, name, s).tet


def _fake(i, detected, cat="blocker"):
    return EpisodeResult(f"s{i:02d}", "proactive", cat, detected, detected, detected,
                         0 if detected else None, 1, int(detected), 10.0 + i, False)


def test_fdr_arithmetic():
    eps = [_fake(i, i < 9) for i in range(10)] + [_fake(10, False, "none")]
    row = aggregate(eps, Strategy.parse("proactive"))
    assert row["fdr"] == 90.0 and row["episodes"] == 11
    assert row["sr"] == pytest.approx(100 * 9 / 11)
    assert "fdr" not in aggregate([], Strategy("none"))


def test_report_recomputes_and_is_stable(suite, buffer):
    sub = _tasks(suite, "heat_potato", "cook_egg")
    rep = run_benchmark(sub, DEFAULT_STRATEGIES, CFG, 3, buffer)
    doc = json.loads(rep.to_json())
    sec = doc["sections"][0]
    for row in sec["rows"]:
        eps = [e for e in sec["episodes"] if e["strategy"] == row["strategy"]]
        assert row["sr"] == 100.0 * sum(e["success"] for e in eps) / len(eps)
        assert row["tet"] == sum(e["tet"] for e in eps) / len(eps)
        if "fdr" in row:
            fails = [e for e in eps if e["failure_category"] != "none"]
            key = "detected_before_failure" if row["strategy"].startswith("proactive") else "detected"
            assert row["fdr"] == 100.0 * sum(e[key] for e in fails) / len(fails)
        assert 0 <= row["sr"] <= 100
    assert "fdr" not in next(r for r in sec["rows"] if r["strategy"] == "none")
    again = run_benchmark(sub, DEFAULT_STRATEGIES, CFG, 3, buffer)
    assert again.to_json() == rep.to_json() and again.to_csv() == rep.to_csv()


def test_detected_before_failure_never_after(suite, buffer):
    rep = run_benchmark(_tasks(suite, "make_salad", "store_groceries"),
                        [Strategy.parse("proactive")], CFG, 0, buffer)
    for e in rep.sections[0].episodes:
        if e.detected_before_failure:
            assert e.detection_step <= e.failing_step


def test_sweep_sections_and_bounds(suite, buffer):
    sub = _tasks(suite, "heat_potato")
    rep = run_sweep(sub, config=CFG, buffer=buffer)
    assert [s.label for s in rep.sections] == ["threshold=0.90", "threshold=0.85", "threshold=0.80"]
    top = run_sweep(sub, [1.0], CFG, buffer=buffer, strategies=[Strategy.parse("proactive")])
    eps = top.sections[0].episodes
    assert all(e.detected for e in eps if e.failure_category != "none")
    with pytest.raises(ConfigurationError):
        CFG.with_threshold(0.0)


def test_all_components_off_rejected():
    with pytest.raises(ValueError):
        CFG.with_toggles(MatchToggles(False, False, False))

"""Benchmark runner: episodes under each strategy, aggregates and reports.

Strategies:

* ``none``: run the plan as given.
* ``posthoc_end``: run the plan; if the goal fails, analyse the trajectory
  once, recover, and re-run the remainder from the first failed step.
* ``posthoc_online``: verify the scene after every step against the
  demonstrations' successor scenes; on a mismatch, diagnose, recover and
  retry the step if it failed.
* ``proactive``: check the scene before every step against the
  demonstrations' pre-step scenes; on a mismatch, diagnose and splice the
  recovery in front of the step.

Every episode records an append-only trace; the simulated clock is the
episode's total execution time.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import ConfigurationError, Subtask, canonical_json
from .detect import (DetectorConfig, NO_REFERENCES, object_count_check, posthoc_verify,
                     proactive_check)
from .embed import builtin_provider
from .graphbuild import GeometryParams, build_scene_graph
from .membank import POST, PRE, Buffer, record_demonstration
from .replan import Reasoner, RecoveryPlan, RuleReasoner, build_request
from .simmatch import MatchToggles, graph_similarity
from .simworld import (NoiseConfig, OK, ScenarioSpec, Suite, TimeModel, check_goal, demo_specs,
                       init_scenario, observe, record_demo, step)

log = logging.getLogger(__name__)

KINDS = ("none", "posthoc_end", "posthoc_online", "proactive")
DETECTORS = ("scene_graph", "object_count")
DEFAULT_THRESHOLDS = (0.90, 0.85, 0.80)
ABLATION_TOGGLES = {
    "full": MatchToggles(),
    "no_subtask_node": MatchToggles(use_subtask_node=False),
    "no_struc": MatchToggles(use_struc=False),
    "no_node": MatchToggles(use_node=False),
    "no_edge": MatchToggles(use_edge=False),
}


@dataclass(frozen=True)
class Strategy:
    kind: str
    detector: Optional[str] = None
    blind: bool = False  # skip diagnosis; retry the subtask after a generic wait

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown strategy {self.kind!r}")
        checks = self.kind in ("posthoc_online", "proactive")
        if checks and self.detector not in DETECTORS:
            raise ConfigurationError(f"{self.kind} needs a detector from {DETECTORS}")
        if not checks and self.detector is not None:
            raise ConfigurationError(f"{self.kind} does not check scenes; drop the detector")

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """``kind`` or ``kind:detector``; checking kinds default to scene_graph."""
        kind, _, det = text.strip().partition(":")
        if not det and kind in ("posthoc_online", "proactive"):
            det = "scene_graph"
        return cls(kind, det or None)

    @property
    def name(self) -> str:
        n = self.kind if self.detector in (None, "scene_graph") else f"{self.kind}:{self.detector}"
        return n + ("+blind" if self.blind else "")

    def to_doc(self) -> dict:
        return {"kind": self.kind, "detector": self.detector, "blind": self.blind}


DEFAULT_STRATEGIES = tuple(Strategy.parse(s) for s in KINDS)


@dataclass(frozen=True)
class HarnessConfig:
    detector: DetectorConfig = DetectorConfig()
    time_model: TimeModel = TimeModel()
    noise: NoiseConfig = NoiseConfig()
    geometry: GeometryParams = GeometryParams()
    max_replans: int = 3
    park: str = "counter"
    reasoner_endpoint: Optional[str] = None
    reasoner_timeout: float = 2.0
    remote_first: bool = False

    def to_doc(self) -> dict:
        return {"detector": self.detector.to_doc(), "time_model": self.time_model.to_doc(),
                "noise": {"drop_prob": self.noise.drop_prob, "flip_prob": self.noise.flip_prob},
                "max_replans": self.max_replans, "park": self.park,
                "reasoner_endpoint": self.reasoner_endpoint, "remote_first": self.remote_first}

    def with_threshold(self, theta: float) -> "HarnessConfig":
        return replace(self, detector=replace(self.detector, threshold=theta))

    def with_toggles(self, toggles: MatchToggles) -> "HarnessConfig":
        return replace(self, detector=replace(self.detector, toggles=toggles))


@dataclass(frozen=True)
class EpisodeResult:
    scenario: str
    strategy: str
    failure_category: str
    success: bool
    detected: bool
    detected_before_failure: bool
    detection_step: Optional[int]
    failing_step: Optional[int]
    replans: int
    tet: float
    damaged: bool
    trace: tuple = field(default=(), compare=False, repr=False)

    def to_doc(self, with_trace: bool = False) -> dict:
        doc = {"scenario": self.scenario, "strategy": self.strategy,
               "failure_category": self.failure_category, "success": self.success,
               "detected": self.detected, "detected_before_failure": self.detected_before_failure,
               "detection_step": self.detection_step, "failing_step": self.failing_step,
               "replans": self.replans, "tet": self.tet, "damaged": self.damaged}
        if with_trace:
            doc["trace"] = list(self.trace)
        return doc


def build_buffer(suite: Suite, params: GeometryParams = GeometryParams()) -> Buffer:
    """Pre- and post-step reference records from every task's demo layouts."""
    records = []
    for spec in demo_specs(suite):
        # the last step has no successor scene, so its post-check falls back to the goal
        traj, _ = record_demo(spec, params=params)
        records += record_demonstration(traj, spec.task.name, params, demo_id=spec.name,
                                        focus=True, include_post=True)
    return Buffer(tuple(records), created_at="1970-01-01T00:00:00Z")


def episode_rng(spec_name: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{spec_name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class _Episode:
    """Mutable state of one running episode."""

    def __init__(self, spec: ScenarioSpec, strategy: Strategy, cfg: HarnessConfig, seed: int,
                 buffer: Buffer, reasoner: Reasoner):
        self.spec, self.strategy, self.cfg, self.buffer = spec, strategy, cfg, buffer
        self.reasoner = reasoner
        self.rng = episode_rng(spec.name, seed)
        self.world = init_scenario(spec, seed)
        pert = spec.perturbation
        self.pending = pert if pert is not None and pert.step_index is not None else None
        self.entries = [(s, i) for i, s in enumerate(spec.task.nominal_plan)]
        self.trace = []
        self.replans = 0
        self.detection = None  # (nominal step, "pre" | "post")
        self.step_status = {}  # nominal index -> first outcome status
        self.pre_graphs = {}  # nominal index -> first pre-step graph (trajectory record)
        self.repaired = set()
        self.provider = builtin_provider()

    # -- bookkeeping
    def event(self, kind: str, **kw):
        ev = {"t": self.world.clock, "event": kind}
        ev.update(kw)
        self.trace.append(ev)

    def charge(self, seconds: float):
        self.world = self.world.charge(seconds)

    def apply_pending(self, origin):
        if self.pending is not None and origin == self.pending.step_index:
            self.world = self.pending.apply(self.world)
            self.event("perturbation", before_step=origin, perturbation=self.pending.kind)
            self.pending = None

    def look(self, sub: Subtask):
        obs = observe(self.world, self.cfg.noise, self.rng)
        g = build_scene_graph(obs, sub, self.cfg.geometry, focus=True)
        h = hashlib.sha256(canonical_json(obs.to_doc()).encode()).hexdigest()
        return obs, g, h

    def execute(self, sub: Subtask, origin):
        out = step(self.world, sub, self.cfg.time_model)
        self.world = out.world
        if origin is not None and origin not in self.step_status:
            self.step_status[origin] = out.status
        self.event("action", subtask=sub.canonical(), nominal=origin, status=out.status,
                   reason=out.reason)
        return out

    # -- detection and repair
    def check(self, g, phase: str):
        det = self.cfg.detector
        if self.strategy.detector == "object_count":
            return object_count_check(g, self.buffer, det, self.provider, phase=phase)
        if phase == PRE:
            return proactive_check(g, self.buffer, det, self.provider)
        return posthoc_verify(g, self.buffer, det, self.provider)

    def note_detection(self, origin: int, phase: str):
        if self.detection is None:
            self.detection = (origin, phase)

    def recover(self, obs, g, decision, sub: Subtask) -> RecoveryPlan:
        """Diagnose against the best reference and return the recovery."""
        if self.strategy.blind:
            self.event("replan", blind=True)
            return RecoveryPlan((Subtask("wait", ()),))
        self.charge(self.cfg.time_model.reason_cost)
        ref = decision.best_reference.graph
        report = graph_similarity(g, ref, self.cfg.detector.toggles, self.provider)
        visible = [o.category for o in obs.objects]
        req = build_request(g, ref, report.matching, self.spec.task.goal.render(), visible)
        n_err = len(self.reasoner.errors)
        diag, plan, source = self.reasoner.reason(req)
        self.event("replan", diagnosis=diag.to_doc(), recovery=plan.to_doc(), source=source,
                   request=req.request_hash(), remote_errors=self.reasoner.errors[n_err:])
        return plan

    def splice(self, pos: int, plan: RecoveryPlan, retry=()) -> bool:
        if not plan.actions:
            return False
        self.entries[pos:pos] = [(a, None) for a in plan.actions] + list(retry)
        self.replans += 1
        return True

    # -- strategies
    def run_plain(self, start: int = 0):
        pos = start
        while pos < len(self.entries):
            sub, origin = self.entries[pos]
            self.apply_pending(origin)
            if origin is not None and origin not in self.pre_graphs:
                self.pre_graphs[origin] = self.look(sub)
            self.execute(sub, origin)
            pos += 1

    def run_proactive(self):
        tm = self.cfg.time_model
        pos = 0
        while pos < len(self.entries):
            sub, origin = self.entries[pos]
            self.apply_pending(origin)
            if origin is not None:
                obs, g, h = self.look(sub)
                decision = self.check(g, PRE)
                self.charge(tm.check_cost)
                self.event("check", phase=PRE, nominal=origin, subtask=sub.canonical(), obs=h,
                           triggered=decision.triggered, best_score=decision.best_score,
                           coverage=decision.coverage)
                if decision.triggered:
                    self.note_detection(origin, PRE)
                    if self.replans < self.cfg.max_replans and origin not in self.repaired:
                        self.repaired.add(origin)
                        if self.splice(pos, self.recover(obs, g, decision, sub)):
                            continue
            self.execute(sub, origin)
            pos += 1

    def run_online(self):
        tm = self.cfg.time_model
        pos = 0
        while pos < len(self.entries):
            sub, origin = self.entries[pos]
            self.apply_pending(origin)
            out = self.execute(sub, origin)
            pos += 1
            if origin is None:
                continue
            obs, g, h = self.look(sub)
            decision = self.check(g, POST)
            self.charge(tm.check_cost)
            self.event("check", phase=POST, nominal=origin, subtask=sub.canonical(), obs=h,
                       triggered=decision.triggered, best_score=decision.best_score,
                       coverage=decision.coverage)
            can_repair = self.replans < self.cfg.max_replans and origin not in self.repaired
            if decision.coverage == NO_REFERENCES:
                # nothing to verify against: the goal check decides
                if pos >= len(self.entries) and can_repair and \
                        not check_goal(self.world, self.spec.task.goal):
                    self.repaired.add(origin)
                    pre = proactive_check(g, self.buffer, self.cfg.detector, self.provider)
                    self.event("goal_check", satisfied=False, nominal=origin)
                    if pre.best_reference is not None:
                        self.splice(pos, self.recover(obs, g, pre, sub), [(sub, origin)])
                continue
            if decision.triggered:
                self.note_detection(origin, POST)
                if can_repair:
                    self.repaired.add(origin)
                    retry = [] if out.ok else [(sub, origin)]
                    self.splice(pos, self.recover(obs, g, decision, sub), retry)

    def run_end(self):
        tm = self.cfg.time_model
        self.run_plain()
        if check_goal(self.world, self.spec.task.goal):
            return
        self.charge(tm.posthoc_analysis_cost)
        self.event("analysis", damaged=self.world.irreversibly_damaged)
        if self.world.irreversibly_damaged or self.cfg.max_replans < 1:
            return
        n = len(self.spec.task.nominal_plan)
        failed = [i for i in range(n) if self.step_status.get(i, OK) != OK]
        f = failed[0] if failed else None
        if f is None:  # no step failed: first step whose recorded scene looked wrong
            for i in range(n):
                if i in self.pre_graphs and proactive_check(
                        self.pre_graphs[i][1], self.buffer, self.cfg.detector,
                        self.provider).triggered:
                    f = i
                    break
        f = n - 1 if f is None else f
        sub = self.spec.task.nominal_plan[f]
        obs, g, h = self.look(sub)
        decision = proactive_check(g, self.buffer, self.cfg.detector, self.provider)
        plan = RecoveryPlan()
        if decision.best_reference is not None:
            plan = self.recover(obs, g, decision, sub)
        self.entries = [(a, None) for a in plan.actions] + \
            [(s, i) for i, s in enumerate(self.spec.task.nominal_plan) if i >= f]
        self.replans += 1
        self.event("reexecute", from_step=f)
        self.run_plain()


def run_episode(spec: ScenarioSpec, strategy: Strategy, config: HarnessConfig, seed: int,
                buffer: Buffer, failing_step: Optional[int] = None,
                reasoner: Optional[Reasoner] = None) -> EpisodeResult:
    """Run one scenario under one strategy.

    ``failing_step`` is the scripted failing subtask (first non-ok step when
    nothing intervenes, or the plan length if only the goal check fails);
    it is derived by running the ``none`` strategy when omitted.
    """
    if failing_step is None and spec.perturbation is not None and strategy.kind != "none":
        failing_step = scripted_failing_step(spec, config, seed, buffer)
    reasoner = reasoner or Reasoner(RuleReasoner(config.park), config.reasoner_endpoint,
                                    config.reasoner_timeout, config.remote_first)
    ep = _Episode(spec, strategy, config, seed, buffer, reasoner)
    ep.event("start", scenario=spec.name, strategy=strategy.name, world=ep.world.digest())
    {"none": ep.run_plain, "proactive": ep.run_proactive, "posthoc_online": ep.run_online,
     "posthoc_end": ep.run_end}[strategy.kind]()
    success = check_goal(ep.world, spec.task.goal)
    ep.event("end", success=success, damaged=ep.world.irreversibly_damaged,
             world=ep.world.digest())
    det_step = ep.detection[0] if ep.detection else None
    before = False
    if ep.detection is not None and failing_step is not None:
        k, phase = ep.detection
        before = k <= failing_step if phase == PRE else k < failing_step
    return EpisodeResult(
        scenario=spec.name, strategy=strategy.name, failure_category=spec.failure_category,
        success=success, detected=ep.detection is not None, detected_before_failure=before,
        detection_step=det_step, failing_step=failing_step, replans=ep.replans,
        tet=ep.world.clock, damaged=ep.world.irreversibly_damaged, trace=tuple(ep.trace))


def scripted_failing_step(spec: ScenarioSpec, config: HarnessConfig, seed: int,
                          buffer: Buffer) -> Optional[int]:
    ep = _Episode(spec, Strategy("none"), config, seed, buffer, Reasoner())
    ep.run_plain()
    n = len(spec.task.nominal_plan)
    for i in range(n):
        if ep.step_status.get(i, OK) != OK:
            return i
    return None if check_goal(ep.world, spec.task.goal) else n


# --- aggregation and reports ------------------------------------------------

def aggregate(results: Sequence[EpisodeResult], strategy: Strategy) -> dict:
    """SR, FDR and mean TET for one strategy's episodes.

    FDR counts failure scenarios where the detector fired before the
    scripted failing step (pre-step checks) or at any point (post-step
    checks). It is absent for strategies without a detector.
    """
    eps = sorted((r for r in results if r.strategy == strategy.name), key=lambda r: r.scenario)
    n = len(eps)
    row = {"strategy": strategy.name, "episodes": n,
           "sr": 100.0 * sum(r.success for r in eps) / n if n else 0.0,
           "tet": sum(r.tet for r in eps) / n if n else 0.0,
           "replans": sum(r.replans for r in eps)}
    if strategy.detector is not None:
        fails = [r for r in eps if r.failure_category != "none"]
        hit = [r.detected_before_failure if strategy.kind == "proactive" else r.detected
               for r in fails]
        row["fdr"] = 100.0 * sum(hit) / len(fails) if fails else 0.0
        row["fdr_rule"] = "before_failure" if strategy.kind == "proactive" else "any_time"
    return row


@dataclass(frozen=True)
class Section:
    label: str
    threshold: float
    toggles: str
    strategies: tuple
    rows: tuple
    episodes: tuple

    def to_doc(self) -> dict:
        return {"label": self.label, "threshold": self.threshold, "toggles": self.toggles,
                "rows": list(self.rows), "episodes": [e.to_doc() for e in self.episodes]}

    def row(self, strategy_name: str) -> dict:
        for r in self.rows:
            if r["strategy"] == strategy_name:
                return r
        raise KeyError(strategy_name)


@dataclass(frozen=True)
class Report:
    config: dict
    seed: int
    sections: tuple

    def section(self, label: str) -> Section:
        for s in self.sections:
            if s.label == label:
                return s
        raise KeyError(label)

    def to_doc(self) -> dict:
        return {"config": self.config, "seed": self.seed,
                "sections": [s.to_doc() for s in self.sections]}

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "threshold", "toggles", "strategy", "SR", "FDR", "TET", "episodes"])
        for s in self.sections:
            for r in s.rows:
                fdr = r.get("fdr")
                w.writerow([s.label, f"{s.threshold:.2f}", s.toggles, r["strategy"],
                            f"{r['sr']:.2f}", "" if fdr is None else f"{fdr:.2f}",
                            f"{r['tet']:.2f}", r["episodes"]])
        return buf.getvalue()

    def merge(self, other: "Report") -> "Report":
        return Report(self.config, self.seed, self.sections + other.sections)

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        path.with_suffix(".csv").write_text(self.to_csv())

    def write_traces(self, directory) -> list:
        """One JSON-lines file per episode under ``directory/<section>/``."""
        written = []
        for sec in self.sections:
            d = Path(directory) / _slug(sec.label)
            d.mkdir(parents=True, exist_ok=True)
            for r in sec.episodes:
                path = d / f"{_slug(r.scenario)}__{_slug(r.strategy)}.jsonl"
                path.write_text("".join(canonical_json(ev) + "\n" for ev in r.trace))
                written.append(path)
        return written


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.+" else "_" for c in text)


def _section(label, suite, strategies, config, seed, buffer, toggles_name="full",
             reasoner=None) -> Section:
    failing = {s.name: scripted_failing_step(s, config, seed, buffer) for s in suite.scenarios}
    results = []
    for spec in sorted(suite.scenarios, key=lambda s: s.name):
        for strat in strategies:
            results.append(run_episode(spec, strat, config, seed, buffer, failing[spec.name],
                                       reasoner))
    results.sort(key=lambda r: (r.scenario, r.strategy))
    rows = tuple(aggregate(results, s) for s in strategies)
    return Section(label, config.detector.threshold, toggles_name,
                   tuple(s.name for s in strategies), rows, tuple(results))


def _check_suite(suite: Suite):
    if not suite.scenarios:
        raise ConfigurationError("suite has no scenarios")


def run_benchmark(suite: Suite, strategies: Sequence[Strategy] = DEFAULT_STRATEGIES,
                  config: HarnessConfig = HarnessConfig(), seed: int = 0,
                  buffer: Optional[Buffer] = None, label: str = "benchmark") -> Report:
    _check_suite(suite)
    buffer = buffer if buffer is not None else build_buffer(suite, config.geometry)
    sec = _section(label, suite, tuple(strategies), config, seed, buffer)
    return Report(config.to_doc(), seed, (sec,))


def run_sweep(suite: Suite, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
              config: HarnessConfig = HarnessConfig(), seed: int = 0,
              buffer: Optional[Buffer] = None,
              strategies: Sequence[Strategy] = (Strategy("proactive", "scene_graph"),
                                                Strategy("proactive", "object_count"))) -> Report:
    _check_suite(suite)
    buffer = buffer if buffer is not None else build_buffer(suite, config.geometry)
    sections = []
    for theta in thresholds:
        cfg = config.with_threshold(theta)  # validates theta
        sections.append(_section(f"threshold={theta:.2f}", suite, tuple(strategies), cfg, seed,
                                 buffer))
    return Report(config.to_doc(), seed, tuple(sections))


def run_ablations(suite: Suite, config: HarnessConfig = HarnessConfig(), seed: int = 0,
                  buffer: Optional[Buffer] = None) -> Report:
    """Proactive runs with each toggle set, plus the blind-replan variant."""
    _check_suite(suite)
    buffer = buffer if buffer is not None else build_buffer(suite, config.geometry)
    pro = Strategy("proactive", "scene_graph")
    sections = [_section(f"toggles={name}", suite, (pro,), config.with_toggles(t), seed, buffer,
                         name)
                for name, t in ABLATION_TOGGLES.items()]
    blind = Strategy("proactive", "scene_graph", blind=True)
    sections.append(_section("reasoning", suite, (pro, blind), config, seed, buffer))
    return Report(config.to_doc(), seed, tuple(sections))


def all_episodes(report: Report) -> list:
    return [e for s in report.sections for e in s.episodes]

"""Failure detectors run at subtask boundaries.

A check retrieves reference graphs for the current subtask, scores the
observed graph against each and fires when even the best reference falls
below the threshold. With no references at all, the check proceeds and
records ``no_references`` instead of firing.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .core import ConfigurationError, GoalCondition, SceneGraph, canonical_json, eval_goal
from .embed import EmbeddingProvider
from .membank import POST, PRE, Buffer, RetrievalConfig, retrieve_references
from .simmatch import ALL_ON, MatchToggles, SimilarityReport, graph_similarity

log = logging.getLogger(__name__)

COVERED = "covered"
NO_REFERENCES = "no_references"


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 0.9
    toggles: MatchToggles = ALL_ON
    retrieval: RetrievalConfig = RetrievalConfig()
    posthoc_threshold: Optional[float] = None  # defaults to ``threshold``

    def __post_init__(self):
        for t in (self.threshold, self.posthoc_threshold):
            if t is not None and not 0.0 < t <= 1.0:
                raise ConfigurationError(f"threshold {t} outside (0, 1]")

    @property
    def online_threshold(self) -> float:
        return self.threshold if self.posthoc_threshold is None else self.posthoc_threshold

    def to_doc(self) -> dict:
        return {"threshold": self.threshold, "posthoc_threshold": self.posthoc_threshold,
                "toggles": self.toggles.to_doc(), "retrieval": self.retrieval.to_doc()}


@dataclass(frozen=True)
class CountReport:
    """Object-count comparison against one reference."""
    s: float
    diff: int
    normalizer: int

    def to_doc(self) -> dict:
        return {"s": self.s, "diff": self.diff, "normalizer": self.normalizer}


@dataclass(frozen=True)
class DetectionDecision:
    triggered: bool
    best_score: float
    per_reference: tuple = ()
    reason_hint: str = ""
    coverage: str = COVERED
    references: tuple = field(default=(), compare=False, repr=False)

    @property
    def best_index(self) -> Optional[int]:
        if not self.per_reference:
            return None
        scores = [r.s for r in self.per_reference]
        return scores.index(max(scores))

    @property
    def best_reference(self):
        i = self.best_index
        return None if i is None else self.references[i]

    @property
    def best_report(self):
        i = self.best_index
        return None if i is None else self.per_reference[i]

    def to_doc(self) -> dict:
        return {"triggered": self.triggered, "best_score": self.best_score,
                "coverage": self.coverage, "reason_hint": self.reason_hint,
                "per_reference": [r.to_doc() for r in self.per_reference],
                "references": [list(r.key) for r in self.references]}

    def to_json(self) -> str:
        return canonical_json(self.to_doc())


def _decide(reports: list, refs: list, threshold: float, what: str) -> DetectionDecision:
    if not reports:
        log.info("%s: no references, proceeding", what)
        return DetectionDecision(False, -1.0, (), f"{what}: no references", NO_REFERENCES, ())
    best = max(r.s for r in reports)
    fired = best < threshold
    hint = f"{what}: best score {best:.4f} {'<' if fired else '>='} {threshold}"
    return DetectionDecision(fired, best, tuple(reports), hint, COVERED, tuple(refs))


def _score_all(g_obs: SceneGraph, refs: list, toggles: MatchToggles,
               provider: Optional[EmbeddingProvider]) -> list:
    return [graph_similarity(g_obs, r.graph, toggles, provider) for r in refs]


def proactive_check(g_obs: SceneGraph, buffer: Buffer, cfg: DetectorConfig = DetectorConfig(),
                    provider: Optional[EmbeddingProvider] = None) -> DetectionDecision:
    if g_obs.subtask is None:
        raise ValueError("proactive_check needs a graph carrying its subtask node")
    refs = retrieve_references(buffer, g_obs.subtask, cfg.retrieval, PRE, provider)
    return _decide(_score_all(g_obs, refs, cfg.toggles, provider), refs, cfg.threshold,
                   f"pre-check {g_obs.subtask}")


def count_similarity(g_obs: SceneGraph, g_exp: SceneGraph) -> CountReport:
    """One minus the summed per-category count difference over both graphs' object totals."""
    co = Counter(n.category for n in g_obs.nodes)
    ce = Counter(n.category for n in g_exp.nodes)
    cats = set(co) | set(ce)
    diff = sum(abs(co[c] - ce[c]) for c in cats)
    norm = sum(co.values()) + sum(ce.values())
    return CountReport(1.0 if norm == 0 else 1.0 - diff / norm, diff, norm)


def object_count_check(g_obs: SceneGraph, buffer: Buffer, cfg: DetectorConfig = DetectorConfig(),
                       provider: Optional[EmbeddingProvider] = None,
                       phase: str = PRE) -> DetectionDecision:
    if g_obs.subtask is None:
        raise ValueError("object_count_check needs a graph carrying its subtask node")
    refs = retrieve_references(buffer, g_obs.subtask, cfg.retrieval, phase, provider)
    reports = [count_similarity(g_obs, r.graph) for r in refs]
    thr = cfg.threshold if phase == PRE else cfg.online_threshold
    return _decide(reports, refs, thr, f"count-check {g_obs.subtask}")


def posthoc_verify(g_post: SceneGraph, buffer: Buffer, cfg: DetectorConfig = DetectorConfig(),
                   provider: Optional[EmbeddingProvider] = None) -> DetectionDecision:
    """Check the scene right after a subtask ran.

    ``g_post`` carries the subtask that just executed; references are the
    demonstrations' successor scenes for that subtask (``post`` records).
    The last step of a demonstration has no successor, so a final step
    yields ``no_references`` and the goal check decides instead.
    """
    if g_post.subtask is None:
        raise ValueError("posthoc_verify needs a graph carrying the executed subtask")
    refs = retrieve_references(buffer, g_post.subtask, cfg.retrieval, POST, provider)
    return _decide(_score_all(g_post, refs, cfg.toggles, provider), refs, cfg.online_threshold,
                   f"post-check {g_post.subtask}")


def goal_verify(final, goal: GoalCondition) -> bool:
    return eval_goal(final, goal)

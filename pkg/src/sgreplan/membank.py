"""Demonstration buffer: per-subtask reference graphs from successful runs.

Buffer files are line-delimited JSON. The first line is a header
``{"created_at", "record_count", "vocab_version"}``; every following line
is one record carrying its canonical scene-graph document.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import SceneGraph, Subtask, canonical_json, default_vocab, graph_to_text, validate_graph
from .embed import EmbeddingProvider, builtin_provider, cosine, embed_text
from .graphbuild import GeometryParams, Observation, ObservationError, build_scene_graph

log = logging.getLogger(__name__)

PRE = "pre"
POST = "post"


class BufferLoadError(ValueError):
    pass


class VersionMismatch(BufferLoadError):
    def __init__(self, found: str, expected: str):
        super().__init__(f"buffer vocab_version {found!r} does not match current {expected!r}")
        self.found = found
        self.expected = expected


class ParseError(BufferLoadError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


@dataclass(frozen=True)
class DemonstrationRecord:
    demo_id: str
    task_name: str
    step_index: int
    subtask: Subtask
    precondition_tag: str
    graph: SceneGraph
    subtask_embedding: np.ndarray = field(compare=False, repr=False, default=None)
    phase: str = PRE

    def __post_init__(self):
        if self.subtask_embedding is None:
            object.__setattr__(self, "subtask_embedding", embed_text(self.subtask.tokens()))
        if self.graph.subtask != self.subtask:
            raise ValueError(f"record {self.key} graph carries subtask {self.graph.subtask}")

    @property
    def key(self) -> tuple:
        return (self.demo_id, self.step_index, self.phase)

    def __eq__(self, other):
        if not isinstance(other, DemonstrationRecord):
            return NotImplemented
        return (self.to_doc() == other.to_doc())

    def __hash__(self):
        return hash(self.key)

    def to_doc(self) -> dict:
        nz = np.flatnonzero(self.subtask_embedding)
        return {
            "demo_id": self.demo_id, "task_name": self.task_name,
            "step_index": self.step_index, "phase": self.phase,
            "subtask": self.subtask.to_doc(), "precondition_tag": self.precondition_tag,
            "graph": self.graph.to_doc(),
            "subtask_embedding": {"dim": int(self.subtask_embedding.shape[0]),
                                  "nz": [[int(i), float(self.subtask_embedding[i])] for i in nz]},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DemonstrationRecord":
        emb = doc["subtask_embedding"]
        vec = np.zeros(emb["dim"])
        for i, v in emb["nz"]:
            vec[i] = v
        return cls(
            demo_id=doc["demo_id"], task_name=doc["task_name"], step_index=doc["step_index"],
            subtask=Subtask.from_doc(doc["subtask"]), precondition_tag=doc["precondition_tag"],
            graph=SceneGraph.from_doc(doc["graph"]), subtask_embedding=vec,
            phase=doc.get("phase", PRE),
        )


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 4
    min_similarity: float = 0.8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.min_similarity <= 1.0:
            raise ValueError("min_similarity must lie in [0, 1]")

    def to_doc(self) -> dict:
        return {"k": self.k, "min_similarity": self.min_similarity}


@dataclass(frozen=True)
class Buffer:
    records: tuple = ()
    vocab_version: str = field(default_factory=lambda: default_vocab().version)
    created_at: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        keys = [r.key for r in self.records]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (demo_id, step_index, phase) in buffer")
        for r in self.records:
            if r.graph.vocab_version != self.vocab_version:
                raise VersionMismatch(r.graph.vocab_version, self.vocab_version)

    def __len__(self):
        return len(self.records)

    def extend(self, records: Sequence[DemonstrationRecord]) -> "Buffer":
        return Buffer(self.records + tuple(records), self.vocab_version, self.created_at)


def precondition_tag(graph: SceneGraph) -> str:
    """Atoms of ``graph`` that mention a subtask argument, one per ``;``."""
    if graph.subtask is None:
        return ""
    args = set(graph.subtask.args)
    lines = [ln for ln in graph_to_text(graph).splitlines()[1:]
             if args & set(ln.split())]
    return "; ".join(lines)


def record_demonstration(trajectory: Sequence, task_name: str,
                         params: GeometryParams = GeometryParams(), demo_id: str = "demo",
                         focus: bool = True, final_observation: Optional[Observation] = None,
                         include_post: bool = False) -> list:
    """One pre-execution record per (subtask, observation) step.

    With ``include_post`` the successor observation of each step (the next
    step's pre-execution observation, or ``final_observation`` for the last
    step) is also stored as a ``post`` record keyed by the executed subtask;
    post-hoc verification compares against those.
    """
    out = []
    steps = list(trajectory)
    for i, (subtask, obs) in enumerate(steps):
        try:
            g = build_scene_graph(obs, subtask, params, focus=focus)
        except ObservationError as exc:
            log.warning("skipping step %d of %s: %s", i, demo_id, exc)
            continue
        if not validate_graph(g).ok:
            log.warning("skipping step %d of %s: invalid graph", i, demo_id)
            continue
        out.append(DemonstrationRecord(demo_id, task_name, i, subtask, precondition_tag(g), g))
    if include_post:
        succ = [o for _, o in steps[1:]] + ([final_observation] if final_observation else [])
        for i, obs in enumerate(succ):
            subtask = steps[i][0]
            try:
                g = build_scene_graph(obs, subtask, params, focus=focus)
            except ObservationError as exc:
                log.warning("skipping post step %d of %s: %s", i, demo_id, exc)
                continue
            out.append(DemonstrationRecord(demo_id, task_name, i, subtask,
                                           precondition_tag(g), g, phase=POST))
    return out


def save_buffer(buffer: Buffer, path) -> None:
    created = buffer.created_at or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    header = {"vocab_version": buffer.vocab_version, "created_at": created,
              "record_count": len(buffer.records)}
    lines = [canonical_json(header)] + [canonical_json(r.to_doc()) for r in buffer.records]
    Path(path).write_text("\n".join(lines) + "\n")


def load_buffer(path, expected_version: Optional[str] = None) -> Buffer:
    expected = expected_version or default_vocab().version
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(1, "missing header")
    try:
        header = json.loads(lines[0])
        version = header["vocab_version"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(1, f"bad header: {exc}") from None
    if version != expected:
        raise VersionMismatch(version, expected)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            records.append(DemonstrationRecord.from_doc(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(lineno, str(exc)) from None
    if header.get("record_count") != len(records):
        raise ParseError(len(lines), f"header says {header.get('record_count')} records, "
                                     f"found {len(records)}")
    return Buffer(tuple(records), version, header.get("created_at"))


def retrieval_scores(buffer: Buffer, query: Subtask, phase: str = PRE,
                     provider: Optional[EmbeddingProvider] = None) -> list:
    """(similarity, record) for every record of ``phase``, unsorted."""
    provider = provider or builtin_provider()
    q = provider.text(query.tokens())
    out = []
    for r in buffer.records:
        if r.phase != phase:
            continue
        emb = r.subtask_embedding
        if emb.shape != q.shape:
            emb = provider.text(r.subtask.tokens())
        out.append((cosine(q, emb), r))
    return out


def retrieve_references(buffer: Buffer, query: Subtask, cfg: RetrievalConfig = RetrievalConfig(),
                        phase: str = PRE, provider: Optional[EmbeddingProvider] = None) -> list:
    scored = [(s, r) for s, r in retrieval_scores(buffer, query, phase, provider)
              if s >= cfg.min_similarity]
    scored.sort(key=lambda sr: (-sr[0], sr[1].demo_id, sr[1].step_index))
    return [r for _, r in scored[:cfg.k]]

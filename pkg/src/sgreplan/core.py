"""Scene-graph, plan and task data model shared by the rest of the package.

All types are frozen dataclasses. Graph collections are stored as sorted
tuples so that equality, hashing and serialization are order independent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional, Union

GRIPPER_ID = "robot_gripper"
SUBTASK_ID = "subtask"  # reserved id of the detached subtask node
GRIPPER_CATEGORY = "robot_gripper"
DEFAULT_STATE = "default"


class VocabularyError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    version: str
    categories: dict  # category -> tuple of admissible states
    predicates: tuple
    verbs: dict  # verb -> tuple of allowed arities

    @property
    def category_names(self) -> tuple:
        return tuple(sorted(self.categories))

    @property
    def state_names(self) -> tuple:
        return tuple(sorted({s for states in self.categories.values() for s in states}))

    def admissible(self, category: str, state: str) -> bool:
        return state in self.categories.get(category, ())

    def check_node(self, category: str, state: str) -> None:
        if category not in self.categories:
            raise VocabularyError(f"unknown category {category!r}")
        if not self.admissible(category, state):
            raise VocabularyError(f"state {state!r} not admissible for {category!r}")

    def __hash__(self):
        return hash(self.version)


@lru_cache(maxsize=None)
def default_vocab() -> Vocabulary:
    raw = json.loads(resources.files("sgreplan").joinpath("data/vocab.json").read_text())
    return Vocabulary(
        version=raw["version"],
        categories={k: tuple(v) for k, v in raw["categories"].items()},
        predicates=tuple(raw["predicates"]),
        verbs={k: tuple(v) for k, v in raw["verbs"].items()},
    )


@dataclass(frozen=True)
class Subtask:
    verb: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        vocab = default_vocab()
        if self.verb not in vocab.verbs:
            raise VocabularyError(f"unknown verb {self.verb!r}")
        if len(self.args) not in vocab.verbs[self.verb]:
            raise VocabularyError(
                f"{self.verb} takes {vocab.verbs[self.verb]} args, got {len(self.args)}")
        for a in self.args:
            if a not in vocab.categories:
                raise VocabularyError(f"unknown category {a!r} in subtask")

    def canonical(self) -> str:
        return " ".join((self.verb,) + self.args)

    def tokens(self) -> list:
        return self.canonical().split()

    @classmethod
    def parse(cls, text: str) -> "Subtask":
        verb, *args = text.split()
        return cls(verb, tuple(args))

    def to_doc(self) -> dict:
        return {"verb": self.verb, "args": list(self.args)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Subtask":
        return cls(doc["verb"], tuple(doc.get("args", ())))

    def __str__(self):
        return self.canonical()


@dataclass(frozen=True)
class ObjectNode:
    id: str
    category: str
    state: str = DEFAULT_STATE


@dataclass(frozen=True, order=True)
class Edge:
    subject: str
    predicate: str
    object: str

    def as_tuple(self) -> tuple:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple = ()
    edges: tuple = ()
    subtask: Optional[Subtask] = None
    vocab_version: str = field(default_factory=lambda: default_vocab().version)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges))))

    def node(self, node_id: str) -> ObjectNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def node_map(self) -> dict:
        return {n.id: n for n in self.nodes}

    def degree(self, node_id: str) -> int:
        return sum((e.subject == node_id) + (e.object == node_id) for e in self.edges)

    def incident(self, node_id: str) -> list:
        return [e for e in self.edges if node_id in (e.subject, e.object)]

    def is_empty(self) -> bool:
        return not self.nodes and self.subtask is None

    def goal_facts(self):
        nm = self.node_map
        states = {(n.category, n.state) for n in self.nodes}
        rels = {(nm[e.subject].category, e.predicate, nm[e.object].category)
                for e in self.edges if e.subject in nm and e.object in nm}
        return states, rels

    def with_subtask(self, subtask: Optional[Subtask]) -> "SceneGraph":
        return SceneGraph(self.nodes, self.edges, subtask, self.vocab_version)

    # --- documents -------------------------------------------------------
    def to_doc(self) -> dict:
        doc = {
            "nodes": [{"id": n.id, "category": n.category, "state": n.state} for n in self.nodes],
            "edges": [{"subject": e.subject, "predicate": e.predicate, "object": e.object}
                      for e in self.edges],
            "vocab_version": self.vocab_version,
        }
        if self.subtask is not None:
            doc["subtask"] = self.subtask.to_doc()
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "SceneGraph":
        sub = doc.get("subtask")
        return cls(
            nodes=tuple(ObjectNode(n["id"], n["category"], n["state"]) for n in doc["nodes"]),
            edges=tuple(Edge(e["subject"], e["predicate"], e["object"]) for e in doc["edges"]),
            subtask=Subtask.from_doc(sub) if sub is not None else None,
            vocab_version=doc.get("vocab_version", default_vocab().version),
        )


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def dumps_graph(graph: SceneGraph) -> str:
    return canonical_json(graph.to_doc())


def loads_graph(text: str) -> SceneGraph:
    return SceneGraph.from_doc(json.loads(text))


# --- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}


def validate_graph(graph: SceneGraph, vocab: Optional[Vocabulary] = None) -> ValidationReport:
    vocab = vocab or default_vocab()
    out = []
    seen = set()
    for n in graph.nodes:
        if n.id in seen:
            out.append(Violation("DuplicateId", n.id))
        if n.id == SUBTASK_ID:
            out.append(Violation("ReservedId", n.id))
        seen.add(n.id)
        if n.category not in vocab.categories:
            out.append(Violation("UnknownCategory", f"{n.id}: {n.category}"))
        elif not vocab.admissible(n.category, n.state):
            out.append(Violation("InadmissibleState", f"{n.id}: {n.category}/{n.state}"))
    cats = {n.id: n.category for n in graph.nodes}
    triples = set()
    for e in graph.edges:
        if e.as_tuple() in triples:
            out.append(Violation("DuplicateEdge", str(e.as_tuple())))
        triples.add(e.as_tuple())
        if e.predicate not in vocab.predicates:
            out.append(Violation("UnknownPredicate", e.predicate))
        if graph.subtask is not None and SUBTASK_ID in (e.subject, e.object):
            out.append(Violation("ConnectedSubtaskNode", str(e.as_tuple())))
            continue
        for end in (e.subject, e.object):
            if end not in cats:
                out.append(Violation("DanglingEdge", f"{e.as_tuple()} -> {end}"))
        if e.subject == e.object:
            out.append(Violation("SelfEdge", e.subject))
        if e.predicate == "held_by_robot" and cats.get(e.object) != GRIPPER_CATEGORY:
            out.append(Violation("HeldNotByGripper", str(e.as_tuple())))
    return ValidationReport(tuple(out))


def validate_doc(doc: dict, vocab: Optional[Vocabulary] = None) -> ValidationReport:
    """Validate a raw scene-graph document before it becomes a SceneGraph.

    Documents can carry duplicated node ids, which a constructed graph
    would silently collapse.
    """
    ids = [n["id"] for n in doc.get("nodes", [])]
    dups = tuple(Violation("DuplicateId", i) for i in sorted({i for i in ids if ids.count(i) > 1}))
    return ValidationReport(dups + validate_graph(SceneGraph.from_doc(doc), vocab).violations)


# --- rendering -------------------------------------------------------------

def graph_to_text(graph: SceneGraph) -> str:
    cats = {n.id: n.category for n in graph.nodes}
    node_lines = sorted(f"{n.category} is {n.state}" for n in graph.nodes)
    edge_lines = sorted(f"{cats[e.subject]} {e.predicate} {cats[e.object]}" for e in graph.edges)
    head = [f"subtask: {graph.subtask.canonical()}"] if graph.subtask is not None else []
    return "\n".join(head + node_lines + edge_lines)


# --- goals and tasks -------------------------------------------------------

@dataclass(frozen=True)
class StateAtom:
    category: str
    state: str

    def render(self) -> str:
        return f"{self.category} is {self.state}"


@dataclass(frozen=True)
class RelationAtom:
    subject: str
    predicate: str
    object: str

    def render(self) -> str:
        return f"{self.subject} {self.predicate} {self.object}"


Atom = Union[StateAtom, RelationAtom]


@dataclass(frozen=True)
class GoalCondition:
    clauses: tuple

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        if not self.clauses:
            raise ConfigurationError("goal condition must have at least one clause")

    def render(self) -> str:
        return " and ".join(c.render() for c in self.clauses)

    def categories(self) -> set:
        out = set()
        for c in self.clauses:
            out |= {c.category} if isinstance(c, StateAtom) else {c.subject, c.object}
        return out

    def to_doc(self) -> list:
        return [c.render() for c in self.clauses]

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "GoalCondition":
        clauses = []
        for line in lines:
            a, mid, b = line.split()
            clauses.append(StateAtom(a, b) if mid == "is" else RelationAtom(a, mid, b))
        return cls(tuple(clauses))


def eval_goal(graph_or_world, goal: GoalCondition, vocab: Optional[Vocabulary] = None) -> bool:
    """True iff every clause of ``goal`` holds in a SceneGraph or WorldState.

    Anything exposing ``goal_facts() -> (states, relations)`` is accepted;
    ``states`` holds (category, state) pairs and ``relations`` holds
    (category, predicate, category) triples.
    """
    vocab = vocab or default_vocab()
    for c in goal.clauses:
        cats = (c.category,) if isinstance(c, StateAtom) else (c.subject, c.object)
        for cat in cats:
            if cat not in vocab.categories:
                raise ConfigurationError(f"goal references unknown category {cat!r}")
    states, rels = graph_or_world.goal_facts()
    for c in goal.clauses:
        if isinstance(c, StateAtom):
            if (c.category, c.state) not in states:
                return False
        elif (c.subject, c.predicate, c.object) not in rels:
            return False
    return True


@dataclass
class Plan:
    subtasks: list
    cursor: int = 0

    def __post_init__(self):
        self.subtasks = list(self.subtasks)
        if not 0 <= self.cursor <= len(self.subtasks):
            raise ValueError(f"cursor {self.cursor} outside [0, {len(self.subtasks)}]")

    def __len__(self):
        return len(self.subtasks)

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.subtasks)

    @property
    def current(self) -> Optional[Subtask]:
        return None if self.done else self.subtasks[self.cursor]

    def copy(self) -> "Plan":
        return Plan(list(self.subtasks), self.cursor)


@dataclass(frozen=True)
class TaskSpec:
    name: str
    goal: GoalCondition
    nominal_plan: tuple

    def __post_init__(self):
        object.__setattr__(self, "nominal_plan", tuple(self.nominal_plan))
        vocab = default_vocab()
        unknown = self.goal.categories() - set(vocab.categories)
        if unknown:
            raise ConfigurationError(f"goal references unknown categories {sorted(unknown)}")

    def plan(self) -> Plan:
        return Plan(list(self.nominal_plan))

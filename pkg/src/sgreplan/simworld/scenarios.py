"""Scenario specs, perturbations, YAML files and demonstration recording.

Scenario file schema (YAML)::

    tasks:                       # one entry per task
      - name: make_coffee
        goal: [mug is filled, mug on_top_of table]
        plan: [pick_up mug, put_on mug coffee_machine, ...]
        demo_layouts: [<layout>, <layout>, <layout>, <layout>]
    scenarios:                   # evaluation episodes
      - name: make_coffee/occupied-bowl-a
        task: make_coffee
        extra_goal: []           # clauses added to the task goal
        failure_category: occupied
        golden: true
        layout: <layout>
        perturbation: {kind: add_object, apply_at: t0,
                       payload: {id: bowl1, category: bowl, state: clean, on: coffee_machine}}
    controls: [...]              # unperturbed scenarios, same schema

    <layout> = {geometry: 0, fixtures: {stove: on},
                objects: [{id: mug1, category: mug, state: clean, on: counter}, ...]}

Objects name their support with ``on:`` or ``in:``; poses follow from the
support and the layout's ``geometry`` index.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from ..core import GoalCondition, Subtask, TaskSpec
from ..graphbuild import GeometryParams
from . import kitchen as K
from .world import (DemoConstructionError, ScenarioError, TimeModel, WorldObject, WorldState,
                    check_goal, observe, step, validate_world)

log = logging.getLogger(__name__)

CATEGORIES = ("blocker", "wrong_state", "missing", "misplaced", "occupied", "none")
KINDS = ("add_object", "set_state", "remove_object", "relocate")


def _support(doc: dict) -> tuple:
    if "on" in doc and "in" in doc:
        raise ScenarioError(f"{doc.get('id', doc.get('object'))}: both on and in given")
    if "on" in doc:
        return doc["on"], "on_top_of"
    if "in" in doc:
        return doc["in"], "inside"
    return None, None


def _support_doc(parent, rel) -> dict:
    if parent is None:
        return {}
    return {"on": parent} if rel == "on_top_of" else {"in": parent}


@dataclass(frozen=True)
class PlacedObject:
    id: str
    category: str
    state: str
    parent: str
    rel: str

    @classmethod
    def from_doc(cls, doc: dict) -> "PlacedObject":
        parent, rel = _support(doc)
        if parent is None:
            raise ScenarioError(f"object {doc.get('id')} needs on: or in:")
        return cls(str(doc["id"]), doc["category"], doc["state"], parent, rel)

    def to_doc(self) -> dict:
        return {"id": self.id, "category": self.category, "state": self.state,
                **_support_doc(self.parent, self.rel)}


@dataclass(frozen=True)
class Layout:
    objects: tuple = ()
    geometry: int = 0
    fixtures: tuple = ()  # sorted (fixture, state) overrides

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "fixtures", tuple(sorted(dict(self.fixtures).items())))

    @classmethod
    def from_doc(cls, doc: dict) -> "Layout":
        return cls(tuple(PlacedObject.from_doc(o) for o in doc.get("objects", [])),
                   int(doc.get("geometry", 0)), tuple((doc.get("fixtures") or {}).items()))

    def to_doc(self) -> dict:
        return {"geometry": self.geometry, "fixtures": dict(self.fixtures),
                "objects": [o.to_doc() for o in self.objects]}

    def with_geometry(self, g: int) -> "Layout":
        return replace(self, geometry=g)


def build_world(layout: Layout, seed: int = 0) -> WorldState:
    states = dict(K.FIXTURE_STATES)
    for fx, st in layout.fixtures:
        if fx not in states:
            raise ScenarioError(f"unknown fixture {fx!r}")
        states[fx] = st
    objs = [WorldObject(fx, fx, st) for fx, st in states.items()]
    for o in layout.objects:
        if o.id in states:
            raise ScenarioError(f"object id {o.id!r} collides with a fixture")
        objs.append(WorldObject(o.id, o.category, o.state, o.parent, o.rel))
    ids = [o.id for o in objs]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate object ids in layout")
    world = WorldState(tuple(objs), geometry=layout.geometry, seed=seed)
    validate_world(world)
    return world


@dataclass(frozen=True)
class Perturbation:
    """A scripted change to the world.

    payloads:
      add_object     {id, category, state, on|in}
      set_state      {states: {id: state, ...}}
      remove_object  {object, [on|in]}  without a support the object leaves the scene
      relocate       {object, on|in, [state]}
    ``apply_at`` is ``"t0"`` or ``"before_step k"`` (k indexes the nominal plan).
    """
    kind: str
    payload: dict
    apply_at: str = "t0"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown perturbation kind {self.kind!r}")
        self.step_index  # validates apply_at

    @property
    def step_index(self) -> Optional[int]:
        if self.apply_at == "t0":
            return None
        parts = str(self.apply_at).split()
        if len(parts) != 2 or parts[0] != "before_step" or not parts[1].isdigit():
            raise ScenarioError(f"bad apply_at {self.apply_at!r}")
        return int(parts[1])

    def to_doc(self) -> dict:
        return {"kind": self.kind, "apply_at": self.apply_at, "payload": copy.deepcopy(self.payload)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Perturbation":
        return cls(doc["kind"], dict(doc["payload"]), str(doc.get("apply_at", "t0")))

    def apply(self, world: WorldState) -> WorldState:
        p = self.payload
        objs = {o.id: o for o in world.objects}
        gripper = world.gripper

        def need(i):
            if i not in objs:
                raise ScenarioError(f"perturbation references absent object {i!r}")
            return objs[i]

        if self.kind == "add_object":
            parent, rel = _support(p)
            if p["id"] in objs:
                raise ScenarioError(f"object {p['id']!r} already exists")
            need(parent)
            objs[p["id"]] = WorldObject(p["id"], p["category"], p["state"], parent, rel)
        elif self.kind == "set_state":
            for i, st in sorted(p["states"].items()):
                objs[i] = replace(need(i), state=st)
        elif self.kind in ("remove_object", "relocate"):
            o = need(p["object"])
            if o.fixture:
                raise ScenarioError(f"fixture {o.id} cannot move")
            parent, rel = _support(p)
            if parent is not None:
                need(parent)
            if gripper == o.id:
                gripper = None
            if parent is None:
                if self.kind == "relocate":
                    raise ScenarioError("relocate needs on: or in:")
                for c in world.descendants(o.id):
                    del objs[c.id]
                del objs[o.id]
            else:
                objs[o.id] = replace(o, parent=parent, rel=rel, state=p.get("state", o.state))
        new = replace(world, objects=tuple(objs.values()), gripper=gripper)
        validate_world(new)
        return new


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    task: TaskSpec
    layout: Layout
    perturbation: Optional[Perturbation] = None
    failure_category: str = "none"
    golden: bool = False

    def __post_init__(self):
        if self.failure_category not in CATEGORIES:
            raise ScenarioError(f"unknown failure category {self.failure_category!r}")
        if (self.perturbation is None) != (self.failure_category == "none"):
            raise ScenarioError(f"{self.name}: perturbation and failure category disagree")
        k = self.perturbation.step_index if self.perturbation else None
        if k is not None and not 0 <= k < len(self.task.nominal_plan):
            raise ScenarioError(f"{self.name}: before_step {k} outside the plan")

    def to_doc(self, base_goal: Optional[GoalCondition] = None) -> dict:
        doc = {"name": self.name, "task": self.task.name, "layout": self.layout.to_doc(),
               "failure_category": self.failure_category, "golden": self.golden,
               "perturbation": self.perturbation.to_doc() if self.perturbation else None}
        base = set(base_goal.to_doc()) if base_goal is not None else set()
        doc["extra_goal"] = [c for c in self.task.goal.to_doc() if c not in base]
        return doc


def _task_from_doc(doc: dict) -> TaskSpec:
    return TaskSpec(doc["name"], GoalCondition.parse(doc["goal"]),
                    tuple(Subtask.parse(s) for s in doc["plan"]))


@dataclass(frozen=True)
class TaskDemos:
    task: TaskSpec
    layouts: tuple

    def to_doc(self) -> dict:
        return {"name": self.task.name, "goal": self.task.goal.to_doc(),
                "plan": [s.canonical() for s in self.task.nominal_plan],
                "demo_layouts": [l.to_doc() for l in self.layouts]}


@dataclass(frozen=True)
class Suite:
    tasks: tuple
    scenarios: tuple
    controls: tuple = ()

    def task(self, name: str) -> TaskDemos:
        for t in self.tasks:
            if t.task.name == name:
                return t
        raise ScenarioError(f"unknown task {name!r}")

    def to_doc(self) -> dict:
        base = {t.task.name: t.task.goal for t in self.tasks}
        return {"tasks": [t.to_doc() for t in self.tasks],
                "scenarios": [s.to_doc(base[s.task.name]) for s in self.scenarios],
                "controls": [s.to_doc(base[s.task.name]) for s in self.controls]}

    def subset(self, names) -> "Suite":
        names = set(names)
        return Suite(self.tasks, tuple(s for s in self.scenarios if s.name in names),
                     tuple(s for s in self.controls if s.name in names))

    def filter(self, pred) -> "Suite":
        return Suite(self.tasks, tuple(s for s in self.scenarios if pred(s)), self.controls)


def suite_from_doc(doc: dict) -> Suite:
    tasks = []
    for t in doc["tasks"]:
        layouts = tuple(Layout.from_doc(l) for l in t["demo_layouts"])
        tasks.append(TaskDemos(_task_from_doc(t), layouts))
    by_name = {t.task.name: t.task for t in tasks}

    def scen(d):
        if d["task"] not in by_name:
            raise ScenarioError(f"scenario {d['name']} names unknown task {d['task']!r}")
        base = by_name[d["task"]]
        extra = d.get("extra_goal") or []
        task = base if not extra else replace(
            base, goal=GoalCondition(base.goal.clauses + GoalCondition.parse(extra).clauses))
        pert = Perturbation.from_doc(d["perturbation"]) if d.get("perturbation") else None
        spec = ScenarioSpec(d["name"], task, Layout.from_doc(d["layout"]), pert,
                            d.get("failure_category", "none"), bool(d.get("golden", False)))
        init_scenario(spec, 0)  # fail fast on inconsistent layouts
        return spec

    return Suite(tuple(tasks), tuple(scen(d) for d in doc.get("scenarios", [])),
                 tuple(scen(d) for d in doc.get("controls", []) or []))


def dump_suite(suite: Suite) -> str:
    return yaml.safe_dump(suite.to_doc(), sort_keys=True, default_flow_style=None, width=100)


def save_suite(suite: Suite, path) -> None:
    Path(path).write_text(dump_suite(suite))


def load_suite(path) -> Suite:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    try:
        return suite_from_doc(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: {exc}") from None


# --- episodes and demos ----------------------------------------------------

def init_scenario(spec: ScenarioSpec, seed: int = 0) -> WorldState:
    """Fresh world for ``spec`` with any ``t0`` perturbation applied.

    Observation noise draws come from the episode's own generator, which
    callers derive from the same seed; the world itself is deterministic.
    """
    world = build_world(spec.layout, seed)
    if spec.perturbation is not None and spec.perturbation.step_index is None:
        world = spec.perturbation.apply(world)
    return world


def record_demo(spec: ScenarioSpec, plan=None, params: GeometryParams = GeometryParams(),
                time_model: TimeModel = TimeModel()) -> tuple:
    """Run the nominal plan on an unperturbed layout.

    Returns ``(trajectory, final_observation)`` where the trajectory pairs
    each subtask with the observation taken just before it ran. ``params``
    is accepted for symmetry with graph construction; observations are raw.
    """
    if spec.perturbation is not None:
        raise DemoConstructionError(f"{spec.name}: demonstrations need an unperturbed layout")
    subtasks = list(spec.task.nominal_plan if plan is None else plan)
    world = init_scenario(spec, 0)
    traj = []
    for sub in subtasks:
        traj.append((sub, observe(world)))
        out = step(world, sub, time_model)
        if not out.ok:
            raise DemoConstructionError(f"{spec.name}: {sub} failed on a clean layout ({out.reason})")
        world = out.world
    if not check_goal(world, spec.task.goal):
        raise DemoConstructionError(f"{spec.name}: nominal plan misses the goal")
    return traj, observe(world)


def demo_specs(suite: Suite) -> list:
    out = []
    for t in suite.tasks:
        for i, layout in enumerate(t.layouts):
            out.append(ScenarioSpec(f"{t.task.name}-demo{i}", t.task, layout))
    return out

"""Symbolic kitchen world with geometric poses.

The world stores, for every object, its category, state and support
(parent id plus ``inside`` / ``on_top_of``). Boxes are derived from that
structure by :mod:`.kitchen`, so observations carry real geometry for the
graph builder while the simulator itself stays symbolic.

Closed fridges, drawers and microwaves hide what is inside them.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np

from ..core import (GoalCondition, Subtask, canonical_json, default_vocab, eval_goal)
from ..graphbuild import GeometryParams, Observation, ObservedObject, extract_spatial_relations, gripper_relation
from . import kitchen as K

log = logging.getLogger(__name__)

OK = "ok"
PRECONDITION_FAILED = "precondition_failed"
IRREVERSIBLE_DAMAGE = "irreversible_damage"


class ScenarioError(ValueError):
    pass


class DemoConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeModel:
    action_cost: float = 3.0
    check_cost: float = 0.5
    reason_cost: float = 5.0
    posthoc_analysis_cost: float = 20.0

    def __post_init__(self):
        for k, v in self.to_doc().items():
            if v < 0:
                raise ValueError(f"{k} must be >= 0")

    def to_doc(self) -> dict:
        return {"action_cost": self.action_cost, "check_cost": self.check_cost,
                "reason_cost": self.reason_cost, "posthoc_analysis_cost": self.posthoc_analysis_cost}


@dataclass(frozen=True)
class NoiseConfig:
    drop_prob: float = 0.0
    flip_prob: float = 0.0

    def __post_init__(self):
        for p in (self.drop_prob, self.flip_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("noise probabilities must lie in [0, 1]")

    @property
    def active(self) -> bool:
        return self.drop_prob > 0 or self.flip_prob > 0


@dataclass(frozen=True)
class WorldObject:
    id: str
    category: str
    state: str
    parent: Optional[str] = None
    rel: Optional[str] = None  # "inside" | "on_top_of" | None

    @property
    def fixture(self) -> bool:
        return self.category in K.FIXTURES

    def to_doc(self) -> dict:
        return {"id": self.id, "category": self.category, "state": self.state,
                "parent": self.parent, "rel": self.rel}


@dataclass(frozen=True)
class WorldState:
    objects: tuple
    gripper: Optional[str] = None
    clock: float = 0.0
    irreversibly_damaged: bool = False
    damage: tuple = ()  # (category, state) atoms a damage rule produced
    geometry: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(sorted(self.objects, key=lambda o: o.id)))

    @cached_property
    def by_id(self) -> dict:
        return {o.id: o for o in self.objects}

    def get(self, obj_id: str) -> WorldObject:
        return self.by_id[obj_id]

    def children(self, obj_id: str, rel: Optional[str] = None) -> list:
        return [o for o in self.objects if o.parent == obj_id and (rel is None or o.rel == rel)]

    def descendants(self, obj_id: str) -> list:
        out, stack = [], [obj_id]
        while stack:
            for c in self.children(stack.pop()):
                out.append(c)
                stack.append(c.id)
        return out

    def hidden(self, obj_id: str) -> bool:
        o = self.get(obj_id)
        while o.parent is not None:
            p = self.get(o.parent)
            if o.rel == "inside" and p.category in K.OPENABLE and p.state != "open":
                return True
            o = p
        return False

    def container(self, obj_id: str) -> Optional[str]:
        o = self.get(obj_id)
        return o.parent if o.rel == "inside" else None

    @cached_property
    def boxes(self) -> dict:
        out = {}
        for o in self.objects:
            self._box(o.id, out)
        return out

    def _box(self, obj_id: str, memo: dict) -> np.ndarray:
        if obj_id in memo:
            return memo[obj_id]
        o = self.get(obj_id)
        if o.fixture:
            box = K.fixture_box(o.category, self.geometry)
        elif obj_id == self.gripper:
            box = K.box_at(K.GRIPPER_POSE, K.size(o.category))
        elif o.parent is None:
            raise ScenarioError(f"{obj_id} has no support and is not held")
        else:
            pbox = self._box(o.parent, memo)
            sibs = sorted(c.id for c in self.children(o.parent, o.rel))
            idx = sibs.index(obj_id)
            parent_cat = self.get(o.parent).category
            base = K.grid_slot(parent_cat, o.rel, pbox, idx)
            if base is None:
                base = K.centred_slot(o.rel, pbox, idx, len(sibs))
            if o.rel == "inside":
                base = base + np.array([0.0, 0.0, 0.04])
            box = K.box_at(base, K.size(o.category))
        memo[obj_id] = box
        return box

    def full_observation(self, include_hidden: bool = False) -> Observation:
        objs = []
        for o in self.objects:
            if not include_hidden and self.hidden(o.id):
                continue
            objs.append(ObservedObject(o.id, o.category, o.state,
                                       tuple(float(v) for v in self.boxes[o.id]),
                                       self.container(o.id)))
        return Observation(tuple(objs), self.gripper, self.clock)

    @cached_property
    def _facts(self) -> tuple:
        obs = self.full_observation(include_hidden=True)
        cats = {o.id: o.category for o in self.objects}
        cats["robot_gripper"] = "robot_gripper"
        rels = extract_spatial_relations(obs, GeometryParams()) | gripper_relation(obs)
        states = {(o.category, o.state) for o in self.objects}
        return states, {(cats[e.subject], e.predicate, cats[e.object]) for e in rels}

    def goal_facts(self) -> tuple:
        return self._facts

    def to_doc(self) -> dict:
        return {"objects": [o.to_doc() for o in self.objects], "gripper": self.gripper,
                "clock": self.clock, "irreversibly_damaged": self.irreversibly_damaged,
                "damage": [list(d) for d in self.damage], "geometry": self.geometry,
                "seed": self.seed}

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_doc()).encode()).hexdigest()

    def with_clock(self, clock: float) -> "WorldState":
        if clock < self.clock:
            raise ValueError("clock must not run backwards")
        return replace(self, clock=clock)

    def charge(self, seconds: float) -> "WorldState":
        return self.with_clock(self.clock + seconds)


def validate_world(world: WorldState) -> None:
    """Raise ScenarioError unless the world's structural invariants hold."""
    vocab = default_vocab()
    ids = world.by_id
    for o in world.objects:
        if not vocab.admissible(o.category, o.state):
            raise ScenarioError(f"{o.id}: inadmissible {o.category}/{o.state}")
        if o.category == "robot_gripper":
            raise ScenarioError("the gripper is not a world object")
        if o.fixture:
            if o.parent is not None:
                raise ScenarioError(f"fixture {o.id} cannot be placed")
            continue
        if o.category not in K.SIZES:
            raise ScenarioError(f"{o.id}: category {o.category} cannot be placed")
        if o.id == world.gripper:
            if o.parent is not None:
                raise ScenarioError(f"held {o.id} also sits in {o.parent}")
            continue
        if o.parent not in ids or o.rel not in ("inside", "on_top_of"):
            raise ScenarioError(f"{o.id}: bad support {o.rel} {o.parent}")
        seen, cur = {o.id}, o
        while cur.parent is not None:
            if cur.parent in seen:
                raise ScenarioError(f"containment cycle through {o.id}")
            seen.add(cur.parent)
            cur = ids[cur.parent]
    if world.gripper is not None and world.gripper not in ids:
        raise ScenarioError(f"gripper holds unknown {world.gripper}")
    for o in world.objects:
        for rel in ("inside", "on_top_of"):
            cap = K.CAPACITY.get((o.category, rel))
            if cap is not None and len(world.children(o.id, rel)) > cap:
                raise ScenarioError(f"{o.id} over capacity ({rel})")
    try:
        world.boxes
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


# --- observation -----------------------------------------------------------

def observe(world: WorldState, noise: NoiseConfig = NoiseConfig(),
            rng: Optional[np.random.Generator] = None) -> Observation:
    """What the agent sees: every object not hidden in a closed container.

    Noise first drops objects independently, then flips surviving state
    labels to another admissible state. Draws come from ``rng`` in object-id
    order so a seeded stream reproduces the same observation.
    """
    obs = world.full_observation()
    if not noise.active:
        return obs
    rng = rng if rng is not None else np.random.default_rng(0)
    vocab = default_vocab()
    kept = []
    for o in obs.objects:
        if rng.random() < noise.drop_prob:
            continue
        if noise.flip_prob > 0 and rng.random() < noise.flip_prob:
            others = [s for s in vocab.categories[o.category] if s != o.state]
            if others:
                o = replace(o, state=others[int(rng.integers(len(others)))])
        kept.append(o)
    ids = {o.id for o in kept}
    kept = [o if o.container is None or o.container in ids else replace(o, container=None)
            for o in kept]
    held = obs.gripper_holding if obs.gripper_holding in ids else None
    return Observation(tuple(kept), held, obs.timestamp)


def check_goal(world: WorldState, goal: GoalCondition) -> bool:
    return eval_goal(world, goal)


# --- actions ---------------------------------------------------------------

@dataclass(frozen=True)
class StepOutcome:
    status: str
    reason: str
    world: WorldState

    @property
    def ok(self) -> bool:
        return self.status == OK

    def to_doc(self) -> dict:
        return {"status": self.status, "reason": self.reason}


@dataclass(frozen=True)
class ActionRule:
    """Declarative summary of one verb, for documentation and audit."""
    verb: str
    preconditions: tuple
    effects: tuple
    duration: float = 3.0
    irreversible_on_violation: Optional[str] = None


ACTION_RULES = {
    "pick_up": ActionRule("pick_up", ("gripper empty", "object movable and reachable"),
                          ("object held, with whatever rests on or in it",)),
    "put_on": ActionRule("put_on", ("object held or reachable with an empty gripper",
                                    "destination is a free surface"),
                         ("object rests on destination",),
                         irreversible_on_violation="empty pot on a lit stove scorches"),
    "put_in": ActionRule("put_in", ("object held or reachable with an empty gripper",
                                    "destination is an open container with room"),
                         ("object inside destination",),
                         irreversible_on_violation="lettuce into a filled container goes soggy"),
    "open": ActionRule("open", ("openable, not broken",), ("state open",)),
    "close": ActionRule("close", ("openable, not broken",), ("state closed",)),
    "clean": ActionRule("clean", ("reachable",), ("dirty or filled becomes clean or empty",)),
    "slice": ActionRule("slice", ("whole lettuce or apple, not held",), ("state sliced",)),
    "toggle": ActionRule("toggle", ("appliance reachable",), ("appliance-specific",),
                         irreversible_on_violation="spoiled mug, scorched pot, broken microwave"),
    "pour": ActionRule("pour", ("filled vessel, sink reachable",), ("vessel emptied",)),
    "cook": ActionRule("cook", ("food on a vessel on a lit stove",), ("food cooked",),
                       irreversible_on_violation="dirty pan burns the egg; other food on the "
                                                 "vessel is cooked too"),
    "wait": ActionRule("wait", (), ()),
}

_COOKED = {"egg": "cooked", "potato": "cooked", "apple": "cooked"}
_EMPTY = {"pot": "empty", "bowl": "clean", "mug": "clean"}
_FILLABLE = {"pot": ("empty", "filled"), "bowl": ("clean", "filled"), "mug": ("clean", "filled")}


class _Fail(Exception):
    pass


class _Scratch:
    """Mutable working copy of a world for one action."""

    def __init__(self, world: WorldState):
        self.world = world
        self.objs = {o.id: [o.category, o.state, o.parent, o.rel] for o in world.objects}
        self.gripper = world.gripper
        self.damage = []

    def snapshot(self) -> WorldState:
        return WorldState(tuple(WorldObject(i, *v) for i, v in self.objs.items()), self.gripper,
                          self.world.clock, self.world.irreversibly_damaged or bool(self.damage),
                          self.world.damage + tuple(self.damage), self.world.geometry,
                          self.world.seed)

    def cat(self, i): return self.objs[i][0]
    def state(self, i): return self.objs[i][1]

    def set_state(self, i, s, damaging=False):
        self.objs[i][1] = s
        if damaging:
            self.damage.append((self.cat(i), s))

    def children(self, i, rel=None):
        return sorted(c for c, v in self.objs.items() if v[2] == i and (rel is None or v[3] == rel))

    def descendants(self, i):
        out, stack = [], [i]
        while stack:
            for c in self.children(stack.pop()):
                out.append(c)
                stack.append(c)
        return out

    def hidden(self, i):
        v = self.objs[i]
        while v[2] is not None:
            p = self.objs[v[2]]
            if v[3] == "inside" and p[0] in K.OPENABLE and p[1] != "open":
                return True
            v = p
        return False

    def resolve(self, category: str) -> str:
        if self.gripper is not None and self.cat(self.gripper) == category:
            return self.gripper
        cands = sorted(i for i, v in self.objs.items() if v[0] == category and not self.hidden(i))
        if not cands:
            raise _Fail(f"no reachable {category}")
        return cands[0]

    def place(self, i, parent, rel):
        if self.gripper == i:
            self.gripper = None
        self.objs[i][2] = parent
        self.objs[i][3] = rel

    def stove_lit(self, vessel) -> bool:
        v = self.objs[vessel]
        return v[3] == "on_top_of" and v[2] is not None and self.cat(v[2]) == "stove" \
            and self.state(v[2]) == "on"

    def heat_vessel(self, vessel):
        """A pot on a lit stove boils if filled and scorches if empty."""
        if self.cat(vessel) != "pot":
            return
        if self.state(vessel) == "filled":
            self.set_state(vessel, "boiling")
        elif self.state(vessel) == "empty":
            self.set_state(vessel, "scorched", damaging=True)
        for f in self.descendants(vessel):
            if self.cat(f) in _COOKED and self.state(f) != _COOKED[self.cat(f)]:
                self.set_state(f, _COOKED[self.cat(f)], damaging=True)


def _require_take(s: _Scratch, x: str) -> None:
    if s.gripper not in (None, x):
        raise _Fail("gripper busy")
    if s.objs[x][0] in K.FIXTURES:
        raise _Fail(f"{x} cannot be moved")


def _do_pick_up(s: _Scratch, args):
    x = s.resolve(args[0])
    if s.gripper == x:
        raise _Fail(f"already holding {x}")
    _require_take(s, x)
    s.place(x, None, None)
    s.gripper = x


def _do_put(s: _Scratch, args, rel):
    x, d = s.resolve(args[0]), s.resolve(args[1])
    _require_take(s, x)
    dcat = s.cat(d)
    if rel == "on_top_of" and dcat not in K.SURFACES:
        raise _Fail(f"{d} is not a surface")
    if rel == "inside" and dcat not in K.CONTAINERS:
        raise _Fail(f"{d} is not a container")
    if dcat in K.OPENABLE and s.state(d) != "open":
        raise _Fail(f"{d} is {s.state(d)}")
    if x == d or d in s.descendants(x):
        raise _Fail("cannot put an object into itself")
    cap = K.CAPACITY.get((dcat, rel))
    if cap is not None and len([c for c in s.children(d, rel) if c != x]) >= cap:
        raise _Fail(f"{d} occupied")
    if rel == "inside" and dcat in ("bowl", "mug", "pot") and s.state(d) in ("filled", "boiling"):
        if s.cat(x) == "lettuce":
            s.place(x, d, rel)
            s.set_state(x, "soggy", damaging=True)
            return
        raise _Fail(f"{d} is full of liquid")
    s.place(x, d, rel)
    if rel == "inside" and dcat == "sink":
        faucets = [i for i, v in s.objs.items() if v[0] == "faucet" and v[1] == "on"]
        if faucets and s.cat(x) in _FILLABLE and s.state(x) == _FILLABLE[s.cat(x)][0]:
            s.set_state(x, _FILLABLE[s.cat(x)][1])
    if dcat == "stove" and s.state(d) == "on":
        s.heat_vessel(x)


def _do_open(s: _Scratch, args, target):
    x = s.resolve(args[0])
    if s.cat(x) not in K.OPENABLE:
        raise _Fail(f"{x} cannot be opened")
    if s.state(x) == "broken":
        raise _Fail(f"{x} is broken")
    s.set_state(x, target)


def _do_clean(s: _Scratch, args):
    x = s.resolve(args[0])
    st = s.state(x)
    if st == "dirty":
        s.set_state(x, "clean")
    elif st in ("filled", "boiling") and s.cat(x) in _EMPTY:
        s.set_state(x, _EMPTY[s.cat(x)])
    elif st in ("spoiled", "scorched", "broken"):
        raise _Fail(f"{x} is {st} beyond cleaning")


def _do_slice(s: _Scratch, args):
    x = s.resolve(args[0])
    if s.cat(x) not in ("lettuce", "apple"):
        raise _Fail(f"{x} cannot be sliced")
    if s.gripper == x:
        raise _Fail("cannot slice a held object")
    if s.state(x) != "whole":
        raise _Fail(f"{x} is {s.state(x)}")
    s.set_state(x, "sliced")
    for c in s.children(x, "on_top_of"):
        if s.cat(c) in ("lettuce", "apple") and s.state(c) == "whole":
            s.set_state(c, "sliced", damaging=True)


def _do_pour(s: _Scratch, args):
    x, d = s.resolve(args[0]), s.resolve(args[1])
    if s.cat(x) not in _EMPTY or s.state(x) not in ("filled", "boiling"):
        raise _Fail(f"{x} has nothing to pour")
    if s.cat(d) != "sink":
        raise _Fail("pour only into the sink")
    s.set_state(x, _EMPTY[s.cat(x)])


def _do_toggle(s: _Scratch, args):
    x = s.resolve(args[0])
    cat, st = s.cat(x), s.state(x)
    if cat == "stove":
        s.set_state(x, "off" if st == "on" else "on")
        for v in s.children(x, "on_top_of"):
            if st == "off":
                s.heat_vessel(v)
            elif s.cat(v) == "pot" and s.state(v) == "boiling":
                s.set_state(v, "filled")
    elif cat == "faucet":
        s.set_state(x, "off" if st == "on" else "on")
        if st == "off":
            for sink in [i for i, v in s.objs.items() if v[0] == "sink"]:
                for c in s.children(sink, "inside"):
                    if s.cat(c) in _FILLABLE and s.state(c) == _FILLABLE[s.cat(c)][0]:
                        s.set_state(c, _FILLABLE[s.cat(c)][1])
    elif cat == "coffee_machine":
        if st == "on":  # an engaged machine just stops
            s.set_state(x, "off")
            return
        cups = s.children(x, "on_top_of")
        if not cups or s.cat(cups[0]) != "mug":
            raise _Fail("no mug under the coffee machine")
        mug = cups[0]
        if s.state(mug) == "dirty" or s.children(mug, "inside"):
            s.set_state(mug, "spoiled", damaging=True)
        elif s.state(mug) == "clean":
            s.set_state(mug, "filled")
    elif cat == "microwave":
        if st != "closed":
            raise _Fail(f"microwave is {st}")
        inside = s.descendants(x)
        if any(s.cat(i) == "knife" for i in inside):
            s.set_state(x, "broken", damaging=True)
            return
        for f in inside:
            if s.cat(f) in _COOKED:
                s.set_state(f, _COOKED[s.cat(f)])
    else:
        raise _Fail(f"{x} cannot be toggled")


def _do_cook(s: _Scratch, args):
    food = s.resolve(args[0])
    if s.cat(food) not in _COOKED:
        raise _Fail(f"{food} is not food")
    v = s.objs[food]
    vessel = s.resolve(args[1]) if len(args) > 1 else v[2]
    if vessel is None or v[2] != vessel or s.cat(vessel) not in ("pan", "pot"):
        raise _Fail(f"{food} is not in a cooking vessel")
    if not s.stove_lit(vessel):
        raise _Fail(f"{vessel} is not on a lit stove")
    if s.cat(food) == "egg" and s.state(vessel) == "dirty":
        s.set_state(food, "burnt", damaging=True)
    elif s.state(food) != "burnt":
        s.set_state(food, _COOKED[s.cat(food)])
    for other in s.descendants(vessel):
        if other != food and s.cat(other) in _COOKED and s.state(other) != _COOKED[s.cat(other)]:
            s.set_state(other, _COOKED[s.cat(other)], damaging=True)


_HANDLERS = {
    "pick_up": _do_pick_up,
    "put_on": lambda s, a: _do_put(s, a, "on_top_of"),
    "put_in": lambda s, a: _do_put(s, a, "inside"),
    "open": lambda s, a: _do_open(s, a, "open"),
    "close": lambda s, a: _do_open(s, a, "closed"),
    "clean": _do_clean,
    "slice": _do_slice,
    "pour": _do_pour,
    "toggle": _do_toggle,
    "cook": _do_cook,
    "wait": lambda s, a: None,
}


def step(world: WorldState, action: Subtask, time_model: TimeModel = TimeModel()) -> StepOutcome:
    """Attempt one action; the clock advances by ``action_cost`` either way."""
    if not isinstance(action, Subtask):
        raise TypeError("action must be a Subtask")
    s = _Scratch(world)
    try:
        _HANDLERS[action.verb](s, action.args)
    except _Fail as exc:
        log.debug("%s failed: %s", action, exc)
        return StepOutcome(PRECONDITION_FAILED, str(exc), world.charge(time_model.action_cost))
    new = s.snapshot().charge(time_model.action_cost)
    if s.damage:
        reason = ", ".join(f"{c} {st}" for c, st in s.damage)
        return StepOutcome(IRREVERSIBLE_DAMAGE, reason, new)
    return StepOutcome(OK, "", new)

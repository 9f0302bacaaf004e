"""The bundled kitchen suite: six tasks, their demo layouts and failure cases.

Every evaluation layout reuses the arrangement of one demo layout (variant
``a`` or ``b``) at a kitchen position no demo used, then perturbs it.
"""
from __future__ import annotations

from dataclasses import replace

from ..core import GoalCondition, Subtask, TaskSpec
from .scenarios import Layout, Perturbation, PlacedObject, ScenarioSpec, Suite, TaskDemos

EVAL_GEOMETRY = {"a": 4, "b": 5}


def _obj(i, cat, state, rel, parent) -> PlacedObject:
    return PlacedObject(i, cat, state, parent, "inside" if rel == "in" else "on_top_of")


def _layout(objs, fixtures=None, geometry=0) -> Layout:
    return Layout(tuple(_obj(*o) for o in objs), geometry, tuple((fixtures or {}).items()))


def _task(name, goal, plan) -> TaskSpec:
    return TaskSpec(name, GoalCondition.parse(goal), tuple(Subtask.parse(s) for s in plan))


# task name -> (goal, plan, {variant: (objects, fixtures)})
TASKS = {
    "make_coffee": (
        ["mug is filled", "mug on_top_of table"],
        ["pick_up mug", "put_on mug coffee_machine", "toggle coffee_machine", "pick_up mug",
         "put_on mug table"],
        {"a": ([("mug1", "mug", "clean", "on", "counter")], None),
         "b": ([("mug1", "mug", "clean", "on", "shelf")], None)},
    ),
    "boil_water": (
        ["pot is boiling", "pot on_top_of stove"],
        ["pick_up pot", "put_in pot sink", "toggle faucet", "pick_up pot", "put_on pot stove",
         "toggle stove"],
        {"a": ([("pot1", "pot", "empty", "on", "counter")], None),
         "b": ([("pot1", "pot", "empty", "on", "table")], None)},
    ),
    "heat_potato": (
        ["potato is cooked", "potato on_top_of plate", "plate inside microwave"],
        ["open microwave", "put_in plate microwave", "close microwave", "toggle microwave"],
        {"a": ([("plate1", "plate", "default", "on", "counter"),
                ("potato1", "potato", "raw", "on", "plate1")], None),
         "b": ([("plate1", "plate", "default", "on", "table"),
                ("potato1", "potato", "raw", "on", "plate1")], None)},
    ),
    "cook_egg": (
        ["egg is cooked", "egg on_top_of pan", "pan on_top_of stove"],
        ["pick_up pan", "put_on pan stove", "pick_up egg", "put_on egg pan", "cook egg pan"],
        {"a": ([("pan1", "pan", "clean", "on", "counter"),
                ("egg1", "egg", "raw", "on", "table")], {"stove": "on"}),
         "b": ([("pan1", "pan", "clean", "on", "table"),
                ("egg1", "egg", "raw", "on", "counter")], {"stove": "on"})},
    ),
    "make_salad": (
        ["lettuce is sliced", "lettuce inside bowl", "bowl on_top_of table"],
        ["slice lettuce", "pick_up lettuce", "put_in lettuce bowl", "pick_up bowl",
         "put_on bowl table"],
        {"a": ([("lettuce1", "lettuce", "whole", "on", "counter"),
                ("bowl1", "bowl", "clean", "on", "counter")], None),
         "b": ([("lettuce1", "lettuce", "whole", "on", "counter"),
                ("bowl1", "bowl", "clean", "on", "shelf")], None)},
    ),
    "store_groceries": (
        ["apple inside fridge", "egg inside fridge", "fridge is closed"],
        ["open fridge", "put_in apple fridge", "put_in egg fridge", "close fridge"],
        {"a": ([("apple1", "apple", "whole", "on", "counter"),
                ("egg1", "egg", "raw", "on", "counter")], None),
         "b": ([("apple1", "apple", "whole", "on", "table"),
                ("egg1", "egg", "raw", "on", "counter")], None)},
    ),
}

DEMO_VARIANTS = ("a", "b", "a", "b")  # demo i uses geometry i


def _add(i, cat, state, rel, parent, at="t0"):
    return Perturbation("add_object", {"id": i, "category": cat, "state": state,
                                       ("in" if rel == "in" else "on"): parent}, at)


def _states(at="t0", **states):
    return Perturbation("set_state", {"states": dict(states)}, at)


def _remove(obj, rel=None, parent=None, at="t0"):
    payload = {"object": obj}
    if parent:
        payload["in" if rel == "in" else "on"] = parent
    return Perturbation("remove_object", payload, at)


def _move(obj, rel, parent, at="t0", state=None):
    payload = {"object": obj, ("in" if rel == "in" else "on"): parent}
    if state:
        payload["state"] = state
    return Perturbation("relocate", payload, at)


# (task, slug, category, perturbation, golden, extra goal, variants)
CASES = [
    # make coffee
    ("make_coffee", "bowl-on-machine", "occupied", _add("bowl1", "bowl", "clean", "on", "coffee_machine"), True, (), "ab"),
    ("make_coffee", "apple-in-mug", "blocker", _add("apple1", "apple", "whole", "in", "mug1"), True, (), "ab"),
    ("make_coffee", "apple-dropped-in-mug", "blocker", _add("apple1", "apple", "whole", "in", "mug1", "before_step 2"), False, (), "ab"),
    ("make_coffee", "dirty-mug", "wrong_state", _states(mug1="dirty"), False, (), "a"),
    ("make_coffee", "mug-in-drawer", "missing", _remove("mug1", "in", "drawer"), True, (), "ab"),
    # boil water
    ("boil_water", "bowl-in-sink", "occupied", _add("bowl1", "bowl", "dirty", "in", "sink"), True, (), "ab"),
    ("boil_water", "apple-in-pot", "blocker", _add("apple1", "apple", "whole", "in", "pot1"), True, ("apple is whole",), "ab"),
    ("boil_water", "stove-already-boiling", "wrong_state", _states("before_step 5", stove="on", pot1="boiling"), False, (), "ab"),
    ("boil_water", "stove-left-on", "wrong_state", _states(stove="on"), False, (), "ab"),
    ("boil_water", "pot-in-drawer", "missing", _remove("pot1", "in", "drawer"), True, (), "ab"),
    # heat potato
    ("heat_potato", "bowl-in-microwave", "occupied", _add("bowl1", "bowl", "clean", "in", "microwave"), True, (), "ab"),
    ("heat_potato", "knife-on-plate", "blocker", _add("knife1", "knife", "default", "on", "plate1"), True, (), "ab"),
    ("heat_potato", "knife-dropped-on-plate", "blocker", _add("knife1", "knife", "default", "on", "plate1", "before_step 2"), False, (), "ab"),
    ("heat_potato", "potato-in-fridge", "missing", _remove("potato1", "in", "fridge"), False, (), "ab"),
    ("heat_potato", "potato-off-plate", "misplaced", _move("potato1", "on", "counter"), False, (), "ab"),
    ("heat_potato", "microwave-broken", "wrong_state", _states(microwave="broken"), False, (), "a"),
    # cook egg
    ("cook_egg", "dirty-pan-in-sink", "wrong_state", _move("pan1", "in", "sink", state="dirty"), False, (), "ab"),
    ("cook_egg", "dirty-pan", "wrong_state", _states(pan1="dirty"), False, (), "a"),
    ("cook_egg", "potato-on-pan", "blocker", _add("potato1", "potato", "raw", "on", "pan1"), True, ("potato is raw",), "ab"),
    ("cook_egg", "potato-dropped-on-pan", "blocker", _add("potato1", "potato", "raw", "on", "pan1", "before_step 4"), False, ("potato is raw",), "ab"),
    ("cook_egg", "stove-turned-off", "wrong_state", _states("before_step 4", stove="off"), False, (), "ab"),
    ("cook_egg", "pan-moved-off-stove", "misplaced", _move("pan1", "on", "counter", "before_step 4"), False, (), "ab"),
    ("cook_egg", "pot-on-stove", "occupied", _add("pot2", "pot", "boiling", "on", "stove"), True, (), "ab"),
    # make salad
    ("make_salad", "apple-in-bowl", "occupied", _add("apple1", "apple", "whole", "in", "bowl1"), True, (), "ab"),
    ("make_salad", "water-in-bowl", "wrong_state", _states("before_step 2", bowl1="filled"), False, (), "a"),
    ("make_salad", "lettuce-on-bowl-rim", "misplaced", _move("lettuce1", "on", "bowl1", "before_step 3"), True, (), "ab"),
    ("make_salad", "bowl-in-drawer", "missing", _remove("bowl1", "in", "drawer"), True, (), "ab"),
    ("make_salad", "apple-on-lettuce", "blocker", _add("apple1", "apple", "whole", "on", "lettuce1"), True, ("apple is whole",), "ab"),
    # store groceries
    ("store_groceries", "egg-on-fridge-top", "misplaced", _move("egg1", "on", "fridge", "before_step 3"), True, (), "ab"),
    ("store_groceries", "egg-gone", "missing", _remove("egg1"), False, (), "a"),
]


def builtin_suite() -> Suite:
    tasks, bases = [], {}
    for name, (goal, plan, variants) in TASKS.items():
        task = _task(name, goal, plan)
        bases[name] = {v: _layout(objs, fx) for v, (objs, fx) in variants.items()}
        layouts = tuple(bases[name][v].with_geometry(i) for i, v in enumerate(DEMO_VARIANTS))
        tasks.append(TaskDemos(task, layouts))
    by_name = {t.task.name: t.task for t in tasks}
    scenarios = []
    for task_name, slug, cat, pert, golden, extra, variants in CASES:
        base = by_name[task_name]
        task = base if not extra else replace(
            base, goal=GoalCondition(base.goal.clauses + GoalCondition.parse(extra).clauses))
        for v in variants:
            layout = bases[task_name][v].with_geometry(EVAL_GEOMETRY[v])
            scenarios.append(ScenarioSpec(f"{task_name}/{slug}-{v}", task, layout, pert, cat, golden))
    controls = tuple(
        ScenarioSpec(f"{t.task.name}/control-{v}", t.task,
                     bases[t.task.name][v].with_geometry(EVAL_GEOMETRY[v]))
        for t in tasks for v in ("a", "b"))
    return Suite(tuple(tasks), tuple(scenarios), controls)

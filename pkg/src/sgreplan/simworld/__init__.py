"""Deterministic kitchen simulator used for demonstrations and benchmarks."""
from .world import (ACTION_RULES, IRREVERSIBLE_DAMAGE, OK, PRECONDITION_FAILED, ActionRule,
                    DemoConstructionError, NoiseConfig, ScenarioError, StepOutcome, TimeModel,
                    WorldObject, WorldState, check_goal, observe, step, validate_world)
from .scenarios import (Layout, Perturbation, PlacedObject, ScenarioSpec, Suite, TaskDemos,
                        build_world, demo_specs, dump_suite, init_scenario, load_suite,
                        record_demo, save_suite, suite_from_doc)
from .builtin import builtin_suite

__all__ = [
    "ACTION_RULES", "ActionRule", "DemoConstructionError", "IRREVERSIBLE_DAMAGE", "Layout",
    "NoiseConfig", "OK", "PRECONDITION_FAILED", "Perturbation", "PlacedObject", "ScenarioError",
    "ScenarioSpec", "StepOutcome", "Suite", "TaskDemos", "TimeModel", "WorldObject", "WorldState",
    "build_world", "builtin_suite", "check_goal", "demo_specs", "dump_suite", "init_scenario",
    "load_suite", "observe", "record_demo", "save_suite", "step", "suite_from_doc",
    "validate_world",
]

import json

import pytest
from hypothesis import given, settings, strategies as st

from sgreplan.core import (ConfigurationError, GoalCondition, Plan, SceneGraph, Subtask, TaskSpec,
                           VocabularyError, default_vocab, dumps_graph, eval_goal, graph_to_text,
                           loads_graph, validate_doc, validate_graph)
from oracles import graph, random_graph

import numpy as np


def test_vocabulary_every_category_has_states():
    vocab = default_vocab()
    assert vocab.version
    for cat, states in vocab.categories.items():
        assert states, cat
    assert set(vocab.predicates) == {"on_top_of", "inside", "left_of", "right_of", "near",
                                     "held_by_robot"}
    # stateless things carry the single default state
    for cat in ("counter", "table", "plate", "knife", "robot_gripper"):
        assert vocab.categories[cat] == ("default",)


def test_subtask_canonical_and_arity():
    s = Subtask.parse("put_in plate microwave")
    assert s.canonical() == "put_in plate microwave"
    assert s.tokens() == ["put_in", "plate", "microwave"]
    assert Subtask.from_doc(s.to_doc()) == s
    with pytest.raises(VocabularyError):
        Subtask("put_in", ("plate",))
    with pytest.raises(VocabularyError):
        Subtask("teleport", ("mug",))
    with pytest.raises(VocabularyError):
        Subtask("pick_up", ("spaceship",))


def test_validate_well_formed_graph():
    g = graph([("b", "bowl", "clean"), ("m", "microwave", "open")], [("b", "inside", "m")])
    assert validate_graph(g).ok


def test_validate_dangling_edge():
    g = graph([("b", "bowl", "clean")], [("b", "inside", "m")])
    assert "DanglingEdge" in validate_graph(g).kinds()


def test_validate_connected_subtask_node():
    g = graph([("b", "bowl", "clean")], [("b", "near", "subtask")], "pick_up bowl")
    assert "ConnectedSubtaskNode" in validate_graph(g).kinds()


def test_validate_inadmissible_and_held():
    g = graph([("b", "bowl", "boiling"), ("m", "mug", "clean"), ("p", "pan", "clean")],
              [("m", "held_by_robot", "p")])
    kinds = validate_graph(g).kinds()
    assert "InadmissibleState" in kinds and "HeldNotByGripper" in kinds


def test_validate_doc_catches_duplicate_ids():
    doc = graph([("a", "mug", "clean")]).to_doc()
    doc["nodes"].append({"id": "a", "category": "mug", "state": "dirty"})
    assert "DuplicateId" in validate_doc(doc).kinds()


def test_validate_does_not_mutate():
    g = graph([("b", "bowl", "clean")], [("b", "inside", "zz")])
    before = dumps_graph(g)
    validate_graph(g)
    assert dumps_graph(g) == before


def test_graph_to_text_formats():
    g = graph([("p", "pan", "dirty")], subtask="cook egg")
    assert graph_to_text(g) == "subtask: cook egg\npan is dirty"
    g = graph([("b", "bowl", "clean"), ("m", "microwave", "closed")], [("b", "inside", "m")])
    assert graph_to_text(g) == "bowl is clean\nmicrowave is closed\nbowl inside microwave"
    assert graph_to_text(g) == graph_to_text(g)


def test_graph_to_text_ignores_ids():
    a = graph([("x1", "mug", "clean"), ("x2", "table", "default")], [("x1", "on_top_of", "x2")])
    b = graph([("q", "mug", "clean"), ("r", "table", "default")], [("q", "on_top_of", "r")])
    c = graph([("q", "mug", "dirty"), ("r", "table", "default")], [("q", "on_top_of", "r")])
    assert graph_to_text(a) == graph_to_text(b) != graph_to_text(c)


def test_eval_goal_examples():
    g = graph([("e", "egg", "cooked")])
    assert eval_goal(g, GoalCondition.parse(["egg is cooked"]))
    both = graph([("e", "egg", "cooked"), ("p", "potato", "cooked")])
    assert not eval_goal(both, GoalCondition.parse(["egg is cooked", "potato is raw"]))
    assert not eval_goal(SceneGraph(), GoalCondition.parse(["egg is cooked"]))
    g = graph([("m", "mug", "filled"), ("t", "table", "default")], [("m", "on_top_of", "t")])
    assert eval_goal(g, GoalCondition.parse(["mug is filled", "mug on_top_of table"]))
    assert not eval_goal(g, GoalCondition.parse(["mug inside table"]))


def test_goal_errors():
    with pytest.raises(ConfigurationError):
        GoalCondition(())
    with pytest.raises(ConfigurationError):
        eval_goal(SceneGraph(), GoalCondition.parse(["unicorn is clean"]))
    with pytest.raises(ConfigurationError):
        TaskSpec("t", GoalCondition.parse(["unicorn is clean"]), ())


def test_plan_cursor_bounds():
    p = Plan([Subtask.parse("open fridge"), Subtask.parse("close fridge")])
    assert p.current == Subtask.parse("open fridge") and not p.done
    p.cursor = 2
    assert p.done and p.current is None
    with pytest.raises(ValueError):
        Plan([], 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_serialization_round_trip(seed):
    g = random_graph(np.random.default_rng(seed))
    text = dumps_graph(g)
    assert loads_graph(text) == g
    assert dumps_graph(loads_graph(text)) == text
    assert json.loads(text)["vocab_version"] == default_vocab().version

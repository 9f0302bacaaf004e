import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgreplan.core import Subtask, validate_graph
from sgreplan.graphbuild import (GeometryParams, Observation, ObservationError, ObservedObject,
                                 build_scene_graph, extract_spatial_relations, gripper_relation,
                                 project_points)


def obj(i, cat, state, box, container=None):
    return ObservedObject(i, cat, state, tuple(float(v) for v in box), container)


MICRO = obj("mw", "microwave", "open", (0, 0, 0, 0.5, 0.4, 0.3))
BOWL = obj("bw", "bowl", "clean", (0.1, 0.1, 0.01, 0.35, 0.35, 0.13))


def triples(edges):
    return {e.as_tuple() for e in edges}


def test_lattice_corners_and_labels():
    cube = obj("c", "bowl", "clean", (0, 0, 0, 1, 1, 1))
    pts, labels = project_points(Observation((cube,)), 8)
    assert pts.shape == (8, 3)
    assert {tuple(p) for p in pts} == {(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)}
    far = obj("d", "mug", "clean", (5, 5, 5, 6, 6, 6))
    pts, labels = project_points(Observation((cube, far)), 27)
    labels = np.array(labels)
    assert np.all(pts[labels == "c"] <= 1) and np.all(pts[labels == "d"] >= 5)
    with pytest.raises(ValueError):
        project_points(Observation((cube,)), 7)


def test_nested_points_inside_outer():
    pts, labels = project_points(Observation((MICRO, BOWL)), 27)
    inner = pts[np.array(labels) == "bw"]
    assert np.all((inner >= MICRO.lo) & (inner <= MICRO.hi))


def test_degenerate_box_skipped():
    flat = obj("f", "plate", "default", (0, 0, 0, 1, 1, 0))
    pts, labels = project_points(Observation((flat,)), 8)
    assert len(pts) == 0


def test_bowl_inside_microwave():
    assert triples(extract_spatial_relations(Observation((MICRO, BOWL)))) == {("bw", "inside", "mw")}


def test_pan_on_stove_gap_and_overlap():
    stove = obj("st", "stove", "off", (0, 0, 0, 0.6, 0.6, 0.9))
    # 0.3 x 0.3 pan shifted so 90% of its footprint is over the stove, 1 cm gap
    pan = obj("pn", "pan", "clean", (0.33, 0.1, 0.91, 0.63, 0.4, 0.97))
    overlap = (0.6 - 0.33) * 0.3 / (0.3 * 0.3)
    assert overlap == pytest.approx(0.9)
    assert triples(extract_spatial_relations(Observation((stove, pan)))) == {("pn", "on_top_of", "st")}


def test_far_apart_gives_nothing():
    a = obj("a", "mug", "clean", (0, 0, 0, 0.1, 0.1, 0.1))
    b = obj("b", "mug", "clean", (2, 0, 0, 2.1, 0.1, 0.1))
    assert extract_spatial_relations(Observation((a, b))) == set()


def test_lateral_relations():
    a = obj("a", "mug", "clean", (0, 0, 0, 0.1, 0.1, 0.1))
    b = obj("b", "apple", "whole", (0.3, 0, 0, 0.37, 0.07, 0.07))
    c = obj("c", "egg", "raw", (0.0, 0.3, 0, 0.06, 0.35, 0.05))
    got = triples(extract_spatial_relations(Observation((a, b, c))))
    assert ("b", "right_of", "a") in got and ("a", "left_of", "b") in got
    assert ("a", "near", "c") in got and ("c", "near", "a") in got


def test_gripper_relation():
    mug = obj("m", "mug", "clean", (0, 0, 0, 0.1, 0.1, 0.1))
    assert triples(gripper_relation(Observation((mug,), gripper_holding="m"))) == \
        {("m", "held_by_robot", "robot_gripper")}
    assert gripper_relation(Observation((mug,))) == set()
    with pytest.raises(ObservationError):
        gripper_relation(Observation((mug,), gripper_holding="zz"))
    fridge = obj("f", "fridge", "open", (0, 0, 0, 1, 1, 2))
    held = obj("m", "mug", "clean", (0.1, 0.1, 0.1, 0.2, 0.2, 0.2), container="f")
    with pytest.raises(ObservationError):
        gripper_relation(Observation((fridge, held), gripper_holding="m"))


def test_scene_graph_occupied_microwave():
    g = build_scene_graph(Observation((MICRO, BOWL)), Subtask.parse("put_in plate microwave"))
    assert len(g.nodes) == 2
    assert triples(g.edges) == {("bw", "inside", "mw")}
    assert g.subtask == Subtask.parse("put_in plate microwave")
    assert validate_graph(g).ok


def test_empty_observation_and_determinism():
    g = build_scene_graph(Observation(), Subtask.parse("open fridge"))
    assert g.nodes == () and g.edges == () and g.subtask is not None
    a = build_scene_graph(Observation((MICRO, BOWL)), Subtask.parse("open microwave"))
    b = build_scene_graph(Observation((MICRO, BOWL)), Subtask.parse("open microwave"))
    assert a.to_doc() == b.to_doc()


def test_held_object_adds_gripper_node():
    mug = obj("m", "mug", "clean", (0, 0, 0, 0.1, 0.1, 0.1))
    g = build_scene_graph(Observation((mug,), gripper_holding="m"), Subtask.parse("put_on mug table"))
    assert {n.category for n in g.nodes} == {"mug", "robot_gripper"}
    assert validate_graph(g).ok


def test_focus_keeps_argument_neighbourhood():
    counter = obj("ct", "counter", "default", (0, 0, 0, 3, 1, 0.9))
    pan = obj("pn", "pan", "clean", (0.2, 0.2, 0.9, 0.5, 0.5, 0.96))
    potato = obj("po", "potato", "raw", (0.3, 0.3, 0.96, 0.4, 0.38, 1.03))
    far_mug = obj("mg", "mug", "clean", (2.5, 0.5, 0.9, 2.6, 0.6, 1.04))
    g = build_scene_graph(Observation((counter, pan, potato, far_mug)),
                          Subtask.parse("cook egg pan"), focus=True)
    assert {n.id for n in g.nodes} == {"ct", "pn", "po"}
    full = build_scene_graph(Observation((counter, pan, potato, far_mug)),
                             Subtask.parse("cook egg pan"))
    assert "mg" in {n.id for n in full.nodes}


# random kitchen-ish boxes for the property tests
box_st = st.tuples(st.floats(0, 2), st.floats(0, 2), st.floats(0, 1),
                   st.floats(0.05, 0.6), st.floats(0.05, 0.6), st.floats(0.05, 0.6))
CATS = [("mug", "clean"), ("bowl", "clean"), ("pan", "dirty"), ("apple", "whole"),
        ("plate", "default"), ("pot", "empty")]


def _obs(boxes):
    objs = []
    for k, (x, y, z, w, d, h) in enumerate(boxes):
        c, s = CATS[k % len(CATS)]
        objs.append(obj(f"o{k}", c, s, (x, y, z, x + w, y + d, z + h)))
    return Observation(tuple(objs))


@settings(max_examples=80, deadline=None)
@given(st.lists(box_st, min_size=0, max_size=6))
def test_relation_invariants(boxes):
    obs = _obs(boxes)
    edges = extract_spatial_relations(obs)
    pairs = [(e.subject, e.object) for e in edges]
    assert len(pairs) == len(set(pairs))  # one predicate per ordered pair
    inside = {(e.subject, e.object) for e in edges if e.predicate == "inside"}
    assert not any((b, a) in inside for a, b in inside)
    g = build_scene_graph(obs, Subtask.parse("pick_up mug"))
    assert validate_graph(g).ok
    assert build_scene_graph(obs, Subtask.parse("pick_up mug")) == g


@settings(max_examples=60, deadline=None)
@given(st.lists(box_st, min_size=2, max_size=5), st.floats(0.05, 0.5))
def test_shrinking_near_distance_never_adds_edges(boxes, shrink):
    obs = _obs(boxes)
    wide = extract_spatial_relations(obs, GeometryParams(near_dist_max=0.5))
    narrow = extract_spatial_relations(obs, GeometryParams(near_dist_max=shrink))
    assert triples(narrow) <= triples(wide)

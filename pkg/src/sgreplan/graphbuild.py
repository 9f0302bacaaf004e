"""Turn an agent observation into a scene graph.

Objects arrive with category, state and an axis-aligned box in the world
frame. Spatial predicates come from simple heuristics over a sampled point
lattice; the gripper contributes ``held_by_robot`` edges and the current
subtask is attached as a detached node.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (GRIPPER_CATEGORY, GRIPPER_ID, DEFAULT_STATE, Edge, ObjectNode,
                   SceneGraph, Subtask)

log = logging.getLogger(__name__)

SUPPORT_PREDICATES = ("inside", "on_top_of")
LATERAL_PREDICATES = ("left_of", "right_of", "near")
_AXES = {"x": 0, "y": 1, "z": 2}


class ObservationError(ValueError):
    pass


@dataclass(frozen=True)
class ObservedObject:
    id: str
    category: str
    state: str
    aabb: tuple  # (xmin, ymin, zmin, xmax, ymax, zmax) in meters
    container: Optional[str] = None

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.aabb[:3], dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.aabb[3:], dtype=float)

    @property
    def centroid(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def degenerate(self) -> bool:
        return bool(np.any(self.hi <= self.lo))

    def to_doc(self) -> dict:
        return {"id": self.id, "category": self.category, "state": self.state,
                "aabb": [round(float(v), 9) for v in self.aabb], "container": self.container}


@dataclass(frozen=True)
class Observation:
    objects: tuple = ()
    gripper_holding: Optional[str] = None
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(sorted(self.objects, key=lambda o: o.id)))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ObservationError("duplicate object ids in observation")

    def get(self, obj_id: str) -> Optional[ObservedObject]:
        for o in self.objects:
            if o.id == obj_id:
                return o
        return None

    def to_doc(self) -> dict:
        return {"objects": [o.to_doc() for o in self.objects],
                "gripper_holding": self.gripper_holding, "timestamp": self.timestamp}


@dataclass(frozen=True)
class GeometryParams:
    on_top_gap_max: float = 0.03
    overlap_min: float = 0.5
    containment_min: float = 0.8
    near_dist_max: float = 0.5
    lateral_axis: str = "x"  # +axis points to the right
    samples_per_object: int = 27

    def __post_init__(self):
        for name in ("on_top_gap_max", "overlap_min", "containment_min", "near_dist_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("overlap_min", "containment_min"):
            if getattr(self, name) > 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.lateral_axis not in _AXES:
            raise ValueError(f"lateral_axis must be one of {sorted(_AXES)}")


def _lattice(lo: np.ndarray, hi: np.ndarray, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def project_points(obs: Observation, samples_per_object: int = 27) -> tuple:
    """Sample a regular lattice inside every object box.

    Returns ``(points, labels)``: an (n, 3) array and the object id of each
    row. The lattice has ``floor(cbrt(samples))`` points per axis, corners
    included, so 8 samples give the 8 box corners.
    """
    if samples_per_object < 8:
        raise ValueError("samples_per_object must be >= 8")
    per_axis = int(np.floor(round(samples_per_object ** (1.0 / 3.0), 9)))
    pts, labels = [], []
    for o in obs.objects:
        if o.degenerate():
            log.warning("skipping degenerate box for %s", o.id)
            continue
        p = _lattice(o.lo, o.hi, per_axis)
        pts.append(p)
        labels.extend([o.id] * len(p))
    if not pts:
        return np.zeros((0, 3)), []
    return np.concatenate(pts), labels


def _inside_fraction(points: np.ndarray, box: ObservedObject, tol: float = 1e-9) -> float:
    if len(points) == 0:
        return 0.0
    within = np.all((points >= box.lo - tol) & (points <= box.hi + tol), axis=1)
    return float(within.mean())


def _footprint_overlap(a: ObservedObject, b: ObservedObject) -> float:
    dx = min(a.hi[0], b.hi[0]) - max(a.lo[0], b.lo[0])
    dy = min(a.hi[1], b.hi[1]) - max(a.lo[1], b.lo[1])
    if dx <= 0 or dy <= 0:
        return 0.0
    return float(dx * dy / ((a.hi[0] - a.lo[0]) * (a.hi[1] - a.lo[1])))


def _volume(o: ObservedObject) -> float:
    return float(np.prod(o.hi - o.lo))


def extract_spatial_relations(obs: Observation, params: GeometryParams = GeometryParams()) -> set:
    """Pairwise spatial edges, at most one per ordered pair.

    Priority is inside > on_top_of > left_of/right_of > near. A pair already
    linked by a support relation (either direction) gets no lateral edge in
    the reverse direction, so a container is never "near" its own contents.
    """
    points, labels = project_points(obs, params.samples_per_object)
    labels = np.asarray(labels)
    objs = [o for o in obs.objects if not o.degenerate()]
    by_id = {o.id: o for o in objs}
    lat = _AXES[params.lateral_axis]

    support = {}
    for a in objs:
        pa = points[labels == a.id]
        for b in objs:
            if a.id == b.id:
                continue
            if a.container == b.id or _inside_fraction(pa, b) >= params.containment_min:
                support[(a.id, b.id)] = "inside"
                continue
            gap = a.lo[2] - b.hi[2]
            if -1e-9 <= gap <= params.on_top_gap_max and _footprint_overlap(a, b) >= params.overlap_min:
                support[(a.id, b.id)] = "on_top_of"

    # identical boxes can look mutually inside; keep the smaller (then explicit) one
    for a, b in sorted(support):
        if support.get((a, b)) != "inside" or support.get((b, a)) != "inside":
            continue
        oa, ob = by_id[a], by_id[b]
        if oa.container == b:
            inner = a
        elif ob.container == a:
            inner = b
        else:
            inner = min((_volume(oa), a), (_volume(ob), b))[1]
        del support[(b, a) if inner == a else (a, b)]

    edges = {Edge(a, p, b) for (a, b), p in support.items()}
    linked = {frozenset(k) for k in support}
    for a in objs:
        for b in objs:
            if a.id == b.id or frozenset((a.id, b.id)) in linked:
                continue
            dist = float(np.linalg.norm(a.centroid - b.centroid))
            if dist > params.near_dist_max:
                continue
            offset = a.centroid[lat] - b.centroid[lat]
            half_mean_width = ((a.hi[lat] - a.lo[lat]) + (b.hi[lat] - b.lo[lat])) / 4.0
            if offset > half_mean_width:
                edges.add(Edge(a.id, "right_of", b.id))
            elif -offset > half_mean_width:
                edges.add(Edge(a.id, "left_of", b.id))
            else:
                edges.add(Edge(a.id, "near", b.id))
    return edges


def gripper_relation(obs: Observation) -> set:
    held = obs.gripper_holding
    if held is None:
        return set()
    o = obs.get(held)
    if o is None:
        raise ObservationError(f"gripper holds {held!r}, which is not observed")
    if o.container is not None:
        raise ObservationError(f"{held!r} is held but also reported inside {o.container!r}")
    return {Edge(held, "held_by_robot", GRIPPER_ID)}


def _check_observation(obs: Observation) -> None:
    ids = {o.id for o in obs.objects}
    for o in obs.objects:
        if o.container is not None and o.container not in ids:
            raise ObservationError(f"{o.id!r} is inside unobserved {o.container!r}")
        if o.id == GRIPPER_ID:
            raise ObservationError("the gripper is not an observable object")


def focus_ids(obs: Observation, edges: set, subtask: Optional[Subtask]) -> set:
    """Objects relevant to ``subtask``: the scene around its arguments.

    Seeds are the observed objects whose category is a subtask argument,
    plus whatever the gripper holds. The focus adds every seed's direct
    support (what it sits on or in), everything resting on or inside a
    seed (recursively), and objects laterally next to a seed.
    """
    args = set(subtask.args) if subtask is not None else set()
    seeds = {o.id for o in obs.objects if o.category in args}
    if obs.gripper_holding is not None:
        seeds.add(obs.gripper_holding)
    keep = set(seeds)
    children = {}
    for e in edges:
        if e.predicate in SUPPORT_PREDICATES:
            children.setdefault(e.object, set()).add(e.subject)
            if e.subject in seeds:
                keep.add(e.object)
        elif e.predicate in LATERAL_PREDICATES:
            if e.subject in seeds:
                keep.add(e.object)
            if e.object in seeds:
                keep.add(e.subject)
    stack = list(seeds)
    while stack:
        for c in children.get(stack.pop(), ()):
            if c not in keep:
                keep.add(c)
                stack.append(c)
    return keep


def build_scene_graph(obs: Observation, subtask: Optional[Subtask] = None,
                      params: GeometryParams = GeometryParams(), focus: bool = False) -> SceneGraph:
    """Scene graph of ``obs`` with ``subtask`` attached as the detached node.

    With ``focus=True`` the graph is cropped to :func:`focus_ids`, which is
    how the agent looks at the part of the scene a subtask acts on.
    """
    _check_observation(obs)
    edges = extract_spatial_relations(obs, params) | gripper_relation(obs)
    nodes = [ObjectNode(o.id, o.category, o.state) for o in obs.objects if not o.degenerate()]
    if focus:
        keep = focus_ids(obs, edges, subtask)
        nodes = [n for n in nodes if n.id in keep]
        edges = {e for e in edges
                 if e.subject in keep and (e.object in keep or e.object == GRIPPER_ID)}
    if obs.gripper_holding is not None:
        nodes.append(ObjectNode(GRIPPER_ID, GRIPPER_CATEGORY, DEFAULT_STATE))
    return SceneGraph(tuple(nodes), tuple(edges), subtask)

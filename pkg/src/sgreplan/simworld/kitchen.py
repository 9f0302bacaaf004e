"""Kitchen geometry: fixture boxes, object sizes and slot placement.

Fixtures never move. Movable objects get a box from their support: a slot
grid on large surfaces and containers, centred (with small side offsets
when shared) on small ones. Slots are assigned by sorted object id, so a
world's structure fully determines every box.
"""
from __future__ import annotations

import numpy as np

# base boxes (xmin, ymin, zmin, xmax, ymax, zmax) before the layout shift
FIXTURES = {
    "counter": (0.0, 0.0, 0.0, 5.0, 1.2, 0.9),
    "coffee_machine": (3.4, 0.4, 0.9, 3.7, 0.7, 1.3),
    "microwave": (4.2, 0.3, 0.9, 4.7, 0.7, 1.2),
    "stove": (6.5, 0.0, 0.0, 7.3, 0.6, 0.9),
    "sink": (8.5, 0.0, 0.6, 9.3, 0.6, 0.9),
    "faucet": (8.85, 0.45, 0.9, 8.95, 0.55, 1.1),
    "table": (11.0, 0.0, 0.0, 13.0, 1.2, 0.75),
    "fridge": (14.5, 0.0, 0.0, 15.3, 0.7, 1.8),
    "drawer": (16.5, 0.0, 0.5, 17.1, 0.5, 0.8),
    "shelf": (18.5, 0.0, 0.0, 19.5, 0.4, 1.2),
}

FIXTURE_STATES = {
    "counter": "default", "coffee_machine": "off", "microwave": "closed", "stove": "off",
    "sink": "default", "faucet": "off", "table": "default", "fridge": "closed",
    "drawer": "closed", "shelf": "default",
}

SIZES = {
    "apple": (0.07, 0.07, 0.07),
    "bowl": (0.25, 0.25, 0.12),
    "egg": (0.06, 0.05, 0.05),
    "knife": (0.25, 0.04, 0.02),
    "lettuce": (0.15, 0.15, 0.06),
    "mug": (0.1, 0.1, 0.14),
    "pan": (0.3, 0.3, 0.06),
    "plate": (0.25, 0.25, 0.04),
    "pot": (0.25, 0.25, 0.18),
    "potato": (0.1, 0.08, 0.07),
}

# slot grids: (region xmin, xmax, ymin, ymax in parent-relative coords, pitch)
GRIDS = {
    ("counter", "on_top_of"): (0.3, 2.7, 0.3, 0.9, 0.6),
    ("table", "on_top_of"): (0.3, 1.5, 0.3, 0.9, 0.6),
    ("shelf", "on_top_of"): (0.25, 0.75, 0.2, 0.2, 0.5),
    ("drawer", "inside"): (0.15, 0.45, 0.15, 0.35, 0.2),
}

# shelved containers stack slots vertically: (x, y, first z, z pitch, levels)
SHELVES = {("fridge", "inside"): (0.4, 0.35, 0.05, 0.6, 3)}

OPENABLE = {"microwave", "fridge", "drawer"}
SURFACES = {"counter", "table", "shelf", "stove", "coffee_machine", "plate", "pan", "sink"}
CONTAINERS = {"microwave", "fridge", "drawer", "sink", "bowl", "mug", "pot"}
CAPACITY = {
    ("microwave", "inside"): 1, ("sink", "inside"): 1, ("bowl", "inside"): 1,
    ("mug", "inside"): 1, ("pot", "inside"): 1, ("coffee_machine", "on_top_of"): 1,
    ("plate", "on_top_of"): 2, ("stove", "on_top_of"): 1,
}
FOODS = {"apple", "egg", "lettuce", "potato"}

GRIPPER_POSE = np.array([-3.0, -3.0, 1.2])  # bottom-centre of a held object


def shift(geometry: int) -> np.ndarray:
    """Per-layout rigid offset of the whole kitchen."""
    g = int(geometry)
    return np.array([0.37 * g, 0.11 * g, 0.0])


def fixture_box(cat: str, geometry: int) -> np.ndarray:
    off = shift(geometry)
    box = np.asarray(FIXTURES[cat], dtype=float)
    return np.concatenate([box[:3] + off, box[3:] + off])


def size(cat: str) -> np.ndarray:
    return np.asarray(SIZES[cat], dtype=float)


def box_at(bottom_center: np.ndarray, dims: np.ndarray) -> np.ndarray:
    lo = bottom_center - np.array([dims[0] / 2, dims[1] / 2, 0.0])
    hi = bottom_center + np.array([dims[0] / 2, dims[1] / 2, dims[2]])
    return np.concatenate([lo, hi])


def grid_slot(parent_cat: str, rel: str, parent_box: np.ndarray, index: int):
    """Bottom-centre of slot ``index`` on a gridded parent, or None."""
    shelf = SHELVES.get((parent_cat, rel))
    if shelf is not None:
        x, y, z0, pitch, levels = shelf
        if index >= levels:
            raise ValueError(f"no free slot {index} {rel} {parent_cat}")
        return np.array([parent_box[0] + x, parent_box[1] + y, parent_box[2] + z0 + pitch * index])
    spec = GRIDS.get((parent_cat, rel))
    if spec is None:
        return None
    x0, x1, y0, y1, pitch = spec
    xs = np.arange(x0, x1 + 1e-9, pitch)
    ys = np.arange(y0, y1 + 1e-9, pitch)
    if index >= len(xs) * len(ys):
        raise ValueError(f"no free slot {index} {rel} {parent_cat}")
    row, col = divmod(index, len(xs))
    z = parent_box[5] if rel == "on_top_of" else parent_box[2] + 0.01
    return np.array([parent_box[0] + xs[col], parent_box[1] + ys[row], z])


def centred_slot(rel: str, parent_box: np.ndarray, index: int, count: int) -> np.ndarray:
    cx = (parent_box[0] + parent_box[3]) / 2 + 0.12 * (index - (count - 1) / 2)
    cy = (parent_box[1] + parent_box[4]) / 2
    z = parent_box[5] if rel == "on_top_of" else parent_box[2] + 0.01
    return np.array([cx, cy, z])

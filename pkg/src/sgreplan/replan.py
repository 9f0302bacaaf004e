"""Diagnose a scene mismatch and produce a corrective action sequence.

The rule-based reasoner is the reference path. A remote reasoner can be
plugged in through a JSON-over-HTTP protocol; its answers pass a schema and
vocabulary gate, and anything that fails the gate falls back to the rules.
"""
from __future__ import annotations

import hashlib
import json
import logging
import urllib.request
from dataclasses import dataclass, field
from typing import Optional

from .core import (GRIPPER_CATEGORY, ConfigurationError, Plan, SceneGraph, Subtask,
                   VocabularyError, canonical_json, default_vocab, graph_to_text)
from .simmatch import NodeMatching, matched_edge_pairs

log = logging.getLogger(__name__)

KINDS = ("MissingObject", "UnexpectedBlocker", "WrongState", "MisplacedObject",
         "OccupiedReceptacle", "Unknown")
PREPEND = "prepend_before_current"
REPLACE = "replace_remainder"
SUPPORT = ("inside", "on_top_of")

# where an object lives when it is not out on a work surface
DEFAULT_HOMES = {
    "apple": "fridge", "egg": "fridge", "lettuce": "fridge", "potato": "fridge",
    "bowl": "drawer", "knife": "drawer", "mug": "drawer", "pan": "drawer",
    "plate": "drawer", "pot": "drawer",
}

# expected state -> verb that produces it from a wrong state
STATE_FIXES = {"clean": "clean", "open": "open", "closed": "close", "on": "toggle",
               "off": "toggle", "sliced": "slice"}


class TemplateError(ConfigurationError):
    pass


class RemoteReasonerError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiffSummary:
    missing_in_obs: tuple = ()      # (category, state)
    extra_in_obs: tuple = ()        # (category, state, ((cat, pred, cat), ...))
    state_mismatches: tuple = ()    # (category, expected state, observed state)
    edge_mismatches: tuple = ()     # ("expected" | "observed", cat, pred, cat)

    def is_empty(self) -> bool:
        return not (self.missing_in_obs or self.extra_in_obs or self.state_mismatches
                    or self.edge_mismatches)

    def to_doc(self) -> dict:
        return {
            "missing_in_obs": [list(m) for m in self.missing_in_obs],
            "extra_in_obs": [[c, s, [list(e) for e in edges]] for c, s, edges in self.extra_in_obs],
            "state_mismatches": [list(m) for m in self.state_mismatches],
            "edge_mismatches": [list(m) for m in self.edge_mismatches],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "DiffSummary":
        return cls(
            tuple(tuple(m) for m in doc["missing_in_obs"]),
            tuple((c, s, tuple(tuple(e) for e in edges)) for c, s, edges in doc["extra_in_obs"]),
            tuple(tuple(m) for m in doc["state_mismatches"]),
            tuple(tuple(m) for m in doc["edge_mismatches"]),
        )


@dataclass(frozen=True)
class Diagnosis:
    kind: str
    focus: Optional[str] = None
    receptacle: Optional[str] = None
    expected_state: Optional[str] = None
    predicate: Optional[str] = None
    explanation: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown diagnosis kind {self.kind!r}")
        if self.kind != "Unknown" and not self.focus:
            raise ValueError(f"{self.kind} diagnosis needs a focus object")

    def to_doc(self) -> dict:
        return {"kind": self.kind, "focus": self.focus, "receptacle": self.receptacle,
                "expected_state": self.expected_state, "predicate": self.predicate,
                "explanation": self.explanation}


@dataclass(frozen=True)
class RecoveryPlan:
    actions: tuple = ()
    insert_mode: str = PREPEND

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if self.insert_mode not in (PREPEND, REPLACE):
            raise ValueError(f"unknown insert mode {self.insert_mode!r}")

    @property
    def escalate(self) -> bool:
        return not self.actions and self.insert_mode == REPLACE

    def to_doc(self) -> dict:
        return {"actions": [a.to_doc() for a in self.actions], "insert_mode": self.insert_mode}


@dataclass(frozen=True)
class ReasonRequest:
    goal: str
    subtask: str
    observed_text: str
    reference_text: str
    diff: DiffSummary
    available_actions: tuple
    visible_objects: tuple

    def __post_init__(self):
        for name in ("goal", "subtask", "observed_text", "reference_text"):
            if not getattr(self, name):
                raise ValueError(f"ReasonRequest.{name} must be non-empty")

    def to_doc(self) -> dict:
        return {"goal": self.goal, "subtask": self.subtask, "observed_text": self.observed_text,
                "reference_text": self.reference_text, "diff": self.diff.to_doc(),
                "available_actions": list(self.available_actions),
                "visible_objects": list(self.visible_objects)}

    def request_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_doc()).encode()).hexdigest()

    # facts recovered from the rendered observation
    def observed_lines(self) -> list:
        return self.observed_text.splitlines()

    def held(self) -> Optional[str]:
        for ln in self.observed_lines():
            parts = ln.split()
            if len(parts) == 3 and parts[1] == "held_by_robot":
                return parts[0]
        return None

    def observed_state(self, category: str) -> Optional[str]:
        for ln in self.observed_lines():
            parts = ln.split()
            if len(parts) == 3 and parts[0] == category and parts[1] == "is":
                return parts[2]
        return None

    def observed_support(self, category: str) -> list:
        return [tuple(ln.split()) for ln in self.observed_lines()
                if len(ln.split()) == 3 and ln.split()[0] == category and ln.split()[1] in SUPPORT]


def available_actions() -> tuple:
    return tuple(f"{v}/{'|'.join(map(str, a))}" for v, a in sorted(default_vocab().verbs.items()))


def graph_diff(g_obs: SceneGraph, g_ref: SceneGraph, matching: NodeMatching) -> DiffSummary:
    om, xm = g_obs.node_map, g_ref.node_map
    cat_o = lambda e: (om[e.subject].category, e.predicate, om[e.object].category)  # noqa: E731
    cat_x = lambda e: (xm[e.subject].category, e.predicate, xm[e.object].category)  # noqa: E731
    missing = sorted((xm[i].category, xm[i].state) for i in matching.unmatched_exp)
    extra = sorted(
        (om[i].category, om[i].state, tuple(sorted(cat_o(e) for e in g_obs.incident(i))))
        for i in matching.unmatched_obs)
    states = sorted((om[o].category, xm[x].state, om[o].state)
                    for o, x in matching.pairs if om[o].state != xm[x].state)
    matched = matched_edge_pairs(matching, g_obs, g_ref)
    m_obs = {o for o, _ in matched}
    m_exp = {x for _, x in matched}
    edges = sorted(
        [("expected",) + cat_x(e) for e in g_ref.edges if e.as_tuple() not in m_exp]
        + [("observed",) + cat_o(e) for e in g_obs.edges if e.as_tuple() not in m_obs])
    return DiffSummary(tuple(missing), tuple(extra), tuple(states), tuple(edges))


def build_request(g_obs: SceneGraph, g_ref: SceneGraph, matching: NodeMatching, goal: str,
                  visible_objects) -> ReasonRequest:
    return ReasonRequest(
        goal=goal, subtask=g_obs.subtask.canonical() if g_obs.subtask else "wait",
        observed_text=graph_to_text(g_obs) or "(empty scene)",
        reference_text=graph_to_text(g_ref) or "(empty scene)",
        diff=graph_diff(g_obs, g_ref, matching),
        available_actions=available_actions(),
        visible_objects=tuple(sorted(set(visible_objects))),
    )


def _roles(subtask: Subtask) -> tuple:
    """(target receptacle or None, target objects) of a subtask."""
    if subtask.verb in ("put_in", "put_on") and len(subtask.args) == 2:
        return subtask.args[1], subtask.args[:1]
    return None, subtask.args


def diagnose(req: ReasonRequest) -> Diagnosis:
    """First matching rule wins.

    1. extra object resting in/on the placement target -> OccupiedReceptacle
    2. extra object resting in/on another argument     -> UnexpectedBlocker
    3. argument in the wrong state                     -> WrongState
    4. argument absent                                 -> MissingObject
    5. argument lost an expected support relation      -> MisplacedObject
    Then the same checks for any object in view, and Unknown last.
    """
    sub = Subtask.parse(req.subtask)
    receptacle, targets = _roles(sub)
    d = req.diff
    args = set(sub.args)

    def support_into(extra, cats):
        for cat, _state, edges in extra:
            for s, p, o in edges:
                if s == cat and p in SUPPORT and o in cats:
                    return cat, o
        return None

    if receptacle is not None:
        hit = support_into(d.extra_in_obs, {receptacle})
        if hit:
            return Diagnosis("OccupiedReceptacle", hit[0], receptacle=hit[1],
                             explanation=f"{hit[1]} is already occupied by {hit[0]}; "
                                         f"{req.subtask} cannot place into it")
    hit = support_into(d.extra_in_obs, set(targets))
    if hit:
        return Diagnosis("UnexpectedBlocker", hit[0], receptacle=hit[1],
                         explanation=f"unexpected {hit[0]} on {hit[1]} would be affected "
                                     f"by {req.subtask}")

    def wrong_state(cands):
        for cat, exp, obs in d.state_mismatches:
            if cat in cands and cat != GRIPPER_CATEGORY:
                return Diagnosis("WrongState", cat, expected_state=exp,
                                 explanation=f"{cat} is {obs} but successful runs had it {exp}")
        return None

    def missing(cands):
        for cat, _state in d.missing_in_obs:
            if cat in cands and cat != GRIPPER_CATEGORY:
                where = "elsewhere" if cat in req.visible_objects else "out of view"
                return Diagnosis("MissingObject", cat,
                                 explanation=f"{cat} is expected here but is {where}")
        return None

    def misplaced(cands):
        for side, s, p, o in d.edge_mismatches:
            if side == "expected" and s in cands and (p in SUPPORT or p == "held_by_robot"):
                return Diagnosis("MisplacedObject", s, receptacle=o, predicate=p,
                                 explanation=f"{s} should be {p} {o}")
        return None

    for rule in (wrong_state, missing, misplaced):
        got = rule(args)
        if got:
            return got
    everything = ({c for c, _ in d.missing_in_obs} | {m[0] for m in d.state_mismatches}
                  | {m[1] for m in d.edge_mismatches})
    for rule in (wrong_state, missing, misplaced):
        got = rule(everything)
        if got:
            return got
    cats_in_view = {ln.split()[0] for ln in req.observed_lines()[1:] if ln}
    hit = support_into(d.extra_in_obs, cats_in_view)
    if hit:
        return Diagnosis("UnexpectedBlocker", hit[0], receptacle=hit[1],
                         explanation=f"unexpected {hit[0]} on {hit[1]}")
    return Diagnosis("Unknown", explanation="no rule explains the mismatch")


def _act(verb: str, *args) -> Subtask:
    try:
        return Subtask(verb, tuple(args))
    except VocabularyError as exc:
        raise TemplateError(f"recovery template produced invalid action: {exc}") from None


def _put(predicate: str, obj: str, dest: str) -> Subtask:
    return _act("put_in" if predicate == "inside" else "put_on", obj, dest)


@dataclass
class RuleReasoner:
    """Rule table plus recovery templates; pure and deterministic."""
    park: str = "counter"
    homes: dict = field(default_factory=lambda: dict(DEFAULT_HOMES))

    def diagnose(self, req: ReasonRequest) -> Diagnosis:
        return diagnose(req)

    def propose(self, diag: Diagnosis, req: ReasonRequest) -> RecoveryPlan:
        return propose_recovery(diag, req, self.park, self.homes)


def _closed_container(req: ReasonRequest, cat: str) -> Optional[str]:
    for _s, p, o in req.observed_support(cat):
        if p == "inside" and req.observed_state(o) == "closed":
            return o
    return None


def _expected_place(req: ReasonRequest, cat: str):
    for side, s, p, o in req.diff.edge_mismatches:
        if side == "expected" and s == cat and (p in SUPPORT or p == "held_by_robot"):
            return p, o
    for ln in req.reference_text.splitlines():
        parts = ln.split()
        if len(parts) == 3 and parts[0] == cat and parts[1] in SUPPORT + ("held_by_robot",):
            return parts[1], parts[2]
    return None


def _relocate(req: ReasonRequest, cat: str, place) -> list:
    acts = [_act("pick_up", cat)]
    if place is not None and place[0] != "held_by_robot":
        acts.append(_put(place[0], cat, place[1]))
    return acts


def propose_recovery(diag: Diagnosis, req: ReasonRequest, park: str = "counter",
                     homes: Optional[dict] = None) -> RecoveryPlan:
    """Corrective actions for ``diag``, to run before the current subtask.

    Removal templates park the offending object on ``park``. If the object
    sits inside a closed container the container is opened first and
    closed again afterwards. If the gripper is busy and the fix needs it,
    the held object is set down on ``park`` first and picked up again at
    the end. Unknown diagnoses return an empty ``replace_remainder`` plan,
    which callers treat as a request to escalate.
    """
    homes = DEFAULT_HOMES if homes is None else homes
    k = diag.kind
    if k == "Unknown":
        return RecoveryPlan((), REPLACE)
    x = diag.focus
    if k in ("OccupiedReceptacle", "UnexpectedBlocker"):
        acts = [_act("pick_up", x), _act("put_on", x, park)]
        box = _closed_container(req, x)
        if box:
            acts = [_act("open", box)] + acts + [_act("close", box)]
    elif k == "WrongState":
        acts = []
        ordered = sorted(req.diff.state_mismatches, key=lambda m: m[0] != x)
        for cat, exp, _obs in ordered:
            verb = STATE_FIXES.get(exp)
            if verb is not None and cat != GRIPPER_CATEGORY and _act(verb, cat) not in acts:
                acts.append(_act(verb, cat))
    elif k == "MissingObject":
        place = _expected_place(req, x)
        if x in req.visible_objects:
            acts = _relocate(req, x, place)
        else:
            home = homes.get(x)
            if home is None:
                return RecoveryPlan((), REPLACE)
            acts = [_act("open", home)] + _relocate(req, x, place) + [_act("close", home)]
    else:  # MisplacedObject
        place = (diag.predicate, diag.receptacle) if diag.receptacle else _expected_place(req, x)
        acts = _relocate(req, x, place)
    if not acts:
        return RecoveryPlan((), REPLACE)
    held = req.held()
    picks = {a.args[0] for a in acts if a.verb == "pick_up"}
    if held is not None and picks and held not in picks:
        acts = [_act("put_on", held, park)] + acts + [_act("pick_up", held)]
    return RecoveryPlan(tuple(acts), PREPEND)


def splice_plan(plan: Plan, recovery: RecoveryPlan) -> Plan:
    head = plan.subtasks[:plan.cursor]
    if recovery.insert_mode == PREPEND:
        body = list(recovery.actions) + plan.subtasks[plan.cursor:]
    else:
        body = list(recovery.actions)
    return Plan(head + body, plan.cursor)


# --- remote reasoner ---------------------------------------------------------

def parse_reasoner_response(doc) -> tuple:
    """Validate a wire response into (Diagnosis, RecoveryPlan) or raise."""
    try:
        d = doc["diagnosis"]
        r = doc["recovery"]
        diag = Diagnosis(kind=d["kind"], focus=d.get("focus"), receptacle=d.get("receptacle"),
                         expected_state=d.get("expected_state"), predicate=d.get("predicate"),
                         explanation=str(d.get("explanation", "")))
        actions = tuple(Subtask(a["verb"], tuple(a.get("args", ()))) for a in r["actions"])
        plan = RecoveryPlan(actions, r["insert_mode"])
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise RemoteReasonerError(f"response failed schema/vocabulary gate: {exc}") from None
    if diag.kind != "Unknown" and not plan.actions:
        raise RemoteReasonerError("non-Unknown diagnosis with an empty recovery")
    return diag, plan


def remote_reason(req: ReasonRequest, endpoint: str, timeout: float = 2.0) -> tuple:
    body = canonical_json(req.to_doc()).encode()
    http = urllib.request.Request(endpoint, data=body, method="POST",
                                  headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(http, timeout=timeout) as resp:
            doc = json.loads(resp.read())
    except (OSError, ValueError) as exc:
        raise RemoteReasonerError(f"reasoner call failed: {exc}") from None
    return parse_reasoner_response(doc)


@dataclass
class Reasoner:
    """Rule table first; a configured remote endpoint is consulted only when
    the rules give up (or first, with ``remote_first``). Remote failures are
    logged and the rule-based answer is used."""
    rules: RuleReasoner = field(default_factory=RuleReasoner)
    endpoint: Optional[str] = None
    timeout: float = 2.0
    remote_first: bool = False
    errors: list = field(default_factory=list)

    def reason(self, req: ReasonRequest) -> tuple:
        """Return (diagnosis, recovery, source) with source in {rules, remote}."""
        if self.endpoint and self.remote_first:
            got = self._try_remote(req)
            if got:
                return got + ("remote",)
        diag = self.rules.diagnose(req)
        plan = self.rules.propose(diag, req)
        if plan.escalate and self.endpoint and not self.remote_first:
            got = self._try_remote(req)
            if got:
                return got + ("remote",)
        return diag, plan, "rules"

    def _try_remote(self, req: ReasonRequest):
        try:
            return remote_reason(req, self.endpoint, self.timeout)
        except RemoteReasonerError as exc:
            log.warning("remote reasoner rejected: %s; using rule table", exc)
            self.errors.append(str(exc))
            return None

"""Graph discrepancy scores between an observed and an expected scene graph.

Three components are computed on one shared node matching:

* node score: summed cosine of matched node features over the size of the
  node union (matched pairs counted once, unmatched nodes on either side
  added);
* edge score: edges whose endpoints are matched pairs and whose predicates
  agree, over the size of the edge union;
* structure score: one minus the mean absolute degree difference across
  matched pairs, each difference scaled by the largest degree in either
  graph.

The overall score is the mean of whichever components are enabled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import SceneGraph, canonical_json
from .embed import EmbeddingProvider, builtin_provider, cosine


@dataclass(frozen=True)
class MatchToggles:
    use_node: bool = True
    use_edge: bool = True
    use_struc: bool = True
    use_subtask_node: bool = True

    def __post_init__(self):
        if not (self.use_node or self.use_edge or self.use_struc):
            raise ValueError("at least one of node, edge, structural scoring must be enabled")

    def to_doc(self) -> dict:
        return {"use_node": self.use_node, "use_edge": self.use_edge,
                "use_struc": self.use_struc, "use_subtask_node": self.use_subtask_node}


ALL_ON = MatchToggles()


@dataclass(frozen=True)
class NodeMatching:
    pairs: tuple = ()  # (obs id, exp id)
    unmatched_obs: tuple = ()
    unmatched_exp: tuple = ()
    subtask_pair_included: bool = False
    pair_cosines: tuple = ()

    @property
    def obs_to_exp(self) -> dict:
        return dict(self.pairs)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs) + int(self.subtask_pair_included)

    def to_doc(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs],
                "unmatched_obs": list(self.unmatched_obs),
                "unmatched_exp": list(self.unmatched_exp),
                "subtask_pair_included": self.subtask_pair_included}


@dataclass(frozen=True)
class SimilarityReport:
    s_node: float
    s_edge: float
    s_struc: float
    s: float
    matching: NodeMatching
    matched_edges: tuple
    D: int
    N: int
    toggles: MatchToggles = ALL_ON
    subtask_cosine: Optional[float] = None

    def to_doc(self) -> dict:
        return {"s_node": self.s_node, "s_edge": self.s_edge, "s_struc": self.s_struc,
                "s": self.s, "D": self.D, "N": self.N,
                "matching": self.matching.to_doc(),
                "matched_edges": [[list(o), list(x)] for o, x in self.matched_edges],
                "toggles": self.toggles.to_doc()}

    def to_json(self) -> str:
        return canonical_json(self.to_doc())


def match_nodes(g_obs: SceneGraph, g_exp: SceneGraph, toggles: MatchToggles = ALL_ON,
                provider: Optional[EmbeddingProvider] = None) -> NodeMatching:
    """Greedy same-category matching by descending node cosine.

    Candidates are sorted by (cosine desc, obs id, exp id) and accepted
    while both ends are free. Cross-category pairs are never formed.
    """
    provider = provider or builtin_provider()
    cands = []
    for o in g_obs.nodes:
        fo = provider.node(o.category, o.state)
        for x in g_exp.nodes:
            if o.category == x.category:
                cands.append((-cosine(fo, provider.node(x.category, x.state)), o.id, x.id))
    cands.sort()
    used_o, used_x, pairs, cosines = set(), set(), [], []
    for neg, oid, xid in cands:
        if oid in used_o or xid in used_x:
            continue
        used_o.add(oid)
        used_x.add(xid)
        pairs.append((oid, xid))
        cosines.append(-neg)
    sub = toggles.use_subtask_node and g_obs.subtask is not None and g_exp.subtask is not None
    return NodeMatching(
        pairs=tuple(pairs),
        unmatched_obs=tuple(n.id for n in g_obs.nodes if n.id not in used_o),
        unmatched_exp=tuple(n.id for n in g_exp.nodes if n.id not in used_x),
        subtask_pair_included=sub,
        pair_cosines=tuple(cosines),
    )


def _subtask_cosine(g_obs: SceneGraph, g_exp: SceneGraph, provider: EmbeddingProvider) -> float:
    return cosine(provider.text(g_obs.subtask.tokens()), provider.text(g_exp.subtask.tokens()))


def node_similarity(matching: NodeMatching, g_obs: SceneGraph, g_exp: SceneGraph,
                    provider: Optional[EmbeddingProvider] = None) -> float:
    provider = provider or builtin_provider()
    if matching.pair_cosines and len(matching.pair_cosines) == len(matching.pairs):
        total = sum(matching.pair_cosines)
    else:
        om, xm = g_obs.node_map, g_exp.node_map
        total = sum(cosine(provider.node(om[o].category, om[o].state),
                           provider.node(xm[x].category, xm[x].state)) for o, x in matching.pairs)
    union = len(matching.pairs) + len(matching.unmatched_obs) + len(matching.unmatched_exp)
    if matching.subtask_pair_included:
        total += _subtask_cosine(g_obs, g_exp, provider)
        union += 1
    if union == 0:
        return 1.0
    return min(1.0, max(0.0, total / union))


def matched_edge_pairs(matching: NodeMatching, g_obs: SceneGraph, g_exp: SceneGraph) -> list:
    """(obs triple, exp triple) for every observed edge with a matched counterpart."""
    o2x = matching.obs_to_exp
    exp_set = {e.as_tuple() for e in g_exp.edges}
    out = []
    for e in g_obs.edges:
        if e.subject in o2x and e.object in o2x:
            mapped = (o2x[e.subject], e.predicate, o2x[e.object])
            if mapped in exp_set:
                out.append((e.as_tuple(), mapped))
    return out


def edge_similarity(matching: NodeMatching, g_obs: SceneGraph, g_exp: SceneGraph) -> float:
    matched = len(matched_edge_pairs(matching, g_obs, g_exp))
    union = len(g_obs.edges) + len(g_exp.edges) - matched
    if union == 0:
        return 1.0
    return matched / union


def degree_normalizer(g_obs: SceneGraph, g_exp: SceneGraph) -> int:
    degs = [g.degree(n.id) for g in (g_obs, g_exp) for n in g.nodes]
    return max([1] + degs)


def structural_similarity(matching: NodeMatching, g_obs: SceneGraph, g_exp: SceneGraph) -> float:
    n = matching.n_pairs
    if n == 0:
        both_empty = not g_obs.nodes and not g_exp.nodes
        return 1.0 if both_empty else 0.0
    d = degree_normalizer(g_obs, g_exp)
    # the subtask pair has degree 0 on both sides and adds nothing to the sum
    diff = sum(abs(g_obs.degree(o) - g_exp.degree(x)) / d for o, x in matching.pairs)
    return max(0.0, 1.0 - diff / n)


def graph_similarity(g_obs: SceneGraph, g_exp: SceneGraph, toggles: MatchToggles = ALL_ON,
                     provider: Optional[EmbeddingProvider] = None) -> SimilarityReport:
    provider = provider or builtin_provider()
    m = match_nodes(g_obs, g_exp, toggles, provider)
    s_node = node_similarity(m, g_obs, g_exp, provider)
    s_edge = edge_similarity(m, g_obs, g_exp)
    s_struc = structural_similarity(m, g_obs, g_exp)
    enabled = [v for v, on in ((s_node, toggles.use_node), (s_edge, toggles.use_edge),
                               (s_struc, toggles.use_struc)) if on]
    return SimilarityReport(
        s_node=s_node, s_edge=s_edge, s_struc=s_struc, s=sum(enabled) / len(enabled),
        matching=m, matched_edges=tuple(matched_edge_pairs(m, g_obs, g_exp)),
        D=degree_normalizer(g_obs, g_exp), N=m.n_pairs, toggles=toggles,
        subtask_cosine=_subtask_cosine(g_obs, g_exp, provider) if m.subtask_pair_included else None,
    )

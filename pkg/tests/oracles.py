"""Independent reference computations used by the tests.

Nothing here calls into the scoring code under test; the only shared
piece is the token hash, which defines the text embedding.
"""
import itertools
import math
from collections import Counter

import numpy as np

from sgreplan.core import Edge, ObjectNode, SceneGraph, Subtask, default_vocab
from sgreplan.embed import token_bucket


def graph(nodes=(), edges=(), subtask=None) -> SceneGraph:
    """``nodes`` as (id, category, state) and ``edges`` as (s, p, o)."""
    sub = Subtask.parse(subtask) if isinstance(subtask, str) else subtask
    return SceneGraph(tuple(ObjectNode(*n) for n in nodes), tuple(Edge(*e) for e in edges), sub)


def onehot_cosine(a: ObjectNode, b: ObjectNode) -> float:
    """cat/state one-hots: dot counts shared halves, both norms are sqrt(2)."""
    dot = (a.category == b.category) + (a.state == b.state)
    return dot / 2.0


def text_cosine(tokens_a, tokens_b, dim=256) -> float:
    ca = Counter(token_bucket(t, dim) for t in tokens_a)
    cb = Counter(token_bucket(t, dim) for t in tokens_b)
    dot = sum(ca[k] * cb[k] for k in ca)
    na2 = sum(v * v for v in ca.values())
    nb2 = sum(v * v for v in cb.values())
    return dot / math.sqrt(na2 * nb2)


def _degree(g: SceneGraph, node_id: str) -> int:
    return sum((e.subject == node_id) + (e.object == node_id) for e in g.edges)


def score_matching(g_obs, g_exp, pairs, use_subtask=True, use=(True, True, True)):
    """(s_node, s_edge, s_struc, s) for an explicit list of (obs id, exp id) pairs."""
    om, xm = g_obs.node_map, g_exp.node_map
    sub = use_subtask and g_obs.subtask is not None and g_exp.subtask is not None
    cos_sum = sum(onehot_cosine(om[o], xm[x]) for o, x in pairs)
    n_obs, n_exp = len(g_obs.nodes), len(g_exp.nodes)
    union = n_obs + n_exp - len(pairs)
    if sub:
        cos_sum += text_cosine(g_obs.subtask.tokens(), g_exp.subtask.tokens())
        union += 1
    s_node = 1.0 if union == 0 else cos_sum / union

    mapping = dict(pairs)
    exp_edges = {e.as_tuple() for e in g_exp.edges}
    hits = 0
    for e in g_obs.edges:
        if e.subject in mapping and e.object in mapping and \
                (mapping[e.subject], e.predicate, mapping[e.object]) in exp_edges:
            hits += 1
    e_union = len(g_obs.edges) + len(g_exp.edges) - hits
    s_edge = 1.0 if e_union == 0 else hits / e_union

    n = len(pairs) + int(sub)
    if n == 0:
        s_struc = 1.0 if n_obs == 0 and n_exp == 0 else 0.0
    else:
        degs = [_degree(g_obs, v.id) for v in g_obs.nodes] + [_degree(g_exp, v.id) for v in g_exp.nodes]
        d = max([1] + degs)
        s_struc = 1.0 - sum(abs(_degree(g_obs, o) - _degree(g_exp, x)) / d for o, x in pairs) / n
    parts = [v for v, on in zip((s_node, s_edge, s_struc), use) if on]
    return s_node, s_edge, s_struc, sum(parts) / len(parts)


def all_matchings(g_obs, g_exp):
    """Every injective same-category partial matching."""
    obs = list(g_obs.nodes)
    cands = [[x.id for x in g_exp.nodes if x.category == o.category] for o in obs]
    options = [[None] + c for c in cands]
    for choice in itertools.product(*options):
        used = [x for x in choice if x is not None]
        if len(used) != len(set(used)):
            continue
        yield [(o.id, x) for o, x in zip(obs, choice) if x is not None]


def best_matching_score(g_obs, g_exp, use_subtask=True, use=(True, True, True)):
    """Exhaustive search: the matching with the largest node score, and its full scores."""
    best = None
    for pairs in all_matchings(g_obs, g_exp):
        sc = score_matching(g_obs, g_exp, pairs, use_subtask, use)
        if best is None or sc[0] > best[0] + 1e-15:
            best = sc
    return best


def count_similarity_oracle(g_obs, g_exp) -> float:
    co = Counter(n.category for n in g_obs.nodes)
    ce = Counter(n.category for n in g_exp.nodes)
    total = len(g_obs.nodes) + len(g_exp.nodes)
    if total == 0:
        return 1.0
    return 1.0 - sum(abs(co[c] - ce[c]) for c in set(co) | set(ce)) / total


# --- random graphs -----------------------------------------------------------

MOVABLE = ["apple", "bowl", "egg", "knife", "lettuce", "mug", "pan", "plate", "pot", "potato"]
PLAIN_PREDICATES = ["on_top_of", "inside", "left_of", "right_of", "near"]
SUBTASKS = ["pick_up mug", "put_in plate microwave", "cook egg pan", "open fridge",
            "put_on pot stove", "slice lettuce", "toggle stove"]


def random_graph(rng: np.random.Generator, max_nodes=10, unique_categories=False,
                 categories=None, with_subtask=True) -> SceneGraph:
    vocab = default_vocab()
    pool = categories or [c for c in vocab.category_names if c != "robot_gripper"]
    n = int(rng.integers(0, max_nodes + 1))
    if unique_categories:
        n = min(n, len(pool))
        cats = list(rng.choice(pool, size=n, replace=False))
    else:
        cats = list(rng.choice(pool, size=n, replace=True))
    nodes = []
    for i, c in enumerate(cats):
        states = vocab.categories[c]
        nodes.append((f"n{i}", str(c), str(states[int(rng.integers(len(states)))])))
    edges = set()
    if n >= 2:
        for _ in range(int(rng.integers(0, 2 * n))):
            a, b = rng.choice(n, size=2, replace=False)
            edges.add((f"n{a}", PLAIN_PREDICATES[int(rng.integers(5))], f"n{b}"))
    sub = SUBTASKS[int(rng.integers(len(SUBTASKS)))] if with_subtask else None
    return graph(nodes, sorted(edges), sub)


def related_pair(rng: np.random.Generator, max_nodes=6):
    """Category-unique (obs, exp) sharing some categories, with edits on top."""
    vocab = default_vocab()
    exp = random_graph(rng, max_nodes, unique_categories=True)
    nodes = [(f"m{i}", n.category, n.state) for i, n in enumerate(exp.nodes)]
    keep = [nd for nd in nodes if rng.random() < 0.8]
    pool = [c for c in vocab.category_names if c != "robot_gripper"
            and c not in {nd[1] for nd in keep}]
    while len(keep) < max_nodes and rng.random() < 0.4 and pool:
        c = str(pool.pop(int(rng.integers(len(pool)))))
        keep.append((f"x{len(keep)}", c, vocab.categories[c][0]))
    obs_nodes = []
    for i, c, s in keep:
        states = vocab.categories[c]
        if rng.random() < 0.3:
            s = str(states[int(rng.integers(len(states)))])
        obs_nodes.append((i, c, s))
    # carry over mapped edges, drop some, add some
    id_of = {n.id: f"m{k}" for k, n in enumerate(exp.nodes)}
    ids = {i for i, _, _ in obs_nodes}
    edges = {(id_of[e.subject], e.predicate, id_of[e.object]) for e in exp.edges
             if rng.random() < 0.7 and id_of[e.subject] in ids and id_of[e.object] in ids}
    idl = sorted(ids)
    if len(idl) >= 2:
        for _ in range(int(rng.integers(0, 3))):
            a, b = rng.choice(len(idl), size=2, replace=False)
            edges.add((idl[a], PLAIN_PREDICATES[int(rng.integers(5))], idl[b]))
    sub = exp.subtask if rng.random() < 0.7 else Subtask.parse(SUBTASKS[int(rng.integers(len(SUBTASKS)))])
    return graph(obs_nodes, sorted(edges), sub), exp

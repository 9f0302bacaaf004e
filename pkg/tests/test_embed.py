import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sgreplan.core import VocabularyError, default_vocab
from sgreplan.embed import (EmbeddingError, EmbeddingProvider, ProviderConfig, cosine, embed_node,
                            embed_text, token_bucket)


def test_node_embedding_norm_and_examples():
    v = embed_node("pan", "clean")
    assert np.dot(v, v) == 2.0
    # direct vector arithmetic: shared category only -> 1 / (sqrt2 * sqrt2)
    w = embed_node("pan", "dirty")
    assert np.dot(v, w) == 1.0
    assert cosine(v, v) == 1.0
    assert cosine(v, w) == 0.5
    assert cosine(v, embed_node("stove", "off")) == 0.0


def test_node_embedding_rejects_inadmissible():
    with pytest.raises(VocabularyError):
        embed_node("pan", "boiling")


def test_text_buckets_listed():
    # the four tokens land in distinct buckets, so overlap counts are exact
    buckets = {t: token_bucket(t) for t in ("pick_up", "mug", "open", "fridge", "pan")}
    assert len(set(buckets.values())) == len(buckets)
    a = embed_text("pick_up mug")
    assert cosine(a, embed_text("pick_up mug")) == 1.0
    assert cosine(a, embed_text("open fridge")) == 0.0
    assert cosine(a, embed_text("pick_up pan")) == pytest.approx(0.5, abs=1e-15)


def test_text_embedding_counts_and_errors():
    v = embed_text(["mug", "mug", "pick_up"])
    assert v[token_bucket("mug")] == 2.0 and v.sum() == 3.0
    with pytest.raises(EmbeddingError):
        embed_text([])


def test_cosine_errors_and_scale():
    v = np.array([1.0, 2.0, 0.0])
    assert cosine(v, 2 * v) == 1.0
    assert cosine([1, 0], [0, 1]) == 0.0
    with pytest.raises(EmbeddingError):
        cosine(np.zeros(3), v)
    with pytest.raises(EmbeddingError):
        cosine([1.0, 0.0], v)


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
       st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
       st.floats(1e-3, 1e3))
def test_cosine_scale_invariance(a, b, lam):
    a, b = np.array(a), np.array(b)
    if not a.any() or not b.any():
        return
    c = cosine(a, b)
    assert -1.0 <= c <= 1.0
    assert abs(cosine(a, lam * b) - c) <= 1e-12


def test_node_cosine_structure():
    vocab = default_vocab()
    pairs = [(c, s) for c, states in vocab.categories.items() for s in states]
    for c1, s1 in pairs:
        v1 = embed_node(c1, s1)
        for c2, s2 in pairs:
            got = cosine(v1, embed_node(c2, s2))
            if c1 == c2:
                assert got == (1.0 if s1 == s2 else 0.5)
            else:
                assert got == (0.5 if s1 == s2 else 0.0)


def test_provider_config_validation():
    with pytest.raises(ValueError):
        ProviderConfig(mode="remote")
    with pytest.raises(ValueError):
        ProviderConfig(mode="clip")


class _Encoder(BaseHTTPRequestHandler):
    calls = 0
    broken = False

    def do_POST(self):
        type(self).calls += 1
        doc = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if type(self).broken:
            body = b"not json"
        elif doc["kind"] == "node":
            body = json.dumps({"vector": embed_node(**doc["payload"]).tolist()}).encode()
        else:
            body = json.dumps({"vector": embed_text(doc["payload"]).tolist()}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *a):
        pass


@pytest.fixture
def encoder():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Encoder)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    _Encoder.calls, _Encoder.broken = 0, False
    yield f"http://127.0.0.1:{srv.server_address[1]}/embed"
    srv.shutdown()
    srv.server_close()


def test_remote_provider_matches_builtin_and_caches(encoder):
    p = EmbeddingProvider(ProviderConfig(mode="remote", remote_endpoint=encoder))
    assert np.array_equal(p.node("mug", "clean"), embed_node("mug", "clean"))
    assert np.array_equal(p.node("mug", "clean"), embed_node("mug", "clean"))
    assert np.array_equal(p.text(["open", "fridge"]), embed_text("open fridge"))
    assert _Encoder.calls == 2


def test_remote_provider_falls_back(encoder):
    _Encoder.broken = True
    p = EmbeddingProvider(ProviderConfig(mode="remote", remote_endpoint=encoder, retries=0))
    assert np.array_equal(p.node("pan", "dirty"), embed_node("pan", "dirty"))


@pytest.mark.parametrize("scale", [1e-300, 1e-90, 1e90, 1e300])
def test_cosine_extreme_magnitudes(scale):
    assert cosine([0.0, 0.0, 1.0], [0.0, 0.0, scale]) == 1.0
    assert abs(cosine([1.0, 1.0], [scale, 0.0]) - 2 ** -0.5) <= 1e-15

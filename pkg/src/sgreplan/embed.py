"""Deterministic embeddings for scene-graph nodes and subtask text.

Node features are a one-hot category block concatenated with a one-hot
state block, so every node vector has L2 norm sqrt(2) and the cosine
between two nodes is 1.0, 0.5 or 0.0.

Text is embedded as a count-weighted bag of tokens. Each distinct token is
hashed to one of ``text_dim`` buckets with keyed BLAKE2b (8-byte digest,
key ``TEXT_HASH_KEY``, little-endian integer modulo ``text_dim``). With the
default 256 buckets, two given distinct tokens collide with probability
1/256; retrieval only uses a similarity floor and top-k, so rare
collisions shift scores but never break determinism.
"""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import urllib.request
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Vocabulary, VocabularyError, default_vocab

log = logging.getLogger(__name__)

TEXT_HASH_KEY = b"sgreplan-text-v1"
DEFAULT_TEXT_DIM = 256


class EmbeddingError(ValueError):
    pass


class EmbeddingServiceError(RuntimeError):
    pass


def token_bucket(token: str, text_dim: int = DEFAULT_TEXT_DIM) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=TEXT_HASH_KEY).digest()
    return int.from_bytes(digest, "little") % text_dim


def embed_node(category: str, state: str, vocab: Optional[Vocabulary] = None) -> np.ndarray:
    vocab = vocab or default_vocab()
    vocab.check_node(category, state)
    cats, states = vocab.category_names, vocab.state_names
    v = np.zeros(len(cats) + len(states))
    v[cats.index(category)] = 1.0
    v[len(cats) + states.index(state)] = 1.0
    return v


def embed_text(tokens, text_dim: int = DEFAULT_TEXT_DIM) -> np.ndarray:
    if isinstance(tokens, str):
        tokens = tokens.split()
    tokens = list(tokens)
    if not tokens:
        raise EmbeddingError("cannot embed an empty token list")
    v = np.zeros(text_dim)
    for t in tokens:
        v[token_bucket(t, text_dim)] += 1.0
    return v


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch {a.shape} vs {b.shape}")
    a, b = _rescale(a), _rescale(b)
    na2, nb2 = float(np.dot(a, a)), float(np.dot(b, b))
    if na2 == 0.0 or nb2 == 0.0:
        raise EmbeddingError("cosine of a zero vector is undefined")
    # one square root of the product keeps integer-valued inputs exact
    return float(np.clip(np.dot(a, b) / np.sqrt(na2 * nb2), -1.0, 1.0))


def _rescale(v):
    # squared norms under- or overflow for extreme magnitudes; ordinary inputs pass through untouched
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0 or 1e-50 < m < 1e50:
        return v
    return v / m


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = "onehot_builtin"
    remote_endpoint: Optional[str] = None
    text_dim: int = DEFAULT_TEXT_DIM
    timeout: float = 2.0
    retries: int = 1

    def __post_init__(self):
        if self.mode not in ("onehot_builtin", "remote"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.mode == "remote" and not self.remote_endpoint:
            raise ValueError("remote mode requires remote_endpoint")
        if self.text_dim < 1:
            raise ValueError("text_dim must be positive")


class EmbeddingProvider:
    """Front for node/text embeddings.

    In ``remote`` mode vectors come from an encoder service speaking
    ``POST {"kind": "node"|"text", "payload": ...} -> {"vector": [...]}``.
    Responses are cached by request; any service failure falls back to the
    built-in embedding for that request and is logged.
    """

    def __init__(self, config: Optional[ProviderConfig] = None, vocab: Optional[Vocabulary] = None):
        self.config = config or ProviderConfig()
        self.vocab = vocab or default_vocab()
        self._cache = {}
        self._memo = {}
        self._lock = threading.Lock()

    def node(self, category: str, state: str) -> np.ndarray:
        if self.config.mode == "remote":
            self.vocab.check_node(category, state)
            got = self._remote("node", {"category": category, "state": state})
            if got is not None:
                return got
        return self._local(("node", category, state), lambda: embed_node(category, state, self.vocab))

    def text(self, tokens: Sequence[str]) -> np.ndarray:
        tokens = tokens.split() if isinstance(tokens, str) else list(tokens)
        if not tokens:
            raise EmbeddingError("cannot embed an empty token list")
        if self.config.mode == "remote":
            got = self._remote("text", tokens)
            if got is not None:
                return got
        return self._local(("text",) + tuple(tokens), lambda: embed_text(tokens, self.config.text_dim))

    def _local(self, key, make) -> np.ndarray:
        vec = self._memo.get(key)
        if vec is None:
            vec = make()
            vec.setflags(write=False)
            self._memo[key] = vec
        return vec

    def _remote(self, kind: str, payload) -> Optional[np.ndarray]:
        body = json.dumps({"kind": kind, "payload": payload}, sort_keys=True)
        with self._lock:
            if body in self._cache:
                return self._cache[body]
        try:
            vec = self._post(body)
        except EmbeddingServiceError as exc:
            log.warning("encoder service failed (%s); using built-in %s embedding", exc, kind)
            return None
        with self._lock:
            self._cache[body] = vec
        return vec

    def _post(self, body: str) -> np.ndarray:
        last = None
        for _ in range(self.config.retries + 1):
            req = urllib.request.Request(
                self.config.remote_endpoint, data=body.encode(),
                headers={"Content-Type": "application/json"}, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                    vec = np.asarray(json.loads(resp.read())["vector"], dtype=float)
            except (OSError, ValueError, KeyError, TypeError) as exc:
                last = exc
                continue
            if vec.ndim != 1 or not np.all(np.isfinite(vec)) or not np.any(vec):
                last = ValueError("encoder returned an unusable vector")
                continue
            return vec
        raise EmbeddingServiceError(str(last))


_BUILTIN = EmbeddingProvider()


def builtin_provider() -> EmbeddingProvider:
    return _BUILTIN


__all__ = [
    "EmbeddingError", "EmbeddingProvider", "EmbeddingServiceError", "ProviderConfig",
    "VocabularyError", "builtin_provider", "cosine", "embed_node", "embed_text", "token_bucket",
]

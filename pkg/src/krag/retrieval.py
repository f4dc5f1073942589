"""Hybrid retrieval over knowledge points: BM25 lexical scoring fused with
deterministic trigram-hash embeddings, plus structural graph similarity.

The builtin embedder is a seeded-hash character-trigram bag projected onto a
fixed dimension: zero dependencies, bitwise deterministic, adequate at desk
scale. An external embedding service can be swapped in behind the same
interface via environment variables.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from hashlib import blake2b
from typing import Mapping, Protocol

from krag.errors import KragError
from krag.knowledge import KnowledgeStore
from krag.model import InferenceGraph

DEFAULT_DIM = 256
DEFAULT_ALPHA = 0.5
BM25_K1 = 1.2
BM25_B = 0.75

EMBED_ENDPOINT_VAR = "KRAG_EMBED_ENDPOINT"
EMBED_API_KEY_VAR = "KRAG_EMBED_API_KEY"


class DimensionMismatchError(KragError):
    pass


class ExternalEmbedderUnavailableError(KragError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics; no stemming."""
    out: list[str] = []
    word: list[str] = []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


def _trigrams(text: str) -> list[str]:
    # Per-token trigrams keep the bag insensitive to word order.
    grams: list[str] = []
    for tok in tokenize(text):
        if len(tok) < 3:
            grams.append(tok)
        else:
            grams.extend(tok[i : i + 3] for i in range(len(tok) - 2))
    return grams


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    @property
    def is_empty(self) -> bool:
        return all(v == 0.0 for v in self.values)


def cosine(a: Embedding, b: Embedding) -> float:
    if len(a.values) != len(b.values):
        raise DimensionMismatchError(f"vector dims differ: {len(a.values)} vs {len(b.values)}")
    na, nb = a.norm, b.norm
    if na == 0.0 or nb == 0.0:
        return 0.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return dot / (na * nb)


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> Embedding: ...


@dataclass(frozen=True)
class TrigramHashEmbedder:
    """Signed feature hashing of the character-trigram bag."""

    dim: int = DEFAULT_DIM
    seed: int = 7

    def embed(self, text: str) -> Embedding:
        values = [0.0] * self.dim
        key = self.seed.to_bytes(8, "big")
        for gram in _trigrams(text):
            digest = blake2b(gram.encode("utf-8"), digest_size=9, key=key).digest()
            index = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            values[index] += sign
        return Embedding(tuple(values))


@dataclass(frozen=True)
class ExternalEmbedder:
    """POSTs {"texts": [...]} and expects {"vectors": [[...], ...]} back."""

    endpoint: str
    dim: int = DEFAULT_DIM
    api_key: str | None = None
    timeout: float = 30.0

    def embed(self, text: str) -> Embedding:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(
                self.endpoint, json={"texts": [text]}, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            vector = response.json()["vectors"][0]
        except Exception as exc:
            raise ExternalEmbedderUnavailableError(str(exc)) from exc
        if len(vector) != self.dim:
            raise DimensionMismatchError(
                f"external embedder returned dim {len(vector)}, expected {self.dim}"
            )
        return Embedding(tuple(float(v) for v in vector))


def embedder_from_env(dim: int = DEFAULT_DIM) -> Embedder:
    endpoint = os.environ.get(EMBED_ENDPOINT_VAR)
    if endpoint:
        return ExternalEmbedder(endpoint, dim, os.environ.get(EMBED_API_KEY_VAR))
    return TrigramHashEmbedder(dim)


def embed(text: str, embedder: Embedder) -> Embedding:
    """Fixed-dimension embedding; the builtin embedder is deterministic."""
    return embedder.embed(text)


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RetrievalConfig:
    dim: int = DEFAULT_DIM
    backend: str = "builtin"  # builtin | external
    alpha: float = DEFAULT_ALPHA
    k1: float = BM25_K1
    b: float = BM25_B

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise KragError(f"fusion.alpha must be in [0, 1], got {self.alpha}")
        if self.backend not in ("builtin", "external"):
            raise KragError(f"embedding.backend must be builtin|external, got {self.backend!r}")


@dataclass(frozen=True)
class RetrievalIndex:
    """Immutable after build; concurrent retrieves are safe."""

    doc_ids: tuple[str, ...]
    term_freqs: Mapping[str, Mapping[str, int]]  # doc id -> term -> tf
    doc_freqs: Mapping[str, int]  # term -> number of docs containing it
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    vectors: Mapping[str, Embedding]
    dim: int
    config: RetrievalConfig = field(default_factory=RetrievalConfig)
    embedder: Embedder = field(default_factory=TrigramHashEmbedder)

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)


@dataclass(frozen=True)
class RankedHit:
    point_id: str
    score: float
    lexical_score: float
    vector_score: float


def _document_text(store: KnowledgeStore, point_id: str) -> str:
    point = store.points[point_id]
    return " ".join([point.query, *(a.body for a in point.related_articles)])


def build_index(store: KnowledgeStore, config: RetrievalConfig | None = None,
                embedder: Embedder | None = None) -> RetrievalIndex:
    """Index every point over its query plus article bodies; deterministic."""
    config = config or RetrievalConfig()
    if embedder is None:
        embedder = (
            embedder_from_env(config.dim)
            if config.backend == "external"
            else TrigramHashEmbedder(config.dim)
        )
    doc_ids = tuple(sorted(store.points))
    term_freqs: dict[str, dict[str, int]] = {}
    doc_freqs: dict[str, int] = {}
    doc_lengths: dict[str, int] = {}
    vectors: dict[str, Embedding] = {}
    for did in doc_ids:
        text = _document_text(store, did)
        tokens = tokenize(text)
        freqs: dict[str, int] = {}
        for tok in tokens:
            freqs[tok] = freqs.get(tok, 0) + 1
        term_freqs[did] = freqs
        doc_lengths[did] = len(tokens)
        for term in freqs:
            doc_freqs[term] = doc_freqs.get(term, 0) + 1
        vector = embedder.embed(text)
        if len(vector.values) != config.dim:
            raise DimensionMismatchError(
                f"embedder produced dim {len(vector.values)}, index expects {config.dim}"
            )
        vectors[did] = vector
    avg = (sum(doc_lengths.values()) / len(doc_ids)) if doc_ids else 0.0
    return RetrievalIndex(
        doc_ids, term_freqs, doc_freqs, doc_lengths, avg, vectors, config.dim, config, embedder
    )


def bm25_score(index: RetrievalIndex, query_terms: list[str], doc_id: str) -> float:
    """Okapi BM25 with non-negative idf: idf = ln(1 + (N - df + 0.5)/(df + 0.5))."""
    freqs = index.term_freqs[doc_id]
    length = index.doc_lengths[doc_id]
    k1, b = index.config.k1, index.config.b
    n = index.doc_count
    score = 0.0
    for term in sorted(set(query_terms)):
        tf = freqs.get(term, 0)
        if tf == 0:
            continue
        df = index.doc_freqs.get(term, 0)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        denom = tf + k1 * (1.0 - b + b * (length / index.avg_doc_length))
        score += idf * (tf * (k1 + 1.0)) / denom
    return score


def retrieve(query: str, index: RetrievalIndex, k: int,
             query_embedding: Embedding | None = None) -> list[RankedHit]:
    """Top-k hits by fused score, descending; ties broken by point id.

    lexical_score is min-max-normalized BM25 over the whole index for this
    query (all-equal scores collapse to 1.0 when positive, else 0.0);
    vector_score is (cosine + 1) / 2.
    """
    if k < 1:
        raise KragError(f"k must be >= 1, got {k}")
    if not index.doc_ids:
        return []
    terms = tokenize(query)
    raw = {did: bm25_score(index, terms, did) for did in index.doc_ids}
    lo, hi = min(raw.values()), max(raw.values())
    if hi > lo:
        lexical = {did: (s - lo) / (hi - lo) for did, s in raw.items()}
    else:
        lexical = {did: (1.0 if hi > 0.0 else 0.0) for did in raw}
    qvec = query_embedding if query_embedding is not None else index.embedder.embed(query)
    alpha = index.config.alpha
    hits = []
    for did in index.doc_ids:
        vector = (cosine(qvec, index.vectors[did]) + 1.0) / 2.0
        fused = alpha * lexical[did] + (1.0 - alpha) * vector
        hits.append(RankedHit(did, fused, lexical[did], vector))
    hits.sort(key=lambda h: (-h.score, h.point_id))
    return hits[:k]


# ---------------------------------------------------------------------------
# Structural similarity
# ---------------------------------------------------------------------------


def _node_keys(graph: InferenceGraph) -> set[tuple[str, str]]:
    return {(n.label, n.kind.value) for n in graph.nodes}


def _edge_keys(graph: InferenceGraph) -> set[tuple[tuple[str, str], tuple[str, str]]]:
    keys = set()
    for e in graph.edges:
        src = graph.node_by_id[e.src]
        dst = graph.node_by_id[e.dst]
        keys.add(((src.label, src.kind.value), (dst.label, dst.kind.value)))
    return keys


def graph_similarity(a: InferenceGraph, b: InferenceGraph) -> float:
    """Average of node-set and edge-set Jaccard over kind-qualified labels.

    Conventions: two empty graphs are identical (1.0); empty versus nonempty
    is 0.0; disjoint node label sets score 0.0; two edgeless graphs agree
    vacuously on edges. Symmetric, and 1.0 exactly when canonical forms match.
    """
    if a.is_empty and b.is_empty:
        return 1.0
    if a.is_empty or b.is_empty:
        return 0.0
    nodes_a, nodes_b = _node_keys(a), _node_keys(b)
    node_union = nodes_a | nodes_b
    node_jaccard = len(nodes_a & nodes_b) / len(node_union)
    if node_jaccard == 0.0:
        return 0.0
    edges_a, edges_b = _edge_keys(a), _edge_keys(b)
    edge_union = edges_a | edges_b
    edge_jaccard = 1.0 if not edge_union else len(edges_a & edges_b) / len(edge_union)
    return (node_jaccard + edge_jaccard) / 2.0

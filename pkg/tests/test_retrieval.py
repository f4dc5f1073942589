from __future__ import annotations

import math
import re

import pytest

from krag.knowledge import Article, KnowledgePoint, build_store
from krag.model import Edge, InferenceGraph, Node, NodeKind, node_id
from krag.retrieval import (
    RetrievalConfig,
    TrigramHashEmbedder,
    bm25_score,
    build_index,
    cosine,
    embed,
    graph_similarity,
    retrieve,
    tokenize,
)

C = NodeKind.CONDITION
E = NodeKind.EXCEPTION


def _leaf_graph(*labels: str) -> InferenceGraph:
    return InferenceGraph.build(
        [Node(node_id(l, C), l, C, True) for l in labels], []
    )


def _mini_point(pid: str, query: str, body: str) -> KnowledgePoint:
    return KnowledgePoint(
        pid, query, (Article(f"{pid}-1", "t", body),), _leaf_graph(pid), "[[holds]]y[[fails]]n[[end]]"
    )


@pytest.fixture(scope="module")
def mini_store():
    return build_store(
        [
            _mini_point("alpha", "sales contract refund dispute", "goods delivery obligations"),
            _mini_point("beta", "employment dismissal notice", "severance wage entitlements"),
            _mini_point("gamma", "tenancy deposit return", "landlord repair duties"),
        ]
    )


@pytest.fixture(scope="module")
def mini_index(mini_store):
    return build_index(mini_store)


class TestEmbedder:
    def test_empty_text_zero_vector(self):
        vec = embed("", TrigramHashEmbedder())
        assert vec.is_empty
        assert vec.norm == 0.0

    def test_bitwise_determinism(self):
        e = TrigramHashEmbedder()
        assert e.embed("sales contract refund") == e.embed("sales contract refund")

    def test_word_order_insensitive_cosine(self):
        e = TrigramHashEmbedder()
        a = e.embed("sales contract refund")
        b = e.embed("contract refund sales")
        assert abs(cosine(a, b) - 1.0) <= 1e-9

    def test_different_text_not_identical(self):
        e = TrigramHashEmbedder()
        assert cosine(e.embed("sales contract"), e.embed("criminal appeal")) < 1.0

    def test_dimension_configurable(self):
        assert len(TrigramHashEmbedder(dim=32).embed("abc").values) == 32


class TestIndex:
    def test_empty_store_empty_results(self):
        from krag.knowledge import KnowledgeStore

        index = build_index(KnowledgeStore.empty())
        assert index.doc_count == 0
        assert retrieve("anything", index, 5) == []

    def test_doc_count(self, mini_index):
        assert mini_index.doc_count == 3

    def test_rebuild_is_identical(self, mini_store, mini_index):
        rebuilt = build_index(mini_store)
        assert rebuilt == mini_index

    def test_lexical_statistics_recount(self, mini_store, mini_index):
        # invariant: stats recomputable from the indexed texts
        for pid, point in mini_store.points.items():
            text = " ".join([point.query, *(a.body for a in point.related_articles)])
            tokens = tokenize(text)
            assert mini_index.doc_lengths[pid] == len(tokens)
            for term in set(tokens):
                assert mini_index.term_freqs[pid][term] == tokens.count(term)

    def test_adding_a_document_leaves_other_term_freqs_alone(self):
        two = build_store(
            [
                _mini_point("alpha", "sales contract refund dispute", "goods delivery obligations"),
                _mini_point("beta", "employment dismissal notice", "severance wage entitlements"),
            ]
        )
        three = build_store(
            [
                _mini_point("alpha", "sales contract refund dispute", "goods delivery obligations"),
                _mini_point("beta", "employment dismissal notice", "severance wage entitlements"),
                _mini_point("gamma", "tenancy deposit return", "landlord repair duties"),
            ]
        )
        small, large = build_index(two), build_index(three)
        for pid in ("alpha", "beta"):
            assert small.term_freqs[pid] == large.term_freqs[pid]
            assert small.doc_lengths[pid] == large.doc_lengths[pid]


def _independent_bm25(docs: dict[str, str], query: str, doc_id: str,
                      k1: float = 1.2, b: float = 0.75) -> float:
    """Hand computation sharing nothing with the engine implementation."""
    split = {d: re.findall(r"[a-z0-9]+", text.lower()) for d, text in docs.items()}
    n_docs = len(docs)
    avgdl = sum(len(words) for words in split.values()) / n_docs
    words = split[doc_id]
    total = 0.0
    for term in sorted(set(re.findall(r"[a-z0-9]+", query.lower()))):
        tf = words.count(term)
        if tf == 0:
            continue
        df = sum(1 for other in split.values() if term in other)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len(words) / avgdl))
    return total


class TestBm25:
    def test_matches_independent_computation(self, mini_store, mini_index):
        docs = {
            pid: " ".join([p.query, *(a.body for a in p.related_articles)])
            for pid, p in mini_store.points.items()
        }
        for query in ("sales contract refund dispute", "landlord repair", "wage notice refund"):
            terms = tokenize(query)
            for pid in docs:
                engine = bm25_score(mini_index, terms, pid)
                expected = _independent_bm25(docs, query, pid)
                assert abs(engine - expected) <= 1e-9, (query, pid)

    def test_no_shared_terms_scores_zero(self, mini_index):
        assert all(
            bm25_score(mini_index, tokenize("zzz qqq"), pid) == 0.0
            for pid in mini_index.doc_ids
        )


class TestRetrieve:
    def test_exact_match_rank_one_all_alphas(self, mini_store):
        for alpha in (0.0, 0.5, 1.0):
            index = build_index(mini_store, RetrievalConfig(alpha=alpha))
            hits = retrieve("sales contract refund dispute", index, 3)
            assert hits[0].point_id == "alpha", f"alpha={alpha}"

    def test_k_larger_than_store_returns_all(self, mini_index):
        assert len(retrieve("sales", mini_index, 10)) == 3

    def test_unrelated_query_zero_lexical_ordering_by_vector(self, mini_index):
        hits = retrieve("zzzz yyyy xxxx", mini_index, 3)
        assert all(h.lexical_score == 0.0 for h in hits)
        ordered = sorted(hits, key=lambda h: (-h.vector_score, h.point_id))
        assert [h.point_id for h in hits] == [h.point_id for h in ordered]

    def test_repeated_calls_identical(self, mini_index):
        first = retrieve("contract refund", mini_index, 3)
        for _ in range(5):
            assert retrieve("contract refund", mini_index, 3) == first

    def test_score_is_configured_fusion(self, mini_store):
        index = build_index(mini_store, RetrievalConfig(alpha=0.25))
        for hit in retrieve("sales contract", index, 3):
            assert abs(hit.score - (0.25 * hit.lexical_score + 0.75 * hit.vector_score)) <= 1e-12

    def test_alpha_one_is_pure_lexical_rank(self, mini_store):
        index = build_index(mini_store, RetrievalConfig(alpha=1.0))
        hits = retrieve("sales contract refund dispute", index, 3)
        assert [h.score for h in hits] == [h.lexical_score for h in hits]

    def test_alpha_zero_is_pure_vector_rank(self, mini_store):
        index = build_index(mini_store, RetrievalConfig(alpha=0.0))
        hits = retrieve("tenancy deposit return", index, 3)
        assert [h.score for h in hits] == [h.vector_score for h in hits]


class TestGraphSimilarity:
    def test_identity(self, car_sale_graph):
        assert graph_similarity(car_sale_graph, car_sale_graph) == 1.0

    def test_disjoint_labels_zero(self):
        assert graph_similarity(_leaf_graph("a", "b"), _leaf_graph("x", "y")) == 0.0

    def test_hand_computed_half(self):
        g1 = InferenceGraph.build(
            [Node(node_id(l, C), l, C, l != "a") for l in "abc"],
            [Edge(node_id("a", C), node_id("b", C)), Edge(node_id("a", C), node_id("c", C))],
        )
        g2 = InferenceGraph.build(
            [Node(node_id(l, C), l, C, l != "a") for l in "abd"],
            [Edge(node_id("a", C), node_id("b", C))],
        )
        # node jaccard 2/4, edge jaccard 1/2
        assert graph_similarity(g1, g2) == 0.5

    def test_empty_conventions(self):
        empty = InferenceGraph.empty()
        assert graph_similarity(empty, empty) == 1.0
        assert graph_similarity(empty, _leaf_graph("a")) == 0.0

    def test_symmetry(self, car_sale_graph, refund_due_graph):
        assert graph_similarity(car_sale_graph, refund_due_graph) == graph_similarity(
            refund_due_graph, car_sale_graph
        )

    def test_one_iff_canonical_equality(self, car_sale_graph, refund_due_graph):
        assert graph_similarity(car_sale_graph, refund_due_graph) < 1.0
        renamed_ids = InferenceGraph.build(
            [Node("other_" + n.id, n.label, n.kind, n.is_ultimate) for n in car_sale_graph.nodes],
            [Edge("other_" + e.src, "other_" + e.dst) for e in car_sale_graph.edges],
        )
        assert graph_similarity(car_sale_graph, renamed_ids) == 1.0

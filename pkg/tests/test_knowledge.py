from __future__ import annotations

import itertools
import random

import pytest

from krag.dsl import parse_statements
from krag.inference import compile_statements
from krag.knowledge import (
    Article,
    DuplicateIdError,
    KnowledgePoint,
    KnowledgeStore,
    SchemaViolationError,
    UnsupportedVersionError,
    add_knowledge,
    build_store,
    detect_cycles,
    load_store,
    mark_verified,
    save_store,
    store_from_json,
    store_to_json,
    unify_graphs,
)
from krag.model import Edge, InferenceGraph, Node, NodeKind, node_id

C = NodeKind.CONDITION
E = NodeKind.EXCEPTION


def _graph(*edges: tuple[str, str], exceptions: set[str] = frozenset()) -> InferenceGraph:
    """Condition-node graph from label pairs; selected labels become exceptions."""
    labels = {label for pair in edges for label in pair}
    sources = {src for src, _ in edges}
    def kind(label):
        return E if label in exceptions else C
    nodes = [Node(node_id(l, kind(l)), l, kind(l), l not in sources) for l in sorted(labels)]
    es = [Edge(node_id(s, kind(s)), node_id(d, kind(d))) for s, d in edges]
    return InferenceGraph.build(nodes, es)


def _single(label: str) -> InferenceGraph:
    return InferenceGraph.build([Node(node_id(label, C), label, C, True)], [])


def _point(pid: str, rules: str, query: str | None = None) -> KnowledgePoint:
    graph = compile_statements(parse_statements(rules))
    return KnowledgePoint(
        pid,
        query or f"question about {pid}",
        (Article(f"{pid}-art", f"{pid} article", f"body of {pid}"),),
        graph,
        "[[holds]]yes[[fails]]no[[end]]",
    )


POINT_A_RULES = """
scenario { party buyer proponent party seller opponent party court judge }
statement claim_a proponent buyer { requires: contract_formed, delivery_missed; except: grace_period; }
"""

POINT_B_RULES = """
scenario { party buyer proponent party seller opponent party court judge }
statement claim_b proponent buyer { requires: contract_formed, price_paid; }
"""


class TestUnify:
    def test_identity_with_empty(self):
        g = _graph(("a", "b"))
        assert unify_graphs(g, InferenceGraph.empty()) == g

    def test_idempotence(self):
        g = _graph(("a", "b"), ("a", "c"))
        merged = unify_graphs(g, g)
        assert len(merged.nodes) == len(g.nodes)
        assert len(merged.edges) == len(g.edges)

    def test_disjoint_union(self):
        g1 = _graph(("a", "b"), ("a", "c"))
        g2 = _graph(("x", "y"))
        merged = unify_graphs(g1, g2)
        assert len(merged.nodes) == 5
        assert len(merged.edges) == 3

    def test_shared_node_counted_once(self):
        # 4 nodes and 3 nodes sharing one label -> 6
        g1 = _graph(("r", "contract_formed"), ("r", "s"), ("r", "t"))
        g2 = _graph(("q", "contract_formed"), ("q", "u"))
        assert len(unify_graphs(g1, g2).nodes) == 4 + 3 - 1

    def test_kind_conflict_keeps_both_nodes(self):
        g1 = _graph(("a", "x"))
        g2 = _graph(("b", "x"), exceptions={"x"})
        merged = unify_graphs(g1, g2)
        labels = [(n.label, n.kind) for n in merged.nodes]
        assert ("x", C) in labels and ("x", E) in labels

    def test_commutative_and_associative_canonical_form(self):
        rng = random.Random(7)
        labels = list("abcdef")
        def random_graph():
            edges = set()
            for _ in range(rng.randint(1, 6)):
                s, d = rng.sample(labels, 2)
                edges.add((s, d))
            return _graph(*edges)
        for _ in range(50):
            g1, g2, g3 = random_graph(), random_graph(), random_graph()
            assert unify_graphs(g1, g2) == unify_graphs(g2, g1)
            assert unify_graphs(unify_graphs(g1, g2), g3) == unify_graphs(
                g1, unify_graphs(g2, g3)
            )


class TestDetectCycles:
    def test_two_cycle(self):
        g = _graph(("c1", "c2"), ("c2", "c1"))
        assert detect_cycles(g) == [["c_c1", "c_c2"]]

    def test_tree_has_no_cycles(self):
        g = _graph(("a", "b"), ("a", "c"), ("b", "d"))
        assert detect_cycles(g) == []

    def test_triangle_with_tail(self):
        g = _graph(("a", "b"), ("b", "c"), ("c", "a"), ("c", "d"))
        assert detect_cycles(g) == [["c_a", "c_b", "c_c"]]

    def test_rotation_starts_at_smallest(self):
        g = _graph(("m", "z"), ("z", "b"), ("b", "m"))
        assert detect_cycles(g) == [["c_b", "c_m", "c_z"]]

    def test_stable_under_insertion_order(self):
        edges = [("a", "b"), ("b", "a"), ("b", "c"), ("c", "b")]
        for perm in itertools.permutations(edges):
            assert detect_cycles(_graph(*perm)) == [["c_a", "c_b"], ["c_b", "c_c"]]

    def test_witness_mode_finds_scc_cycles(self):
        g = _graph(("a", "b"), ("b", "a"), ("x", "y"))
        witnesses = detect_cycles(g, full_limit=1)
        assert witnesses == [["c_a", "c_b"]]


class TestAddKnowledge:
    def test_insert_into_empty(self):
        point = _point("p1", POINT_A_RULES)
        store = add_knowledge(point, KnowledgeStore.empty())
        assert list(store.points) == ["p1"]
        assert {n.label for n in store.unified_graph.nodes} == {
            n.label for n in point.graph.nodes
        }

    def test_shared_label_merges(self):
        store = build_store([_point("p1", POINT_A_RULES), _point("p2", POINT_B_RULES)])
        a, b = store.points["p1"].graph, store.points["p2"].graph
        assert len(store.unified_graph.nodes) == len(a.nodes) + len(b.nodes) - 1

    def test_duplicate_id_rejected(self):
        store = build_store([_point("p1", POINT_A_RULES)])
        with pytest.raises(DuplicateIdError):
            add_knowledge(_point("p1", POINT_B_RULES), store)

    def test_cycle_closing_insert_flags(self):
        p1 = KnowledgePoint(
            "p1", "q1", (), _graph(("a", "b")), "t"
        )
        p2 = KnowledgePoint(
            "p2", "q2", (), _graph(("b", "a")), "t"
        )
        store = build_store([p1, p2])
        kinds = [f.kind for f in store.debug_flags]
        assert "cycle" in kinds
        cycle_flag = next(f for f in store.debug_flags if f.kind == "cycle")
        assert cycle_flag.subject == ("c_a", "c_b")
        assert cycle_flag.source_point_ids == ("p2",)

    def test_insertion_order_invariant_unified_graph(self, store):
        reference = store.unified_graph
        for perm in itertools.permutations(store.points.values()):
            unified = build_store(list(perm)).unified_graph
            assert unified.nodes == reference.nodes
            assert unified.edges == reference.edges
            assert unified.statements == reference.statements


class TestPersistence:
    def test_round_trip_three_point_store(self, store, tmp_path):
        path = tmp_path / "store.json"
        save_store(store, str(path))
        loaded = load_store(str(path))
        assert loaded == store

    def test_saves_byte_reproducible(self, store, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_store(store, str(a))
        save_store(load_store(str(a)), str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_missing_query_field(self):
        doc = store_to_json(build_store([_point("p1", POINT_A_RULES)]))
        broken = doc.replace('"query": "question about p1",\n', "")
        with pytest.raises(SchemaViolationError) as exc:
            store_from_json(broken)
        assert "query" in exc.value.field

    def test_empty_store_round_trips(self, tmp_path):
        path = tmp_path / "empty.json"
        save_store(KnowledgeStore.empty(), str(path))
        assert load_store(str(path)).is_empty

    def test_unsupported_version(self):
        with pytest.raises(UnsupportedVersionError):
            store_from_json('{"version": 99, "points": []}')

    def test_verified_flag_survives(self, tmp_path):
        store = build_store([_point("p1", POINT_A_RULES)])
        assert not store.points["p1"].verified
        store = mark_verified(store, "p1")
        path = tmp_path / "v.json"
        save_store(store, str(path))
        assert load_store(str(path)).points["p1"].verified

"""Knowledge points, store-level graph unification, cycle debugging, persistence.

A knowledge point pairs a user-facing query with its related articles and the
pattern graph compiled from its statements. Insertion unifies the point's
graph into the store-wide graph and records debug flags (cycles, kind
conflicts, ambiguous burdens) without ever vetoing the insert: debugging is
a signal for a human, not an error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from krag.dsl import StatementSet
from krag.errors import KragError
from krag.inference import CyclicRulesError, analyze_burdens
from krag.model import (
    Edge,
    InferenceGraph,
    Node,
    NodeKind,
    Party,
    Role,
    Scenario,
    Statement,
    Violation,
    node_id,
    validate_graph,
)

STORE_VERSION = 1


class DuplicateIdError(KragError):
    pass


class InvalidKnowledgePointError(KragError):
    def __init__(self, point_id: str, violations: list[Violation] | str):
        detail = violations if isinstance(violations, str) else "; ".join(
            f"{v.code}({v.subject})" for v in violations
        )
        super().__init__(f"knowledge point {point_id!r}: {detail}")


class StoreIoError(KragError):
    pass


class SchemaViolationError(KragError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"store schema violation at {field_name!r}: {reason}")
        self.field = field_name
        self.reason = reason


class UnsupportedVersionError(KragError):
    pass


@dataclass(frozen=True)
class Article:
    article_id: str
    title: str
    body: str


@dataclass(frozen=True)
class KnowledgePoint:
    id: str
    query: str
    related_articles: tuple[Article, ...]
    graph: InferenceGraph
    answer_template: str
    verified: bool = False
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise InvalidKnowledgePointError(self.id, "query is empty")
        violations = validate_graph(self.graph)
        if violations:
            raise InvalidKnowledgePointError(self.id, violations)

    def article_ids(self) -> tuple[str, ...]:
        return tuple(a.article_id for a in self.related_articles)


@dataclass(frozen=True)
class DebugFlag:
    """A recorded contradiction signal; never auto-repaired."""

    kind: str  # "cycle" | "kind_conflict" | "ambiguous_burden"
    subject: tuple[str, ...]  # cycle path, or the conflicting label
    source_point_ids: tuple[str, ...]


@dataclass(frozen=True)
class KnowledgeStore:
    points: Mapping[str, KnowledgePoint] = field(default_factory=dict)
    unified_graph: InferenceGraph = field(default_factory=InferenceGraph.empty)
    debug_flags: tuple[DebugFlag, ...] = ()

    @classmethod
    def empty(cls) -> "KnowledgeStore":
        return cls()

    @property
    def is_empty(self) -> bool:
        return not self.points

    def point(self, point_id: str) -> KnowledgePoint | None:
        return self.points.get(point_id)


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------


def _kind_conflicts(a: InferenceGraph, b: InferenceGraph) -> tuple[str, ...]:
    """Labels whose kind sets on the two sides are nonempty and disjoint.

    A label carrying both kinds inside one source graph is a deliberate
    defined-exception pattern, not a conflict.
    """
    kinds_a: dict[str, set[NodeKind]] = {}
    kinds_b: dict[str, set[NodeKind]] = {}
    for n in a.nodes:
        kinds_a.setdefault(n.label, set()).add(n.kind)
    for n in b.nodes:
        kinds_b.setdefault(n.label, set()).add(n.kind)
    conflicted = [
        label
        for label in kinds_a.keys() & kinds_b.keys()
        if not (kinds_a[label] & kinds_b[label])
    ]
    return tuple(sorted(conflicted))


def unify_graphs(a: InferenceGraph, b: InferenceGraph) -> InferenceGraph:
    """Merge nodes by (canonical label, kind) and union the edges.

    Node ids in the result are the deterministic ``node_id(label, kind)``
    form, so unification is commutative and associative up to node-id
    renaming. A label appearing as CONDITION on one side and EXCEPTION on
    the other is kept as two nodes (see :func:`unify_flags`).
    """
    node_keys: set[tuple[str, NodeKind]] = set()
    edge_keys: set[tuple[str, str]] = set()
    for g in (a, b):
        for n in g.nodes:
            node_keys.add((n.label, n.kind))
        for e in g.edges:
            src = g.node_by_id[e.src]
            dst = g.node_by_id[e.dst]
            edge_keys.add((node_id(src.label, src.kind), node_id(dst.label, dst.kind)))

    out_degree: dict[str, int] = {}
    for src, _ in edge_keys:
        out_degree[src] = out_degree.get(src, 0) + 1
    nodes = [
        Node(node_id(label, kind), label, kind, out_degree.get(node_id(label, kind), 0) == 0)
        for label, kind in node_keys
    ]
    edges = [Edge(src, dst) for src, dst in edge_keys]
    statements = tuple(sorted(
        set(a.statements) | set(b.statements),
        key=lambda s: (s.head, s.requires, s.exceptions, s.proponent),
    ))
    return InferenceGraph.build(nodes, edges, statements, a.scenario or b.scenario)


def unify_flags(a: InferenceGraph, b: InferenceGraph, sources: tuple[str, ...] = ()) -> tuple[DebugFlag, ...]:
    """Kind-conflict flags the merge of ``a`` and ``b`` would carry."""
    return tuple(
        DebugFlag("kind_conflict", (label,), sources) for label in _kind_conflicts(a, b)
    )


# ---------------------------------------------------------------------------
# Cycle detection
# ---------------------------------------------------------------------------

FULL_ENUMERATION_LIMIT = 10_000


def detect_cycles(graph: InferenceGraph, full_limit: int = FULL_ENUMERATION_LIMIT) -> list[list[str]]:
    """Every elementary cycle, each rotated so its smallest node id leads,
    sorted; the empty list exactly when the graph is a DAG.

    Elementary-cycle enumeration is exponential in the worst case, so graphs
    beyond ``full_limit`` nodes report one witness cycle per strongly
    connected component instead.
    """
    adj = {nid: tuple(sorted(targets)) for nid, targets in graph.out_edges.items()}
    if len(adj) > full_limit:
        return _witness_cycles(adj)
    cycles: list[list[str]] = []
    for start in sorted(adj):
        # DFS restricted to ids >= start finds each cycle exactly once,
        # already rotated to begin at its smallest member.
        path = [start]
        on_path = {start}
        iters = [iter(adj[start])]
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                iters.pop()
                on_path.discard(path.pop())
                continue
            if nxt == start:
                cycles.append(path.copy())
            elif nxt > start and nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                iters.append(iter(adj[nxt]))
    cycles.sort()
    return cycles


def _witness_cycles(adj: Mapping[str, tuple[str, ...]]) -> list[list[str]]:
    """One cycle per nontrivial strongly connected component (Tarjan)."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    sccs: list[list[str]] = []

    def strongconnect(root: str) -> None:
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                component = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    component.append(w)
                    if w == v:
                        break
                if len(component) > 1:
                    sccs.append(component)

    for nid in sorted(adj):
        if nid not in index:
            strongconnect(nid)

    witnesses: list[list[str]] = []
    for component in sccs:
        members = set(component)
        start = min(component)
        # first cycle through the smallest member, found by DFS inside the SCC
        path = [start]
        on_path = {start}
        iters = [iter(sorted(t for t in adj[start] if t in members))]
        found: list[str] | None = None
        while iters and found is None:
            nxt = next(iters[-1], None)
            if nxt is None:
                iters.pop()
                on_path.discard(path.pop())
                continue
            if nxt == start:
                found = path.copy()
            elif nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                iters.append(iter(sorted(t for t in adj[nxt] if t in members)))
        if found is not None:
            smallest = found.index(min(found))
            witnesses.append(found[smallest:] + found[:smallest])
    witnesses.sort()
    return witnesses


# ---------------------------------------------------------------------------
# Insertion
# ---------------------------------------------------------------------------


def _point_statement_set(point: KnowledgePoint) -> StatementSet:
    return StatementSet(point.graph.scenario, point.graph.statements)


def add_knowledge(point: KnowledgePoint, store: KnowledgeStore) -> KnowledgeStore:
    """Insert a point, extend the unified graph, append any new debug flags.

    Insertion succeeds even when flags arise; a duplicate id is the only
    rejection.
    """
    if point.id in store.points:
        raise DuplicateIdError(f"knowledge point id {point.id!r} already present")

    new_flags = []
    for label in _kind_conflicts(store.unified_graph, point.graph):
        sources = sorted(
            {point.id}
            | {p.id for p in store.points.values() if label in p.graph.labels}
        )
        new_flags.append(DebugFlag("kind_conflict", (label,), tuple(sources)))
    unified = unify_graphs(store.unified_graph, point.graph)

    for cycle in detect_cycles(unified):
        new_flags.append(DebugFlag("cycle", tuple(cycle), (point.id,)))

    if point.graph.statements and point.graph.scenario is not None:
        try:
            analysis = analyze_burdens(_point_statement_set(point))
        except CyclicRulesError:
            pass  # already surfaced as a cycle flag
        else:
            for label in sorted(analysis.ambiguities):
                new_flags.append(DebugFlag("ambiguous_burden", (label,), (point.id,)))

    flags = list(store.debug_flags)
    known = {(f.kind, f.subject) for f in flags}
    for flag in new_flags:
        if (flag.kind, flag.subject) not in known:
            flags.append(flag)
            known.add((flag.kind, flag.subject))

    points = dict(store.points)
    points[point.id] = point
    return KnowledgeStore(points, unified, tuple(flags))


def build_store(points: Iterable[KnowledgePoint]) -> KnowledgeStore:
    store = KnowledgeStore.empty()
    for point in points:
        store = add_knowledge(point, store)
    return store


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def graph_to_dict(graph: InferenceGraph) -> dict:
    doc: dict = {
        "nodes": [
            {"id": n.id, "label": n.label, "kind": n.kind.value, "is_ultimate": n.is_ultimate}
            for n in graph.nodes
        ],
        "edges": [[e.src, e.dst] for e in graph.edges],
        "statements": [
            {
                "head": s.head,
                "requires": list(s.requires),
                "except": list(s.exceptions),
                "proponent": s.proponent,
            }
            for s in graph.statements
        ],
        "parties": [
            {"id": p.id, "role": p.role.value} for p in (graph.scenario.parties if graph.scenario else ())
        ],
    }
    return doc


def _require(mapping: dict, key: str, type_: type, where: str):
    if key not in mapping:
        raise SchemaViolationError(f"{where}.{key}" if where else key, "missing field")
    value = mapping[key]
    if type_ is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif type_ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, type_)
    if not ok:
        raise SchemaViolationError(
            f"{where}.{key}" if where else key, f"expected {type_.__name__}"
        )
    return value


def graph_from_dict(doc: dict, where: str = "graph") -> InferenceGraph:
    nodes = []
    for i, nd in enumerate(_require(doc, "nodes", list, where)):
        if not isinstance(nd, dict):
            raise SchemaViolationError(f"{where}.nodes[{i}]", "expected object")
        try:
            kind = NodeKind(_require(nd, "kind", str, f"{where}.nodes[{i}]"))
        except ValueError:
            raise SchemaViolationError(f"{where}.nodes[{i}].kind", "unknown node kind") from None
        nodes.append(
            Node(
                _require(nd, "id", str, f"{where}.nodes[{i}]"),
                _require(nd, "label", str, f"{where}.nodes[{i}]"),
                kind,
                _require(nd, "is_ultimate", bool, f"{where}.nodes[{i}]"),
            )
        )
    edges = []
    for i, ed in enumerate(_require(doc, "edges", list, where)):
        if not (isinstance(ed, list) and len(ed) == 2 and all(isinstance(x, str) for x in ed)):
            raise SchemaViolationError(f"{where}.edges[{i}]", "expected [src, dst]")
        edges.append(Edge(ed[0], ed[1]))
    statements = []
    for i, sd in enumerate(_require(doc, "statements", list, where)):
        if not isinstance(sd, dict):
            raise SchemaViolationError(f"{where}.statements[{i}]", "expected object")
        statements.append(
            Statement(
                _require(sd, "head", str, f"{where}.statements[{i}]"),
                tuple(_require(sd, "requires", list, f"{where}.statements[{i}]")),
                tuple(_require(sd, "except", list, f"{where}.statements[{i}]")),
                _require(sd, "proponent", str, f"{where}.statements[{i}]"),
            )
        )
    scenario = None
    parties_doc = doc.get("parties", [])
    if parties_doc:
        parties = []
        for i, pd in enumerate(parties_doc):
            if not isinstance(pd, dict):
                raise SchemaViolationError(f"{where}.parties[{i}]", "expected object")
            try:
                role = Role(_require(pd, "role", str, f"{where}.parties[{i}]"))
            except ValueError:
                raise SchemaViolationError(f"{where}.parties[{i}].role", "unknown role") from None
            parties.append(Party(_require(pd, "id", str, f"{where}.parties[{i}]"), role))
        scenario = Scenario(tuple(parties))
    return InferenceGraph.build(nodes, edges, tuple(statements), scenario)


def point_to_dict(point: KnowledgePoint) -> dict:
    return {
        "id": point.id,
        "query": point.query,
        "related_articles": [
            {"article_id": a.article_id, "title": a.title, "body": a.body}
            for a in point.related_articles
        ],
        "graph": graph_to_dict(point.graph),
        "answer_template": point.answer_template,
        "verified": point.verified,
        "tags": list(point.tags),
    }


def point_from_dict(doc: dict, where: str = "points[]") -> KnowledgePoint:
    articles = []
    for i, ad in enumerate(_require(doc, "related_articles", list, where)):
        if not isinstance(ad, dict):
            raise SchemaViolationError(f"{where}.related_articles[{i}]", "expected object")
        articles.append(
            Article(
                _require(ad, "article_id", str, f"{where}.related_articles[{i}]"),
                _require(ad, "title", str, f"{where}.related_articles[{i}]"),
                _require(ad, "body", str, f"{where}.related_articles[{i}]"),
            )
        )
    return KnowledgePoint(
        _require(doc, "id", str, where),
        _require(doc, "query", str, where),
        tuple(articles),
        graph_from_dict(_require(doc, "graph", dict, where), f"{where}.graph"),
        _require(doc, "answer_template", str, where),
        _require(doc, "verified", bool, where),
        tuple(_require(doc, "tags", list, where)),
    )


def store_to_json(store: KnowledgeStore) -> str:
    doc = {
        "version": STORE_VERSION,
        "points": [point_to_dict(p) for p in store.points.values()],
    }
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def store_from_json(text: str) -> KnowledgeStore:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolationError("$", f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaViolationError("$", "expected a JSON object")
    version = _require(doc, "version", int, "")
    if version != STORE_VERSION:
        raise UnsupportedVersionError(f"store version {version} not supported")
    points_doc = _require(doc, "points", list, "")
    points = []
    for i, pd in enumerate(points_doc):
        if not isinstance(pd, dict):
            raise SchemaViolationError(f"points[{i}]", "expected object")
        points.append(point_from_dict(pd, f"points[{i}]"))
    return build_store(points)


def save_store(store: KnowledgeStore, path: str) -> None:
    """Write the canonical sorted-keys JSON form; saves are byte-reproducible."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(store_to_json(store))
    except OSError as exc:
        raise StoreIoError(f"cannot write store to {path}: {exc}") from exc


def load_store(path: str) -> KnowledgeStore:
    """Load a store file; debug flags are rebuilt deterministically on the way in."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise StoreIoError(f"cannot read store from {path}: {exc}") from exc
    return store_from_json(text)


def mark_verified(store: KnowledgeStore, point_id: str, verified: bool = True) -> KnowledgeStore:
    """Flip the human-review flag on one point; everything else unchanged."""
    point = store.points.get(point_id)
    if point is None:
        raise KragError(f"unknown knowledge point {point_id!r}")
    points = dict(store.points)
    points[point_id] = replace(point, verified=verified)
    return KnowledgeStore(points, store.unified_graph, store.debug_flags)

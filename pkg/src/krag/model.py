"""Shared domain types: parties, inference-graph structure, statements, verdicts.

Everything here is an immutable value object; instances can be shared freely
between threads. Graph semantics (compilation, evaluation) live in
:mod:`krag.inference`; this module owns structure and structural validation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

from krag.errors import KragError


class EmptyLabelError(KragError):
    """Label is blank after trimming and separator collapsing."""


class InvalidScenarioError(KragError):
    """Party declarations violate the one-judge / two-sides rule."""


class InvalidStatementError(KragError):
    """A statement breaks its own shape invariants."""


_SEPARATOR_RUN = re.compile(r"[\s_\-]+")


def canonicalize_label(raw: str) -> str:
    """Normalize a surface label to canonical snake_case.

    Lowercases, collapses every run of whitespace, hyphens, and underscores
    to a single underscore, and strips separators at both ends. Idempotent:
    a canonical label maps to itself.
    """
    collapsed = _SEPARATOR_RUN.sub("_", raw.strip().lower()).strip("_")
    if not collapsed:
        raise EmptyLabelError(f"label is empty after canonicalization: {raw!r}")
    return collapsed


class Role(str, Enum):
    PROPONENT = "proponent"
    OPPONENT = "opponent"
    JUDGE = "judge"


@dataclass(frozen=True)
class Party:
    id: str
    role: Role


@dataclass(frozen=True)
class Scenario:
    """Declared parties of a dispute: exactly one judge, at least one party per side."""

    parties: tuple[Party, ...]

    def __post_init__(self) -> None:
        ids = [p.id for p in self.parties]
        if len(set(ids)) != len(ids):
            raise InvalidScenarioError(f"duplicate party ids: {ids}")
        judges = [p for p in self.parties if p.role is Role.JUDGE]
        if len(judges) != 1:
            raise InvalidScenarioError(f"exactly one judge required, found {len(judges)}")
        for side in (Role.PROPONENT, Role.OPPONENT):
            if not any(p.role is side for p in self.parties):
                raise InvalidScenarioError(f"at least one {side.value} required")

    @cached_property
    def by_id(self) -> Mapping[str, Party]:
        return {p.id: p for p in self.parties}

    @property
    def judge(self) -> Party:
        return next(p for p in self.parties if p.role is Role.JUDGE)

    def party(self, party_id: str) -> Party | None:
        return self.by_id.get(party_id)

    def opposing(self, party_id: str) -> tuple[Party, ...]:
        """Parties on the adversarial side of the given party; the judge sides with no one."""
        me = self.by_id.get(party_id)
        if me is None or me.role is Role.JUDGE:
            return ()
        other = Role.OPPONENT if me.role is Role.PROPONENT else Role.PROPONENT
        return tuple(p for p in self.parties if p.role is other)

    def counterparty(self, party_id: str) -> Party:
        """First-declared adversarial party; burden flips land on this party."""
        opposing = self.opposing(party_id)
        if not opposing:
            raise InvalidScenarioError(f"no adversarial party for {party_id!r}")
        return opposing[0]


class NodeKind(str, Enum):
    CONDITION = "condition"
    EXCEPTION = "exception"


def node_id(label: str, kind: NodeKind) -> str:
    """Deterministic node id, unique per (label, kind) and safe in DOT/Mermaid."""
    return ("c_" if kind is NodeKind.CONDITION else "e_") + label


@dataclass(frozen=True)
class Node:
    id: str
    label: str
    kind: NodeKind
    is_ultimate: bool


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str


@dataclass(frozen=True)
class Statement:
    """One rule alternative: ``head`` holds when every required label holds
    and no exception label holds. Alternatives for the same head are
    disjunctive."""

    head: str
    requires: tuple[str, ...]
    exceptions: tuple[str, ...]
    proponent: str
    line: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.requires and not self.exceptions:
            raise InvalidStatementError(f"statement {self.head!r} has empty body")
        if self.head in self.requires or self.head in self.exceptions:
            raise InvalidStatementError(f"statement {self.head!r} references itself")


@dataclass(frozen=True)
class InferenceGraph:
    """Directed graph of condition/exception nodes plus the statements that
    produced it. Cycles are representable on purpose: they are a debugging
    signal, not a construction error."""

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    statements: tuple[Statement, ...] = ()
    scenario: Scenario | None = None

    @classmethod
    def build(
        cls,
        nodes: Iterable[Node],
        edges: Iterable[Edge],
        statements: Iterable[Statement] = (),
        scenario: Scenario | None = None,
    ) -> "InferenceGraph":
        """Canonical constructor: nodes sorted by id, edges by (src, dst)."""
        return cls(
            tuple(sorted(nodes, key=lambda n: n.id)),
            tuple(sorted(edges, key=lambda e: (e.src, e.dst))),
            tuple(statements),
            scenario,
        )

    @classmethod
    def empty(cls) -> "InferenceGraph":
        return cls((), ())

    @cached_property
    def node_by_id(self) -> Mapping[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def out_edges(self) -> Mapping[str, tuple[str, ...]]:
        adj: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            if e.src in adj:
                adj[e.src].append(e.dst)
        return {k: tuple(v) for k, v in adj.items()}

    @cached_property
    def roots(self) -> tuple[str, ...]:
        """Node ids with no incoming edges, ascending."""
        targets = {e.dst for e in self.edges}
        return tuple(sorted(n.id for n in self.nodes if n.id not in targets))

    @cached_property
    def statements_by_head(self) -> Mapping[str, tuple[Statement, ...]]:
        grouped: dict[str, list[Statement]] = {}
        for s in self.statements:
            grouped.setdefault(s.head, []).append(s)
        return {k: tuple(v) for k, v in grouped.items()}

    @cached_property
    def labels(self) -> frozenset[str]:
        return frozenset(n.label for n in self.nodes)

    def ultimate_facts(self) -> tuple[str, ...]:
        """Leaf propositions a party must prove: labels with no defining
        statement whose nodes all have out-degree zero."""
        defined = set(self.statements_by_head)
        leaves = set()
        for n in self.nodes:
            if n.label in defined:
                continue
            if all(not self.out_edges[m.id] for m in self.nodes if m.label == n.label):
                leaves.add(n.label)
        return tuple(sorted(leaves))

    @property
    def is_empty(self) -> bool:
        return not self.nodes


class FactStatus(str, Enum):
    ESTABLISHED = "established"
    FAILED = "failed"
    UNDISPUTED_OPEN = "undisputed_open"  # pre-evaluation only


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"


class Reason(str, Enum):
    ALL_REQUIRED_HELD = "all_required_held"
    REQUIRED_FAILED = "required_failed"
    EXCEPTION_TRIGGERED = "exception_triggered"
    BURDEN_MET = "burden_met"
    BURDEN_UNMET = "burden_unmet"
    ADMITTED = "admitted"


@dataclass(frozen=True)
class TraceStep:
    """One child consulted while deriving a node's status."""

    child: str
    status: Verdict
    reason: Reason
    reason_label: str | None = None


@dataclass(frozen=True)
class VerdictMap:
    """Per-node HOLDS/FAILS results with the derivation actually used.

    ``statuses``, ``reasons`` and ``traces`` all cover every node of the
    evaluated graph exactly once.
    """

    statuses: Mapping[str, Verdict]
    reasons: Mapping[str, tuple[Reason, str | None]]
    traces: Mapping[str, tuple[TraceStep, ...]]

    def status(self, nid: str) -> Verdict:
        return self.statuses[nid]


@dataclass(frozen=True)
class Violation:
    """One structural rule breach; violations are data, not failures."""

    code: str
    subject: str
    detail: str


def validate_graph(graph: InferenceGraph) -> list[Violation]:
    """Check every structural invariant; empty list means well-formed.

    Cycles are deliberately not checked here (see knowledge-store debugging).
    """
    report: list[Violation] = []
    seen_ids: set[str] = set()
    seen_keys: set[tuple[str, NodeKind]] = set()
    for n in graph.nodes:
        if n.id in seen_ids:
            report.append(Violation("DuplicateNodeId", n.id, "node id appears twice"))
        seen_ids.add(n.id)
        key = (n.label, n.kind)
        if key in seen_keys:
            report.append(
                Violation("DuplicateLabelKind", n.id, f"(label, kind) {key!r} appears twice")
            )
        seen_keys.add(key)
        try:
            canonical = canonicalize_label(n.label)
        except EmptyLabelError:
            report.append(Violation("EmptyLabel", n.id, "node label is empty"))
            continue
        if canonical != n.label:
            report.append(
                Violation("NonCanonicalLabel", n.id, f"label {n.label!r} != {canonical!r}")
            )

    seen_edges: set[tuple[str, str]] = set()
    out_degree: dict[str, int] = {n.id: 0 for n in graph.nodes}
    for e in graph.edges:
        pair = (e.src, e.dst)
        if pair in seen_edges:
            report.append(Violation("DuplicateEdge", f"{e.src}->{e.dst}", "edge appears twice"))
        seen_edges.add(pair)
        if e.src == e.dst:
            report.append(Violation("SelfLoopEdge", e.src, "edge endpoints are equal"))
        if e.src in out_degree:
            out_degree[e.src] += 1
        dangling = False
        for endpoint in pair:
            if endpoint not in graph.node_by_id:
                report.append(Violation("DanglingEdge", endpoint, "edge endpoint not in graph"))
                dangling = True
        if dangling:
            continue
        if graph.node_by_id[e.src].kind is NodeKind.EXCEPTION:
            report.append(
                Violation("ExceptionWithDependents", e.src, "exception node has outgoing edge")
            )

    for n in graph.nodes:
        if n.id in out_degree and n.is_ultimate != (out_degree[n.id] == 0):
            report.append(
                Violation(
                    "UltimateFlagMismatch",
                    n.id,
                    f"is_ultimate={n.is_ultimate} but out-degree={out_degree[n.id]}",
                )
            )
    return report

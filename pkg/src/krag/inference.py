"""Statement compilation, burden allocation, and verdict evaluation.

Evaluation semantics in one paragraph: an ultimate fact (a label with no
defining statement) is ESTABLISHED when the burden-bearing party alleged it
and either an adversarial party admitted it or the bearer produced evidence
the judge ruled plausible; anything unproven is FAILED. An intermediate node
HOLDS when some defining alternative has every required child holding and no
exception child holding; an exception that cannot be proven does not block
(negation as failure). Burdens start on the root claim's proponent and flip
to the counterparty at every exception crossing, recursively.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from krag.dsl import Act, ActKind, FactScript, StatementSet
from krag.errors import KragError
from krag.model import (
    Edge,
    FactStatus,
    InferenceGraph,
    InvalidScenarioError,
    Node,
    NodeKind,
    Reason,
    Scenario,
    Statement,
    TraceStep,
    Verdict,
    VerdictMap,
    node_id,
)


class KindConflictError(KragError):
    """One label used as both condition and exception target of the same head."""


class CyclicRulesError(KragError):
    def __init__(self, cycle: tuple[str, ...]):
        super().__init__(f"rules form a cycle: {' -> '.join(cycle + cycle[:1])}")
        self.cycle = cycle


class AmbiguousBurdenError(KragError):
    def __init__(self, conflicts: Mapping[str, tuple[str, ...]]):
        detail = "; ".join(f"{fact}: {', '.join(parties)}" for fact, parties in conflicts.items())
        super().__init__(f"conflicting burden allocations: {detail}")
        self.conflicts = dict(conflicts)


class UnknownFactError(KragError):
    pass


class UnknownNodeError(KragError):
    pass


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


def compile_statements(sset: StatementSet) -> InferenceGraph:
    """Map statements onto an inference graph: one node per distinct
    (label, kind), heads as condition nodes, one edge per requires/except
    entry. Labels shared across statements merge into the same node."""
    by_head: dict[str, list[Statement]] = {}
    for s in sset.statements:
        by_head.setdefault(s.head, []).append(s)
    for head, alts in by_head.items():
        required = {r for s in alts for r in s.requires}
        excepted = {e for s in alts for e in s.exceptions}
        overlap = required & excepted
        if overlap:
            raise KindConflictError(
                f"head {head!r} uses {sorted(overlap)} as both condition and exception"
            )

    node_keys: dict[tuple[str, NodeKind], None] = {}
    edge_keys: dict[tuple[str, str], None] = {}
    for s in sset.statements:
        head_id = node_id(s.head, NodeKind.CONDITION)
        node_keys.setdefault((s.head, NodeKind.CONDITION), None)
        for r in s.requires:
            node_keys.setdefault((r, NodeKind.CONDITION), None)
            edge_keys.setdefault((head_id, node_id(r, NodeKind.CONDITION)), None)
        for e in s.exceptions:
            node_keys.setdefault((e, NodeKind.EXCEPTION), None)
            edge_keys.setdefault((head_id, node_id(e, NodeKind.EXCEPTION)), None)

    out_degree: dict[str, int] = {}
    for src, _ in edge_keys:
        out_degree[src] = out_degree.get(src, 0) + 1
    nodes = [
        Node(node_id(label, kind), label, kind, out_degree.get(node_id(label, kind), 0) == 0)
        for label, kind in node_keys
    ]
    edges = [Edge(src, dst) for src, dst in edge_keys]
    return InferenceGraph.build(nodes, edges, sset.statements, sset.scenario)


# ---------------------------------------------------------------------------
# Burden allocation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BurdenAssignment:
    """Which party must prove each ultimate fact."""

    bearer: Mapping[str, str]

    def party_for(self, fact: str) -> str:
        try:
            return self.bearer[fact]
        except KeyError:
            raise UnknownFactError(f"no burden entry for fact {fact!r}") from None


@dataclass(frozen=True)
class BurdenAnalysis:
    assignment: BurdenAssignment
    ambiguities: Mapping[str, tuple[str, ...]]


def _label_cycle(sset: StatementSet) -> tuple[str, ...] | None:
    """First dependency cycle over labels, or None when the rules are acyclic."""
    children: dict[str, tuple[str, ...]] = {}
    for s in sset.statements:
        prior = children.get(s.head, ())
        children[s.head] = prior + s.requires + s.exceptions
    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = {}
    for start in children:
        if color.get(start, WHITE) is not WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        path = [start]
        color[start] = GREY
        while stack:
            label, idx = stack[-1]
            kids = children.get(label, ())
            if idx >= len(kids):
                stack.pop()
                path.pop()
                color[label] = BLACK
                continue
            stack[-1] = (label, idx + 1)
            child = kids[idx]
            state = color.get(child, WHITE)
            if state == GREY:
                return tuple(path[path.index(child):])
            if state == WHITE:
                color[child] = GREY
                stack.append((child, 0))
                path.append(child)
    return None


def analyze_burdens(sset: StatementSet) -> BurdenAnalysis:
    """Non-raising burden allocation: returns the first-assigned party per
    ultimate fact plus every label reached under conflicting parties."""
    cycle = _label_cycle(sset)
    if cycle is not None:
        raise CyclicRulesError(cycle)
    if sset.scenario is None:
        raise InvalidScenarioError("burden allocation requires a scenario block")
    scenario = sset.scenario

    defs: dict[str, list[Statement]] = {}
    referenced: set[str] = set()
    for s in sset.statements:
        defs.setdefault(s.head, []).append(s)
        referenced.update(s.requires)
        referenced.update(s.exceptions)

    context: dict[str, str] = {}
    conflicts: dict[str, set[str]] = {}

    def assign(label: str, party: str) -> None:
        known = context.get(label)
        if known is None:
            context[label] = party
        elif known != party:
            conflicts.setdefault(label, {known}).add(party)
            return
        else:
            return
        for stmt in defs.get(label, ()):
            flipped = scenario.counterparty(party).id
            for r in stmt.requires:
                assign(r, party)
            for e in stmt.exceptions:
                assign(e, flipped)

    roots = [h for h in defs if h not in referenced]
    for head in roots:
        assign(head, defs[head][0].proponent)

    leaves = {label for label in context if label not in defs}
    assignment = BurdenAssignment({label: context[label] for label in sorted(leaves)})
    ambiguity = {label: tuple(sorted(parties)) for label, parties in sorted(conflicts.items())}
    return BurdenAnalysis(assignment, ambiguity)


def assign_burdens(sset: StatementSet) -> BurdenAssignment:
    """Allocate the burden of proof per ultimate fact; exception crossings
    flip the bearer to the counterparty. Raises on cycles and on facts
    reached under conflicting parties."""
    analysis = analyze_burdens(sset)
    if analysis.ambiguities:
        raise AmbiguousBurdenError(analysis.ambiguities)
    return analysis.assignment


# ---------------------------------------------------------------------------
# Litigation state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactRecord:
    alleged_by: frozenset[str] = frozenset()
    evidenced_by: frozenset[str] = frozenset()
    admitted_by: frozenset[str] = frozenset()
    plausible: bool = False

    @property
    def untouched(self) -> bool:
        return not (self.alleged_by or self.evidenced_by or self.admitted_by or self.plausible)


_EMPTY_RECORD = FactRecord()


@dataclass(frozen=True)
class LitigationState:
    """Party acts folded per fact label; derived deterministically from a script."""

    scenario: Scenario
    facts: Mapping[str, FactRecord]

    @classmethod
    def from_script(cls, script: FactScript, scenario: Scenario | None = None) -> "LitigationState":
        sc = script.scenario or scenario
        if sc is None:
            raise InvalidScenarioError("fact script carries no scenario and none was provided")
        records: dict[str, FactRecord] = {}
        for act in script.acts:
            rec = records.get(act.fact, _EMPTY_RECORD)
            if act.kind is ActKind.ALLEGE:
                rec = FactRecord(rec.alleged_by | {act.party}, rec.evidenced_by, rec.admitted_by, rec.plausible)
            elif act.kind is ActKind.PROVIDE_EVIDENCE:
                rec = FactRecord(rec.alleged_by, rec.evidenced_by | {act.party}, rec.admitted_by, rec.plausible)
            elif act.kind is ActKind.ADMISSION:
                rec = FactRecord(rec.alleged_by, rec.evidenced_by, rec.admitted_by | {act.party}, rec.plausible)
            else:
                rec = FactRecord(rec.alleged_by, rec.evidenced_by, rec.admitted_by, True)
            records[act.fact] = rec
        return cls(sc, records)

    def record(self, fact: str) -> FactRecord:
        return self.facts.get(fact, _EMPTY_RECORD)

    def provisional_status(self, fact: str) -> FactStatus:
        """Pre-evaluation view: untouched facts are still open, everything
        else is pending the establishment rule."""
        return FactStatus.UNDISPUTED_OPEN if self.record(fact).untouched else FactStatus.FAILED


def _establish_with_reason(
    fact: str, state: LitigationState, burden: BurdenAssignment
) -> tuple[FactStatus, Reason]:
    bearer = burden.party_for(fact)
    rec = state.record(fact)
    if bearer in rec.alleged_by:
        opposing = {p.id for p in state.scenario.opposing(bearer)}
        if rec.admitted_by & opposing:
            return FactStatus.ESTABLISHED, Reason.ADMITTED
        if bearer in rec.evidenced_by and rec.plausible:
            return FactStatus.ESTABLISHED, Reason.BURDEN_MET
    return FactStatus.FAILED, Reason.BURDEN_UNMET


def establish_fact(fact: str, state: LitigationState, burden: BurdenAssignment) -> FactStatus:
    """ESTABLISHED iff the bearer alleged the fact and either an adversarial
    party admitted it or the bearer's evidence was ruled plausible."""
    return _establish_with_reason(fact, state, burden)[0]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Alternative:
    requires: tuple[tuple[str, str], ...]  # (node id or virtual, label)
    exceptions: tuple[tuple[str, str], ...]


def _node_for(graph: InferenceGraph, label: str, kind: NodeKind) -> str:
    preferred = node_id(label, kind)
    if preferred in graph.node_by_id:
        return preferred
    other = node_id(label, NodeKind.EXCEPTION if kind is NodeKind.CONDITION else NodeKind.CONDITION)
    if other in graph.node_by_id:
        return other
    return preferred  # virtual leaf: evaluated by label, not recorded


def _alternatives(graph: InferenceGraph, node: Node) -> tuple[_Alternative, ...]:
    stmts = graph.statements_by_head.get(node.label, ())
    if stmts:
        return tuple(
            _Alternative(
                tuple((_node_for(graph, r, NodeKind.CONDITION), r) for r in s.requires),
                tuple((_node_for(graph, e, NodeKind.EXCEPTION), e) for e in s.exceptions),
            )
            for s in stmts
        )
    targets = graph.out_edges.get(node.id, ())
    if not targets:
        return ()
    requires = []
    exceptions = []
    for dst in targets:
        child = graph.node_by_id[dst]
        (exceptions if child.kind is NodeKind.EXCEPTION else requires).append((dst, child.label))
    return (_Alternative(tuple(requires), tuple(exceptions)),)


def evaluate(
    graph: InferenceGraph, state: LitigationState, burden: BurdenAssignment
) -> VerdictMap:
    """Assign HOLDS/FAILS to every node of an acyclic graph.

    Pure function of its inputs: repeated calls return equal maps.
    """
    statuses: dict[str, Verdict] = {}
    reasons: dict[str, tuple[Reason, str | None]] = {}
    traces: dict[str, tuple[TraceStep, ...]] = {}
    memo: dict[str, Verdict] = {}
    on_path: set[str] = set()

    def leaf_status(label: str) -> tuple[Verdict, Reason]:
        fact_status, reason = _establish_with_reason(label, state, burden)
        verdict = Verdict.HOLDS if fact_status is FactStatus.ESTABLISHED else Verdict.FAILS
        return verdict, reason

    def visit(nid: str, label: str) -> Verdict:
        if nid in memo:
            return memo[nid]
        if nid in on_path:
            raise CyclicRulesError((nid,))
        node = graph.node_by_id.get(nid)
        alternatives = _alternatives(graph, node) if node is not None else ()
        if not alternatives:
            verdict, reason = leaf_status(label)
            memo[nid] = verdict
            if node is not None:
                statuses[nid] = verdict
                reasons[nid] = (reason, None)
                traces[nid] = ()
            return verdict

        def step(child_id: str, child_label: str, verdict: Verdict, is_exception: bool) -> TraceStep:
            # Culprit roles are explicit; otherwise the child's own reason carries over.
            if is_exception and verdict is Verdict.HOLDS:
                reason: Reason = Reason.EXCEPTION_TRIGGERED
            elif not is_exception and verdict is Verdict.FAILS:
                reason = Reason.REQUIRED_FAILED
            else:
                reason = reasons.get(child_id, (Reason.ALL_REQUIRED_HELD, None))[0]
            return TraceStep(child_id, verdict, reason, child_label)

        on_path.add(nid)
        try:
            failure_steps: list[TraceStep] = []
            fail_reason: tuple[Reason, str | None] | None = None
            for alt in alternatives:
                steps: list[TraceStep] = []
                culprit: tuple[Reason, str | None] | None = None
                for child_id, child_label in alt.requires:
                    child_verdict = visit(child_id, child_label)
                    steps.append(step(child_id, child_label, child_verdict, is_exception=False))
                    if child_verdict is Verdict.FAILS:
                        culprit = (Reason.REQUIRED_FAILED, child_label)
                        break
                if culprit is None:
                    for child_id, child_label in alt.exceptions:
                        child_verdict = visit(child_id, child_label)
                        steps.append(step(child_id, child_label, child_verdict, is_exception=True))
                        if child_verdict is Verdict.HOLDS:
                            culprit = (Reason.EXCEPTION_TRIGGERED, child_label)
                            break
                if culprit is None:
                    memo[nid] = Verdict.HOLDS
                    statuses[nid] = Verdict.HOLDS
                    reasons[nid] = (Reason.ALL_REQUIRED_HELD, None)
                    traces[nid] = tuple(steps)
                    return Verdict.HOLDS
                if fail_reason is None:
                    fail_reason = culprit
                failure_steps.append(steps[-1])
            memo[nid] = Verdict.FAILS
            statuses[nid] = Verdict.FAILS
            reasons[nid] = fail_reason if fail_reason is not None else (Reason.BURDEN_UNMET, None)
            traces[nid] = tuple(failure_steps)
            return Verdict.FAILS
        finally:
            on_path.discard(nid)

    for node in graph.nodes:
        visit(node.id, node.label)
    return VerdictMap(statuses, reasons, traces)


# ---------------------------------------------------------------------------
# Explanation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExplanationTree:
    """Derivation actually used for one node, mirrored as a tree."""

    node_id: str
    label: str
    status: Verdict
    reason: Reason
    reason_label: str | None
    children: tuple["ExplanationTree", ...] = ()


def explain(graph: InferenceGraph, verdicts: VerdictMap, target: str) -> ExplanationTree:
    """Tree rooted at ``target``: HOLDS nodes cite the satisfied alternative's
    children, FAILS nodes the first failing requirement or triggering
    exception per alternative, leaves their establishment outcome."""
    if target not in verdicts.statuses:
        raise UnknownNodeError(f"node {target!r} is not in the verdict map")

    def build(nid: str, depth: int) -> ExplanationTree:
        node = graph.node_by_id[nid]
        reason, reason_label = verdicts.reasons[nid]
        children = tuple(
            build(step.child, depth + 1)
            for step in verdicts.traces[nid]
            if step.child in verdicts.statuses
        )
        return ExplanationTree(nid, node.label, verdicts.statuses[nid], reason, reason_label, children)

    return build(target, 0)


def explanation_to_dict(tree: ExplanationTree) -> dict:
    return {
        "node_id": tree.node_id,
        "label": tree.label,
        "status": tree.status.value,
        "reason": tree.reason.value,
        "reason_label": tree.reason_label,
        "children": [explanation_to_dict(c) for c in tree.children],
    }


def explanation_text(tree: ExplanationTree, indent: int = 0) -> str:
    """Plain-text rendering used in prompts and CLI output."""
    suffix = f" ({tree.reason.value}" + (f": {tree.reason_label}" if tree.reason_label else "") + ")"
    lines = ["  " * indent + f"{tree.label}: {tree.status.value}{suffix}"]
    for child in tree.children:
        lines.append(explanation_text(child, indent + 1))
    return "\n".join(lines)

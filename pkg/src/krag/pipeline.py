"""End-to-end answering pipeline: retrieve, select a pattern graph,
instantiate it with the case facts, evaluate, render, and prepare the
response.

The engine decides; the generator only verbalizes. With the TEMPLATE backend
the whole pipeline is a pure function of (query, facts, store, config), so
repeated calls differ only in stage timings.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from krag.dsl import FactScript, StatementSet
from krag.errors import KragError
from krag.generation import (
    Generator,
    PromptBundle,
    Strategy,
    TemplateGenerator,
    build_template_prompt,
    compose_prompt,
)
from krag.inference import (
    BurdenAssignment,
    ExplanationTree,
    LitigationState,
    assign_burdens,
    evaluate,
    explain,
    explanation_text,
)
from krag.knowledge import KnowledgePoint, KnowledgeStore
from krag.model import (
    InferenceGraph,
    Node,
    NodeKind,
    Verdict,
    VerdictMap,
    canonicalize_label,
    node_id,
)
from krag.render import render_graph
from krag.retrieval import RankedHit, RetrievalIndex, embed, graph_similarity, retrieve

STAGES = (
    "query_submission",
    "embedding_conversion",
    "vector_database_search",
    "context_retrieval",
    "knowledge_set",
    "large_language_model",
    "graph_generation",
    "response_preparation",
    "response_delivery",
)

DISCLAIMER = (
    "This answer was produced by an automated reasoning prototype and is "
    "not legal advice."
)


class EmptyStoreError(KragError):
    pass


class NoHitsError(KragError):
    pass


class StageError(KragError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class KragConfig:
    k: int = 3
    alpha: float = 0.5
    strategy: Strategy = Strategy.IO
    w_text: float = 0.5
    w_graph: float = 0.5
    render_format: str = "dot"
    surface_disagreement: bool = False

    def __post_init__(self) -> None:
        for name in ("alpha", "w_text", "w_graph"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise KragError(f"{name} must be in [0, 1], got {value}")
        if abs(self.w_text + self.w_graph - 1.0) > 1e-9:
            raise KragError("w_text + w_graph must equal 1")


@dataclass(frozen=True)
class InstantiatedCase:
    graph: InferenceGraph
    state: LitigationState
    burdens: BurdenAssignment
    unmatched: tuple[str, ...]


@dataclass(frozen=True)
class Response:
    answer: str
    explanation: ExplanationTree
    graph_render: str
    citations: tuple[str, ...]
    disclaimer: str
    pattern_id: str
    trace: tuple[tuple[str, float], ...]
    verdicts: VerdictMap
    unmatched: tuple[str, ...]
    hits: tuple[RankedHit, ...]


def query_sketch_graph(query: str, store: KnowledgeStore) -> InferenceGraph:
    """Nodes for every known label occurring as a substring of the
    canonicalized query; no edges (free text carries no structure).
    Crude but deterministic."""
    canonical_query = canonicalize_label(query) if query.strip() else ""
    nodes = [
        Node(node_id(node.label, node.kind), node.label, node.kind, True)
        for node in store.unified_graph.nodes
        if node.label in canonical_query
    ]
    return InferenceGraph.build(nodes, [])


def select_pattern_graph(
    query: str, hits: list[RankedHit], store: KnowledgeStore, config: KragConfig
) -> KnowledgePoint:
    """Best point by w_text * retrieval score + w_graph * structural
    similarity against the query sketch; ties break by point id."""
    if not hits:
        raise NoHitsError("no retrieval hits to select from")
    sketch = query_sketch_graph(query, store)
    best: tuple[float, str] | None = None
    for hit in hits:
        point = store.points[hit.point_id]
        combined = config.w_text * hit.score + config.w_graph * graph_similarity(
            sketch, point.graph
        )
        key = (-combined, hit.point_id)
        if best is None or key < best:
            best = key
    assert best is not None
    return store.points[best[1]]


def instantiate_graph(pattern: KnowledgePoint, facts: FactScript | None) -> InstantiatedCase:
    """Copy the pattern graph and map the fact acts onto it by canonical
    label. Acts naming labels absent from the graph are annotations, not
    errors."""
    graph = pattern.graph
    scenario = (facts.scenario if facts else None) or graph.scenario
    script = facts if facts is not None else FactScript(scenario, ())
    state = LitigationState.from_script(script, scenario)
    burdens = assign_burdens(StatementSet(scenario, graph.statements))
    unmatched = tuple(
        sorted({act.fact for act in script.acts if act.fact not in graph.labels})
    )
    return InstantiatedCase(graph, state, burdens, unmatched)


def primary_claim_node(graph: InferenceGraph) -> str:
    """The node whose verdict answers the query: the first statement's head,
    else the first root."""
    if graph.statements:
        return node_id(graph.statements[0].head, NodeKind.CONDITION)
    if graph.roots:
        return graph.roots[0]
    raise EmptyStoreError("pattern graph has no nodes")


def _template_fields(
    query: str,
    pattern: KnowledgePoint,
    verdicts: VerdictMap,
    tree: ExplanationTree,
) -> dict[str, str]:
    reason_label = tree.reason_label or ""
    return {
        "verdict": tree.status.value,
        "query": query,
        "target": tree.label,
        "reason": tree.reason.value,
        "reason_label": reason_label,
        "pattern_id": pattern.id,
    }


def _compose_answer(
    query: str,
    pattern: KnowledgePoint,
    verdicts: VerdictMap,
    tree: ExplanationTree,
    generator: Generator,
    config: KragConfig,
    context_articles: tuple[str, ...] = (),
) -> str:
    if generator.backend == "template":
        prompt = build_template_prompt(
            pattern.answer_template, _template_fields(query, pattern, verdicts, tree)
        )
        return generator.generate(prompt)
    knowledge = explanation_text(tree)
    if context_articles:
        knowledge += "\n\nRelated articles: " + ", ".join(context_articles)
    strategy = config.strategy
    if strategy is Strategy.ONE_SHOT:
        bundle = PromptBundle(strategy, query, exemplars=(pattern.query,), knowledge=knowledge)
    elif strategy is Strategy.IO:
        bundle = PromptBundle(Strategy.GENERATED_KNOWLEDGE, query, knowledge=knowledge)
    else:
        bundle = PromptBundle(strategy, query, knowledge=knowledge)
    answer = generator.generate(compose_prompt(bundle))
    if config.surface_disagreement:
        verdict_word = "holds" if tree.status is Verdict.HOLDS else "fails"
        answer += (
            f"\n\n[Engine verdict on {tree.label}: {verdict_word}; the verdict "
            "above is authoritative even if the generated text disagrees.]"
        )
    return answer


def answer_query(
    query: str,
    store: KnowledgeStore,
    index: RetrievalIndex,
    generator: Generator | None = None,
    config: KragConfig | None = None,
    facts: FactScript | None = None,
) -> Response:
    """Run the full nine-stage pipeline for one query."""
    generator = generator or TemplateGenerator()
    config = config or KragConfig()
    timings: dict[str, float] = {}

    def staged(stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except KragError as exc:
            raise StageError(stage, exc) from exc
        timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start) * 1000.0
        return result

    def check_store() -> str:
        if store.is_empty:
            raise EmptyStoreError("knowledge store has no points")
        return query.strip()

    cleaned = staged("query_submission", check_store)
    query_vec = staged("embedding_conversion", embed, cleaned, index.embedder)
    hits = staged("vector_database_search", retrieve, cleaned, index, config.k, query_vec)
    context_articles = staged(
        "context_retrieval",
        lambda: tuple(
            aid for hit in hits for aid in store.points[hit.point_id].article_ids()
        ),
    )

    def select_and_instantiate() -> tuple[KnowledgePoint, InstantiatedCase]:
        pattern = select_pattern_graph(cleaned, hits, store, config)
        return pattern, instantiate_graph(pattern, facts)

    pattern, case = staged("knowledge_set", select_and_instantiate)

    def decide() -> tuple[VerdictMap, ExplanationTree]:
        verdicts = evaluate(case.graph, case.state, case.burdens)
        target = primary_claim_node(case.graph)
        return verdicts, explain(case.graph, verdicts, target)

    verdicts, tree = staged("large_language_model", decide)
    rendered = staged(
        "graph_generation", render_graph, case.graph, verdicts, config.render_format
    )
    answer = staged(
        "large_language_model",
        _compose_answer, cleaned, pattern, verdicts, tree, generator, config,
        context_articles,
    )

    def prepare() -> Response:
        return Response(
            answer=answer,
            explanation=tree,
            graph_render=rendered,
            citations=pattern.article_ids(),
            disclaimer=DISCLAIMER,
            pattern_id=pattern.id,
            trace=(),
            verdicts=verdicts,
            unmatched=case.unmatched,
            hits=tuple(hits),
        )

    response = staged("response_preparation", prepare)
    timings["response_delivery"] = 0.0
    trace = tuple((stage, timings.get(stage, 0.0)) for stage in STAGES)
    return replace(response, trace=trace)

"""Command-line interface.

Exit codes: 0 ok, 2 input error, 3 external-backend failure.
"""

from __future__ import annotations

import json
import sys

import click

from krag.dsl import parse_facts
from krag.errors import KragError
from krag.evaluation import (
    PerformanceMode,
    compare_report,
    format_rational,
    load_questions,
    performance,
    run_trials,
    stability,
)
from krag.fixtures import demo_store
from krag.generation import (
    ExternalTimeoutError,
    ExternalUnavailableError,
    ExternalGenerator,
    Strategy,
    TemplateGenerator,
    generator_from_env,
)
from krag.inference import evaluate, explanation_text
from krag.knowledge import (
    KnowledgeStore,
    add_knowledge,
    load_store,
    point_from_dict,
    save_store,
    detect_cycles,
)
from krag.model import Verdict, validate_graph
from krag.pipeline import KragConfig, answer_query, instantiate_graph
from krag.render import render_graph
from krag.retrieval import RetrievalConfig, build_index

EXIT_INPUT_ERROR = 2
EXIT_EXTERNAL_FAILURE = 3


def _load_kb(path: str | None) -> KnowledgeStore:
    if path is None:
        return demo_store()
    try:
        return load_store(path)
    except KragError as exc:
        raise click.exceptions.Exit(_fail(str(exc)))


def _fail(message: str, code: int = EXIT_INPUT_ERROR) -> int:
    click.echo(f"error: {message}", err=True)
    return code


def _read_facts(path: str | None, scenario):
    if path is None:
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_facts(fh.read(), scenario)
    except OSError as exc:
        raise click.exceptions.Exit(_fail(str(exc)))
    except KragError as exc:
        raise click.exceptions.Exit(_fail(str(exc)))


@click.group()
def main() -> None:
    """Inference-graph reasoning over a knowledge set of pattern graphs."""


@main.command()
@click.argument("query")
@click.option("--facts", "facts_path", type=click.Path(), help="Fact script (.sp) for the case.")
@click.option("--kb", "kb_path", type=click.Path(), help="Store JSON; defaults to the built-in demo store.")
@click.option("--format", "render_format", type=click.Choice(["dot", "mermaid"]), default="dot")
@click.option("--strategy", type=click.Choice([s.value for s in Strategy]), default="io")
@click.option("--k", type=int, default=3, help="Retrieval depth.")
@click.option("--alpha", type=float, default=0.5, help="Lexical/vector fusion weight.")
@click.option("--json", "as_json", is_flag=True, help="Emit the full response as JSON.")
def ask(query: str, facts_path: str | None, kb_path: str | None, render_format: str,
        strategy: str, k: int, alpha: float, as_json: bool) -> None:
    """Answer a query against the knowledge store."""
    store = _load_kb(kb_path)
    facts = _read_facts(facts_path, store.unified_graph.scenario)
    config = KragConfig(k=k, alpha=alpha, strategy=Strategy(strategy), render_format=render_format)
    index = build_index(store, RetrievalConfig(alpha=alpha))
    try:
        response = answer_query(query, store, index, generator_from_env(), config, facts)
    except (ExternalUnavailableError, ExternalTimeoutError) as exc:
        sys.exit(_fail(str(exc), EXIT_EXTERNAL_FAILURE))
    except KragError as exc:
        cause = getattr(exc, "cause", None)
        if isinstance(cause, (ExternalUnavailableError, ExternalTimeoutError)):
            sys.exit(_fail(str(cause), EXIT_EXTERNAL_FAILURE))
        sys.exit(_fail(str(exc)))
    if as_json:
        from krag.inference import explanation_to_dict

        click.echo(json.dumps({
            "answer": response.answer,
            "pattern_id": response.pattern_id,
            "citations": list(response.citations),
            "disclaimer": response.disclaimer,
            "explanation": explanation_to_dict(response.explanation),
            "graph_render": response.graph_render,
            "unmatched": list(response.unmatched),
        }, indent=2, sort_keys=True))
        return
    click.echo(response.answer)
    click.echo()
    click.echo(f"pattern: {response.pattern_id}")
    click.echo(f"citations: {', '.join(response.citations) or '(none)'}")
    if response.unmatched:
        click.echo(f"unmatched facts: {', '.join(response.unmatched)}")
    click.echo()
    click.echo(explanation_text(response.explanation))
    click.echo()
    click.echo(response.graph_render)
    click.echo(response.disclaimer)


@main.group()
def kb() -> None:
    """Inspect and maintain a knowledge store."""


@kb.command("add")
@click.argument("point_json", type=click.Path())
@click.option("--kb", "kb_path", type=click.Path(), required=True)
def kb_add(point_json: str, kb_path: str) -> None:
    """Add one knowledge point (schema: one element of the store's points array)."""
    store = _load_kb(kb_path)
    try:
        with open(point_json, encoding="utf-8") as fh:
            point = point_from_dict(json.load(fh))
        store = add_knowledge(point, store)
        save_store(store, kb_path)
    except (OSError, json.JSONDecodeError) as exc:
        sys.exit(_fail(str(exc)))
    except KragError as exc:
        sys.exit(_fail(str(exc)))
    click.echo(f"added {point.id}; store now holds {len(store.points)} points")
    for flag in store.debug_flags:
        click.echo(f"debug: {flag.kind} {'/'.join(flag.subject)} (from {', '.join(flag.source_point_ids)})")


@kb.command("validate")
@click.option("--kb", "kb_path", type=click.Path())
def kb_validate(kb_path: str | None) -> None:
    """Run structural validation over every point graph."""
    store = _load_kb(kb_path)
    clean = True
    for pid, point in store.points.items():
        for violation in validate_graph(point.graph):
            clean = False
            click.echo(f"{pid}: {violation.code}({violation.subject}) {violation.detail}")
    click.echo("ok" if clean else "violations found")


@kb.command("unify")
@click.option("--kb", "kb_path", type=click.Path())
@click.option("--format", "render_format", type=click.Choice(["dot", "mermaid"]))
def kb_unify(kb_path: str | None, render_format: str | None) -> None:
    """Summarize (or render) the unified graph across all points."""
    store = _load_kb(kb_path)
    unified = store.unified_graph
    click.echo(
        f"points: {len(store.points)}  nodes: {len(unified.nodes)}  "
        f"edges: {len(unified.edges)}  statements: {len(unified.statements)}"
    )
    for flag in store.debug_flags:
        click.echo(f"debug: {flag.kind} {'/'.join(flag.subject)}")


@kb.command("cycles")
@click.option("--kb", "kb_path", type=click.Path())
def kb_cycles(kb_path: str | None) -> None:
    """List elementary cycles in the unified graph."""
    store = _load_kb(kb_path)
    cycles = detect_cycles(store.unified_graph)
    if not cycles:
        click.echo("acyclic")
        return
    for cycle in cycles:
        click.echo(" -> ".join(cycle + cycle[:1]))


@kb.command("demo")
@click.option("--out", "out_path", type=click.Path(), required=True)
def kb_demo(out_path: str) -> None:
    """Write the built-in worked-example store to a file."""
    try:
        save_store(demo_store(), out_path)
    except KragError as exc:
        sys.exit(_fail(str(exc)))
    click.echo(f"wrote demo store to {out_path}")


@main.command()
@click.option("--kb", "kb_path", type=click.Path())
@click.option("--point", "point_id", required=True)
@click.option("--facts", "facts_path", type=click.Path())
@click.option("--format", "render_format", type=click.Choice(["dot", "mermaid"]), default="dot")
def render(kb_path: str | None, point_id: str, facts_path: str | None, render_format: str) -> None:
    """Render one point's graph with verdicts from an optional fact script."""
    store = _load_kb(kb_path)
    point = store.point(point_id)
    if point is None:
        sys.exit(_fail(f"unknown point {point_id!r}"))
    facts = _read_facts(facts_path, point.graph.scenario)
    try:
        case = instantiate_graph(point, facts)
        verdicts = evaluate(case.graph, case.state, case.burdens)
        click.echo(render_graph(case.graph, verdicts, render_format))
    except KragError as exc:
        sys.exit(_fail(str(exc)))


@main.command("eval")
@click.option("--questions", "questions_path", type=click.Path(), required=True)
@click.option("--trials", type=int, default=2)
@click.option("--system", "system_name", type=click.Choice(["template", "external"]), default="template")
@click.option("--kb", "kb_path", type=click.Path())
@click.option("--csv", "csv_path", type=click.Path())
def eval_command(questions_path: str, trials: int, system_name: str,
                 kb_path: str | None, csv_path: str | None) -> None:
    """Run repeated trials and report performance and stability."""
    store = _load_kb(kb_path)
    try:
        questions = load_questions(questions_path)
    except KragError as exc:
        sys.exit(_fail(str(exc)))
    index = build_index(store)
    generator = TemplateGenerator() if system_name == "template" else generator_from_env()
    if system_name == "external" and not isinstance(generator, ExternalGenerator):
        sys.exit(_fail("external system requested but KRAG_LLM_ENDPOINT is not set",
                       EXIT_EXTERNAL_FAILURE))

    def system(question_text: str) -> str:
        response = answer_query(question_text, store, index, generator)
        # the explanation is rooted at the pattern's primary claim
        return "Y" if response.explanation.status is Verdict.HOLDS else "N"

    try:
        log = run_trials(questions, system, trials)
    except KragError as exc:
        sys.exit(_fail(str(exc), EXIT_EXTERNAL_FAILURE if system_name == "external" else EXIT_INPUT_ERROR))
    report = compare_report({system_name: log}, questions)
    click.echo(report.as_table())
    click.echo()
    click.echo(f"strict-both: {format_rational(performance(log, questions))}")
    click.echo(f"average:     {format_rational(performance(log, questions, PerformanceMode.AVERAGE))}")
    click.echo(f"stability:   {format_rational(stability(log))}")
    if csv_path:
        try:
            with open(csv_path, "w", encoding="utf-8") as fh:
                fh.write(report.as_csv())
        except OSError as exc:
            sys.exit(_fail(str(exc)))
        click.echo(f"csv written to {csv_path}")


@main.command()
@click.option("--port", type=int, default=8080)
@click.option("--host", default="127.0.0.1")
@click.option("--kb", "kb_path", type=click.Path())
def serve(port: int, host: str, kb_path: str | None) -> None:
    """Serve the HTTP API."""
    from krag.server import serve as run_server

    run_server(_load_kb(kb_path), host=host, port=port)


if __name__ == "__main__":
    main()

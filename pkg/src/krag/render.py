"""Verdict-colored graph export: DOT and Mermaid.

Output is stable under node insertion order (everything sorted by id), so
renders can be frozen as golden files. Conditions are boxes, exceptions are
diamonds; holding nodes fill green, failing nodes red.
"""

from __future__ import annotations

from krag.errors import KragError
from krag.model import InferenceGraph, NodeKind, Verdict, VerdictMap

FORMATS = ("dot", "mermaid")


class UnknownFormatError(KragError):
    pass


class MissingVerdictError(KragError):
    pass


def _status(verdicts: VerdictMap, nid: str) -> Verdict:
    try:
        return verdicts.statuses[nid]
    except KeyError:
        raise MissingVerdictError(f"no verdict for node {nid!r}") from None


def _to_dot(graph: InferenceGraph, verdicts: VerdictMap) -> str:
    lines = ["digraph inference {", "  rankdir=TB;"]
    for node in sorted(graph.nodes, key=lambda n: n.id):
        shape = "diamond" if node.kind is NodeKind.EXCEPTION else "box"
        color = "green" if _status(verdicts, node.id) is Verdict.HOLDS else "red"
        lines.append(
            f'  "{node.id}" [label="{node.label}", shape={shape}, '
            f"style=filled, fillcolor={color}];"
        )
    for edge in sorted(graph.edges, key=lambda e: (e.src, e.dst)):
        lines.append(f'  "{edge.src}" -> "{edge.dst}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _to_mermaid(graph: InferenceGraph, verdicts: VerdictMap) -> str:
    lines = ["graph TD"]
    for node in sorted(graph.nodes, key=lambda n: n.id):
        open_b, close_b = ("{", "}") if node.kind is NodeKind.EXCEPTION else ("[", "]")
        klass = "holds" if _status(verdicts, node.id) is Verdict.HOLDS else "fails"
        lines.append(f'  {node.id}{open_b}"{node.label}"{close_b}:::{klass}')
    for edge in sorted(graph.edges, key=lambda e: (e.src, e.dst)):
        lines.append(f"  {edge.src} --> {edge.dst}")
    lines.append("  classDef holds fill:#8f8,stroke:#262;")
    lines.append("  classDef fails fill:#f88,stroke:#622;")
    return "\n".join(lines) + "\n"


def render_graph(graph: InferenceGraph, verdicts: VerdictMap, fmt: str = "dot") -> str:
    normalized = fmt.strip().lower()
    if normalized == "dot":
        return _to_dot(graph, verdicts)
    if normalized == "mermaid":
        return _to_mermaid(graph, verdicts)
    raise UnknownFormatError(f"unknown render format {fmt!r}; expected dot or mermaid")

"""Answer generators and prompting strategies.

Two backends share one ``generate(prompt) -> text`` contract. The TEMPLATE
backend is a pure function: its prompt is a canonical JSON payload
``{"template": ..., "fields": {...}}`` and rendering fills conditional
blocks and placeholders from the fields. The EXTERNAL backend posts a
chat-completion request to the endpoint named by environment variables and
is absent-by-default: no endpoint means TEMPLATE.

Prompt texts per strategy are fixed, versioned strings so tests can be
byte-stable.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from krag.errors import KragError
from krag.model import InferenceGraph, canonicalize_label

LLM_ENDPOINT_VAR = "KRAG_LLM_ENDPOINT"
LLM_API_KEY_VAR = "KRAG_LLM_API_KEY"
LLM_MODEL_VAR = "KRAG_LLM_MODEL"

PROMPT_VERSION = "1"

_HEADER = (
    "You are assisting with a legal question. Rely only on the stated "
    "conditions and exceptions, and answer precisely."
)


class Strategy(str, Enum):
    IO = "io"
    ONE_SHOT = "one_shot"
    GENERATED_KNOWLEDGE = "generated_knowledge"
    COT = "cot"
    SELF_CONSISTENCY_COT = "self_consistency_cot"
    TOT = "tot"


class MissingExemplarError(KragError):
    pass


class MissingKnowledgeError(KragError):
    pass


class EmptyAnswerSetError(KragError):
    pass


class ExternalUnavailableError(KragError):
    pass


class ExternalTimeoutError(KragError):
    pass


class TemplateFieldMissingError(KragError):
    def __init__(self, field_name: str):
        super().__init__(f"template placeholder {{{{{field_name}}}}} has no field value")
        self.field = field_name


@dataclass(frozen=True)
class PromptBundle:
    strategy: Strategy
    problem: str
    exemplars: tuple[str, ...] = ()
    knowledge: str = ""
    steps: tuple[str, ...] = ()


def compose_prompt(bundle: PromptBundle) -> str:
    """Deterministic prompt per strategy; reasoning strategies with no
    recorded steps collapse to the IO form."""
    base = f"{_HEADER}\n\nProblem: {bundle.problem}\n\nAnswer:"
    if bundle.strategy is Strategy.IO:
        return base
    if bundle.strategy is Strategy.ONE_SHOT:
        if len(bundle.exemplars) != 1:
            raise MissingExemplarError(
                f"one-shot prompting needs exactly one exemplar, got {len(bundle.exemplars)}"
            )
        return (
            f"{_HEADER}\n\nExample:\n{bundle.exemplars[0]}\n\n"
            f"Problem: {bundle.problem}\n\nAnswer:"
        )
    if bundle.strategy is Strategy.GENERATED_KNOWLEDGE:
        if not bundle.knowledge.strip():
            raise MissingKnowledgeError("generated-knowledge prompting needs knowledge text")
        return (
            f"{_HEADER}\n\nKnowledge:\n{bundle.knowledge}\n\n"
            f"Problem: {bundle.problem}\n\nAnswer:"
        )
    # COT / SELF_CONSISTENCY_COT / TOT
    if not bundle.steps:
        return base
    listed = "\n".join(f"Step {i + 1}: {z}" for i, z in enumerate(bundle.steps))
    return (
        f"{_HEADER}\n\nProblem: {bundle.problem}\n\n"
        f"{listed}\nStep {len(bundle.steps) + 1}:"
    )


# ---------------------------------------------------------------------------
# Template rendering
# ---------------------------------------------------------------------------

_BLOCK = re.compile(r"\[\[holds\]\](.*?)\[\[fails\]\](.*?)\[\[end\]\]", re.DOTALL)
_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


def render_template(template: str, fields: dict[str, str]) -> str:
    """Fill ``[[holds]]...[[fails]]...[[end]]`` blocks from fields['verdict']
    and ``{{name}}`` placeholders from the remaining fields."""

    def pick(match: re.Match[str]) -> str:
        verdict = fields.get("verdict")
        if verdict is None:
            raise TemplateFieldMissingError("verdict")
        return match.group(1) if verdict == "holds" else match.group(2)

    def fill(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in fields:
            raise TemplateFieldMissingError(name)
        return fields[name]

    return _PLACEHOLDER.sub(fill, _BLOCK.sub(pick, template))


def build_template_prompt(template: str, fields: dict[str, str]) -> str:
    """Canonical JSON payload the TEMPLATE backend renders."""
    return json.dumps({"template": template, "fields": fields}, sort_keys=True)


class Generator:
    """Common surface for both backends."""

    backend = "template"

    def generate(self, prompt: str) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class TemplateGenerator(Generator):
    """Deterministic: renders the payload built by build_template_prompt.

    A plain-text prompt (no JSON payload) is echoed back with the prompt
    header stripped, which keeps degenerate pipelines total.
    """

    backend = "template"

    def generate(self, prompt: str) -> str:
        try:
            payload = json.loads(prompt)
        except json.JSONDecodeError:
            return prompt
        if not isinstance(payload, dict) or "template" not in payload:
            return prompt
        fields = payload.get("fields", {})
        if not isinstance(fields, dict):
            raise TemplateFieldMissingError("fields")
        return render_template(payload["template"], fields)


@dataclass(frozen=True)
class ExternalGenerator(Generator):
    """Remote chat-completion backend with timeout and a single retry."""

    endpoint: str
    api_key: str | None = None
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 30.0
    backend = "external"

    def generate(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        last_timeout: Exception | None = None
        for _ in range(2):  # one retry
            try:
                response = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
                response.raise_for_status()
                return response.json()["content"]
            except requests.Timeout as exc:
                last_timeout = exc
                continue
            except Exception as exc:
                raise ExternalUnavailableError(str(exc)) from exc
        raise ExternalTimeoutError(str(last_timeout))


def generator_from_env() -> Generator:
    """EXTERNAL when an endpoint is configured, TEMPLATE otherwise."""
    endpoint = os.environ.get(LLM_ENDPOINT_VAR)
    if not endpoint:
        return TemplateGenerator()
    return ExternalGenerator(
        endpoint,
        api_key=os.environ.get(LLM_API_KEY_VAR),
        model=os.environ.get(LLM_MODEL_VAR, "gpt-3.5-turbo"),
    )


def generate(generator: Generator, prompt: str) -> str:
    if isinstance(generator, ExternalGenerator) and not generator.endpoint:
        raise ExternalUnavailableError("no endpoint configured")
    return generator.generate(prompt)


# ---------------------------------------------------------------------------
# Aggregation and search
# ---------------------------------------------------------------------------


def aggregate_self_consistency(answers: Sequence[str]) -> str:
    """Majority label; ties break to the lexicographically smallest label."""
    if not answers:
        raise EmptyAnswerSetError("no answers to aggregate")
    counts: dict[str, int] = {}
    for a in answers:
        counts[a] = counts.get(a, 0) + 1
    top = max(counts.values())
    return min(label for label, count in counts.items() if count == top)


@dataclass(frozen=True)
class CandidateSet:
    """Scored step candidates proposed per level of a tree-of-thought run."""

    levels: tuple[tuple[tuple[str, float], ...], ...]
    breadth: int
    depth: int

    def __post_init__(self) -> None:
        if any(len(level) > self.breadth for level in self.levels):
            raise KragError("a level holds more candidates than the breadth allows")


def tree_of_thought(
    problem: str,
    generator: Generator,
    scorer: Callable[[str], float],
    breadth: int,
    depth: int,
) -> tuple[list[str], CandidateSet]:
    """Beam search of width one: at each level propose ``breadth`` candidates,
    keep the best by ``scorer`` (first wins ties), for ``depth`` levels.
    Exactly breadth x depth generate calls."""
    if breadth < 1 or depth < 1:
        raise KragError(f"breadth and depth must be >= 1, got {breadth}, {depth}")
    trace: list[str] = []
    levels: list[tuple[tuple[str, float], ...]] = []
    for _ in range(depth):
        bundle = PromptBundle(Strategy.TOT, problem, steps=tuple(trace))
        stem = compose_prompt(bundle)
        scored = tuple(
            (candidate, scorer(candidate))
            for candidate in (
                generator.generate(f"{stem}\nCandidate {n + 1}:") for n in range(breadth)
            )
        )
        levels.append(scored)
        best, best_score = scored[0]
        for candidate, score in scored[1:]:
            if score > best_score:
                best, best_score = candidate, score
        trace.append(best)
    return trace, CandidateSet(tuple(levels), breadth, depth)


def expand_tree_of_thought(
    problem: str,
    generator: Generator,
    scorer: Callable[[str], float],
    breadth: int,
    depth: int,
) -> list[str]:
    """The depth-long best trace of :func:`tree_of_thought`."""
    return tree_of_thought(problem, generator, scorer, breadth, depth)[0]


def graph_consistency_scorer(
    pattern: InferenceGraph, known_labels: Iterable[str]
) -> Callable[[str], float]:
    """Score a candidate by the fraction of its cited labels present in the
    pattern graph; citing nothing known scores zero."""
    known = sorted(set(known_labels))
    pattern_labels = pattern.labels

    def score(text: str) -> float:
        try:
            canonical = canonicalize_label(text)
        except Exception:
            return 0.0
        cited = [label for label in known if label in canonical]
        if not cited:
            return 0.0
        return sum(1 for label in cited if label in pattern_labels) / len(cited)

    return score

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from krag.generation import (
    EmptyAnswerSetError,
    ExternalGenerator,
    ExternalUnavailableError,
    MissingExemplarError,
    MissingKnowledgeError,
    PromptBundle,
    Strategy,
    TemplateFieldMissingError,
    TemplateGenerator,
    aggregate_self_consistency,
    build_template_prompt,
    compose_prompt,
    expand_tree_of_thought,
    generate,
    graph_consistency_scorer,
    render_template,
)


class TestComposePrompt:
    def test_io_contains_problem_and_header_only(self):
        prompt = compose_prompt(PromptBundle(Strategy.IO, "Can Bob nullify the contract?"))
        assert "Can Bob nullify the contract?" in prompt
        assert prompt.count("Problem:") == 1
        assert "Example:" not in prompt and "Knowledge:" not in prompt

    def test_one_shot_requires_exemplar(self):
        with pytest.raises(MissingExemplarError):
            compose_prompt(PromptBundle(Strategy.ONE_SHOT, "p"))

    def test_one_shot_prepends_exemplar(self):
        prompt = compose_prompt(PromptBundle(Strategy.ONE_SHOT, "p", exemplars=("worked case",)))
        assert prompt.index("worked case") < prompt.index("Problem: p")

    def test_generated_knowledge_requires_knowledge(self):
        with pytest.raises(MissingKnowledgeError):
            compose_prompt(PromptBundle(Strategy.GENERATED_KNOWLEDGE, "p"))

    def test_cot_lists_steps_and_cues_next(self):
        prompt = compose_prompt(PromptBundle(Strategy.COT, "p", steps=("z1", "z2")))
        assert "Step 1: z1" in prompt
        assert "Step 2: z2" in prompt
        assert prompt.rstrip().endswith("Step 3:")

    def test_reasoning_strategies_reduce_to_io_when_bare(self):
        io = compose_prompt(PromptBundle(Strategy.IO, "p"))
        for strategy in (Strategy.COT, Strategy.SELF_CONSISTENCY_COT, Strategy.TOT):
            assert compose_prompt(PromptBundle(strategy, "p")) == io


class TestTemplateGenerator:
    def test_fills_verdict_branch(self):
        template = "[[holds]]can nullify the contract[[fails]]cannot nullify[[end]]"
        prompt = build_template_prompt(template, {"verdict": "holds"})
        assert TemplateGenerator().generate(prompt) == "can nullify the contract"

    def test_deterministic(self):
        prompt = build_template_prompt("{{a}} and {{b}}", {"a": "1", "b": "2"})
        g = TemplateGenerator()
        assert g.generate(prompt) == g.generate(prompt) == "1 and 2"

    def test_missing_field_rejected(self):
        with pytest.raises(TemplateFieldMissingError):
            TemplateGenerator().generate(build_template_prompt("{{missing}}", {}))

    def test_missing_verdict_for_block(self):
        with pytest.raises(TemplateFieldMissingError):
            render_template("[[holds]]a[[fails]]b[[end]]", {})

    def test_external_without_endpoint_unavailable(self):
        with pytest.raises(ExternalUnavailableError):
            generate(ExternalGenerator(""), "prompt")


class TestSelfConsistency:
    def test_majority(self):
        assert aggregate_self_consistency(["A", "A", "B"]) == "A"

    def test_tie_breaks_lexicographically(self):
        assert aggregate_self_consistency(["A", "B"]) == "A"
        assert aggregate_self_consistency(["B", "A"]) == "A"

    def test_singleton(self):
        assert aggregate_self_consistency(["B"]) == "B"

    def test_empty_rejected(self):
        with pytest.raises(EmptyAnswerSetError):
            aggregate_self_consistency([])

    @given(st.lists(st.sampled_from(["Y", "N", "maybe"]), min_size=1, max_size=12))
    def test_permutation_invariant(self, answers):
        winner = aggregate_self_consistency(answers)
        assert aggregate_self_consistency(list(reversed(answers))) == winner
        assert aggregate_self_consistency(sorted(answers)) == winner


class _CountingGenerator:
    backend = "template"

    def __init__(self, outputs):
        self.outputs = outputs
        self.calls = 0

    def generate(self, prompt: str) -> str:
        out = self.outputs[self.calls % len(self.outputs)]
        self.calls += 1
        return out


class TestTreeOfThought:
    def test_degenerate_beam_single_call(self):
        gen = _CountingGenerator(["only"])
        trace = expand_tree_of_thought("p", gen, lambda c: 1.0, breadth=1, depth=1)
        assert trace == ["only"]
        assert gen.calls == 1

    def test_scorer_drives_selection(self):
        gen = _CountingGenerator(["good", "bad"])
        trace = expand_tree_of_thought(
            "p", gen, lambda c: 1.0 if c == "good" else 0.0, breadth=2, depth=2
        )
        assert trace == ["good", "good"]

    def test_exactly_breadth_times_depth_calls(self):
        gen = _CountingGenerator(["a", "b", "c"])
        expand_tree_of_thought("p", gen, len, breadth=3, depth=2)
        assert gen.calls == 6

    def test_candidate_set_records_scored_levels(self):
        from krag.generation import CandidateSet, tree_of_thought

        gen = _CountingGenerator(["a", "bb"])
        trace, candidates = tree_of_thought("p", gen, len, breadth=2, depth=3)
        assert trace == ["bb", "bb", "bb"]
        assert candidates.depth == 3 and candidates.breadth == 2
        assert all(len(level) <= candidates.breadth for level in candidates.levels)
        assert candidates.levels[0] == (("a", 1), ("bb", 2))
        with pytest.raises(Exception):
            CandidateSet(((("x", 1.0), ("y", 2.0)),), breadth=1, depth=1)

    def test_graph_consistency_scorer(self, car_sale_graph):
        scorer = graph_consistency_scorer(
            car_sale_graph, ["seller_ownership", "unrelated_label"]
        )
        assert scorer("the seller ownership condition fails") == 1.0
        assert scorer("something about unrelated label") == 0.0
        assert scorer("nothing cited") == 0.0

"""Repeated-trial evaluation: performance and stability metrics.

Metrics are exact rationals; decimals only appear at formatting time.
Performance has two modes because the headline formula (correct in every
trial over total questions) and the prose reading (average accuracy across
trials) disagree; STRICT_BOTH is the default and reports always show both.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Mapping

from krag.errors import KragError


class EmptyLogError(KragError):
    pass


class MismatchedQuestionSetsError(KragError):
    pass


class SystemFailureError(KragError):
    def __init__(self, question_id: str, trial: int, cause: Exception):
        super().__init__(f"system failed on question {question_id!r}, trial {trial}: {cause}")
        self.question_id = question_id
        self.trial = trial
        self.cause = cause


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    gold: str
    year: str


@dataclass(frozen=True)
class QuestionSet:
    questions: tuple[Question, ...]
    labels: frozenset[str] = frozenset({"Y", "N"})

    def __post_init__(self) -> None:
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise KragError("question ids must be unique")
        for q in self.questions:
            if q.gold not in self.labels:
                raise KragError(f"gold label {q.gold!r} outside domain {sorted(self.labels)}")

    def gold_by_id(self) -> Mapping[str, str]:
        return {q.id: q.gold for q in self.questions}


_YES = {"y", "yes", "true", "correct", "holds", "affirmative"}
_NO = {"n", "no", "false", "incorrect", "fails", "negative"}


def normalize_answer(text: str) -> str:
    """Trim, lowercase, and map yes/no synonyms onto the Y/N label pair."""
    cleaned = text.strip().lower()
    if cleaned in _YES:
        return "Y"
    if cleaned in _NO:
        return "N"
    return cleaned


@dataclass(frozen=True)
class TrialLog:
    """Per-question answers across trials; every question answered in every trial."""

    answers: Mapping[str, tuple[str, ...]]  # question id -> normalized, one per trial
    raw: Mapping[str, tuple[str, ...]]
    trials: int

    def __post_init__(self) -> None:
        for qid, row in self.answers.items():
            if len(row) != self.trials:
                raise KragError(f"question {qid!r} has {len(row)} answers for {self.trials} trials")


def run_trials(
    questions: QuestionSet, system: Callable[[str], str], trials: int = 2
) -> TrialLog:
    """Invoke the system ``trials`` times per question; answers are recorded
    verbatim then normalized. Per-question trial order is sequential."""
    if trials < 2:
        raise KragError(f"stability needs at least 2 trials, got {trials}")
    raw: dict[str, tuple[str, ...]] = {}
    answers: dict[str, tuple[str, ...]] = {}
    for q in questions.questions:
        row: list[str] = []
        for t in range(trials):
            try:
                row.append(system(q.text))
            except Exception as exc:
                raise SystemFailureError(q.id, t + 1, exc) from exc
        raw[q.id] = tuple(row)
        answers[q.id] = tuple(normalize_answer(a) for a in row)
    return TrialLog(answers, raw, trials)


class PerformanceMode(str, Enum):
    STRICT_BOTH = "strict_both"
    AVERAGE = "average"


def _gold_map(gold: QuestionSet | Mapping[str, str]) -> Mapping[str, str]:
    return gold.gold_by_id() if isinstance(gold, QuestionSet) else gold


def performance(
    log: TrialLog,
    gold: QuestionSet | Mapping[str, str],
    mode: PerformanceMode = PerformanceMode.STRICT_BOTH,
) -> Fraction:
    """STRICT_BOTH: questions correct in every trial over all questions.
    AVERAGE: correct answers over all (question, trial) pairs."""
    if not log.answers:
        raise EmptyLogError("trial log holds no questions")
    golds = _gold_map(gold)
    total = len(log.answers)
    if mode is PerformanceMode.STRICT_BOTH:
        hits = sum(
            1 for qid, row in log.answers.items() if all(a == golds[qid] for a in row)
        )
        return Fraction(hits, total)
    hits = sum(
        1 for qid, row in log.answers.items() for a in row if a == golds[qid]
    )
    return Fraction(hits, total * log.trials)


def stability(log: TrialLog) -> Fraction:
    """Questions answered identically in every trial, over all questions;
    blind to correctness."""
    if not log.answers:
        raise EmptyLogError("trial log holds no questions")
    consistent = sum(1 for row in log.answers.values() if len(set(row)) == 1)
    return Fraction(consistent, len(log.answers))


def format_rational(value: Fraction, places: int = 4) -> str:
    """Exact decimal formatting, round half up; floats never enter."""
    scaled = value * 10**places
    quotient, remainder = divmod(scaled.numerator, scaled.denominator)
    if 2 * remainder >= scaled.denominator:
        quotient += 1
    text = str(quotient).rjust(places + 1, "0")
    if places == 0:
        return f"{text}."
    return f"{text[:-places]}.{text[-places:]}"


# ---------------------------------------------------------------------------
# Comparison report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    system: str
    year: str  # "all" for the overall row
    strict: Fraction
    average: Fraction
    stability: Fraction


@dataclass(frozen=True)
class Report:
    rows: tuple[ReportRow, ...]

    def as_table(self) -> str:
        header = f"{'system':<24} {'year':<8} {'strict':>8} {'average':>9} {'stability':>10}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.system:<24} {r.year:<8} {format_rational(r.strict):>8} "
                f"{format_rational(r.average):>9} {format_rational(r.stability):>10}"
            )
        return "\n".join(lines)

    def as_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["system", "year", "performance_strict", "performance_average", "stability"])
        for r in self.rows:
            writer.writerow(
                [r.system, r.year, format_rational(r.strict),
                 format_rational(r.average), format_rational(r.stability)]
            )
        return buf.getvalue()


def _restrict(log: TrialLog, ids: set[str]) -> TrialLog:
    return TrialLog(
        {qid: row for qid, row in log.answers.items() if qid in ids},
        {qid: row for qid, row in log.raw.items() if qid in ids},
        log.trials,
    )


def compare_report(logs: Mapping[str, TrialLog], questions: QuestionSet) -> Report:
    """Per-system metrics plus per-year breakdown; systems ordered by strict
    performance descending, then name."""
    expected = set(questions.gold_by_id())
    for name, log in logs.items():
        if set(log.answers) != expected:
            raise MismatchedQuestionSetsError(
                f"log {name!r} covers different questions than the question set"
            )
    gold = questions.gold_by_id()
    years = sorted({q.year for q in questions.questions})
    overall: list[tuple[str, Fraction, Fraction, Fraction]] = []
    for name, log in logs.items():
        overall.append(
            (
                name,
                performance(log, gold, PerformanceMode.STRICT_BOTH),
                performance(log, gold, PerformanceMode.AVERAGE),
                stability(log),
            )
        )
    overall.sort(key=lambda row: (-row[1], row[0]))
    rows: list[ReportRow] = []
    for name, strict, average, stab in overall:
        rows.append(ReportRow(name, "all", strict, average, stab))
        if len(years) > 1:
            for year in years:
                ids = {q.id for q in questions.questions if q.year == year}
                sub = _restrict(logs[name], ids)
                rows.append(
                    ReportRow(
                        name,
                        year,
                        performance(sub, gold, PerformanceMode.STRICT_BOTH),
                        performance(sub, gold, PerformanceMode.AVERAGE),
                        stability(sub),
                    )
                )
    return Report(tuple(rows))


# ---------------------------------------------------------------------------
# Question CSV loading
# ---------------------------------------------------------------------------


def load_questions(path: str, labels: frozenset[str] = frozenset({"Y", "N"})) -> QuestionSet:
    """CSV with header id,text,gold,year."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = {"id", "text", "gold", "year"} - set(reader.fieldnames or ())
            if missing:
                raise KragError(f"question file missing columns: {sorted(missing)}")
            questions = tuple(
                Question(row["id"], row["text"], normalize_answer(row["gold"]), row["year"])
                for row in reader
            )
    except OSError as exc:
        raise KragError(f"cannot read questions from {path}: {exc}") from exc
    return QuestionSet(questions, labels)

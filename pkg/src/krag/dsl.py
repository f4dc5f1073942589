"""Rule and fact-script language: lexer, recursive-descent parser, printer.

The language covers three block kinds in one ``.sp`` file:

    scenario { party buyer proponent  party seller opponent  party court judge }

    statement refund_due proponent buyer {
      requires: contract_formed, seller_breach, damages_incurred;
      except: force_majeure, approved_extension;
    }

    allege(buyer, contract_formed).
    admission(seller, contract_formed).
    provide_evidence(seller, shipment_on_time, "courier receipt").
    plausible(court, shipment_on_time).

``#`` starts a comment running to end of line. Labels are canonicalized on
the way in, so printed output is already canonical and round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from krag.errors import KragError
from krag.model import (
    InvalidStatementError,
    Party,
    Role,
    Scenario,
    Statement,
    canonicalize_label,
)


class DslError(KragError):
    """Base for rule/fact language errors; carries the offending source line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ParseError(DslError):
    """Token stream does not match the grammar."""

    def __init__(self, line: int, expected: str, found: str):
        super().__init__(f"expected {expected}, found {found}", line)
        self.expected = expected
        self.found = found


class DuplicateStatementError(DslError):
    pass


class UnknownPartyError(DslError):
    pass


class PlausibleByNonJudgeError(DslError):
    pass


class ActKind(str, Enum):
    ALLEGE = "allege"
    PROVIDE_EVIDENCE = "provide_evidence"
    ADMISSION = "admission"
    PLAUSIBLE = "plausible"


@dataclass(frozen=True)
class Act:
    kind: ActKind
    party: str
    fact: str
    note: str | None = None
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FactScript:
    scenario: Scenario | None
    acts: tuple[Act, ...]


@dataclass(frozen=True)
class StatementSet:
    scenario: Scenario | None
    statements: tuple[Statement, ...]


_PUNCT = {
    "{": "LBRACE",
    "}": "RBRACE",
    "(": "LPAREN",
    ")": "RPAREN",
    ",": "COMMA",
    ";": "SEMI",
    ".": "DOT",
    ":": "COLON",
}

_ACT_NAMES = {k.value for k in ActKind}


@dataclass(frozen=True)
class _Token:
    type: str  # NAME | STRING | one of _PUNCT values | EOF
    value: str
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
        elif ch in " \t\r":
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _PUNCT:
            tokens.append(_Token(_PUNCT[ch], ch, line))
            i += 1
        elif ch == '"':
            start_line = line
            i += 1
            buf: list[str] = []
            while i < n and text[i] != '"':
                if text[i] == "\\" and i + 1 < n:
                    buf.append(text[i + 1])
                    i += 2
                elif text[i] == "\n":
                    raise ParseError(start_line, "closing quote", "end of line")
                else:
                    buf.append(text[i])
                    i += 1
            if i >= n:
                raise ParseError(start_line, "closing quote", "end of input")
            i += 1
            tokens.append(_Token("STRING", "".join(buf), start_line))
        elif ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(_Token("NAME", text[start:i], line))
        else:
            raise ParseError(line, "name, punctuation, or string", repr(ch))
    tokens.append(_Token("EOF", "", line))
    return tokens


class _Parser:
    def __init__(self, text: str, scenario: Scenario | None = None):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.scenario = scenario
        self._scenario_from_text = False
        self.statements: list[Statement] = []
        self.acts: list[Act] = []

    # -- token plumbing -------------------------------------------------

    def _peek(self) -> _Token:
        return self.tokens[self.pos]

    def _next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, type_: str, expected: str) -> _Token:
        tok = self._next()
        if tok.type != type_:
            raise ParseError(tok.line, expected, tok.value or tok.type)
        return tok

    def _keyword(self, word: str) -> _Token:
        tok = self._next()
        if tok.type != "NAME" or tok.value != word:
            raise ParseError(tok.line, f"'{word}'", tok.value or tok.type)
        return tok

    def _label(self) -> str:
        tok = self._expect("NAME", "a name")
        return canonicalize_label(tok.value)

    # -- grammar --------------------------------------------------------

    def script(self) -> tuple[StatementSet, FactScript]:
        while True:
            tok = self._peek()
            if tok.type == "EOF":
                break
            if tok.type != "NAME":
                raise ParseError(tok.line, "'scenario', 'statement', or an act", tok.value)
            if tok.value == "scenario":
                if self._scenario_from_text:
                    raise ParseError(tok.line, "a single scenario block", "second 'scenario'")
                self._scenario_block()
                self._scenario_from_text = True
            elif tok.value == "statement":
                self._statement_block()
            elif tok.value in _ACT_NAMES:
                self._act()
            else:
                raise ParseError(tok.line, "'scenario', 'statement', or an act", tok.value)
        return (
            StatementSet(self.scenario, tuple(self.statements)),
            FactScript(self.scenario, tuple(self.acts)),
        )

    def _scenario_block(self) -> None:
        opening = self._keyword("scenario")
        self._expect("LBRACE", "'{'")
        parties: list[Party] = []
        while self._peek().type != "RBRACE":
            self._keyword("party")
            name = self._expect("NAME", "a party name")
            role_tok = self._expect("NAME", "a role (proponent|opponent|judge)")
            try:
                role = Role(role_tok.value)
            except ValueError:
                raise ParseError(
                    role_tok.line, "a role (proponent|opponent|judge)", role_tok.value
                ) from None
            parties.append(Party(name.value, role))
        self._next()  # consume '}'
        if not parties:
            raise ParseError(opening.line, "at least one party declaration", "'}'")
        self.scenario = Scenario(tuple(parties))

    def _require_party(self, name: str, line: int) -> str:
        if self.scenario is None or self.scenario.party(name) is None:
            raise UnknownPartyError(f"party {name!r} is not declared in a scenario", line)
        return name

    def _statement_block(self) -> None:
        self._keyword("statement")
        head_tok = self._expect("NAME", "a statement head")
        head = canonicalize_label(head_tok.value)
        self._keyword("proponent")
        party_tok = self._expect("NAME", "a party name")
        proponent = self._require_party(party_tok.value, party_tok.line)
        self._expect("LBRACE", "'{'")
        requires = self._clause("requires")
        exceptions: tuple[str, ...] = ()
        if self._peek().type == "NAME" and self._peek().value == "except":
            exceptions = self._clause("except")
        self._expect("RBRACE", "'}'")
        try:
            stmt = Statement(head, requires, exceptions, proponent, line=head_tok.line)
        except InvalidStatementError as exc:
            raise ParseError(head_tok.line, "a non-empty statement body", str(exc)) from exc
        if stmt in self.statements:
            raise DuplicateStatementError(f"statement {head!r} repeats an earlier one", head_tok.line)
        self.statements.append(stmt)

    def _clause(self, keyword: str) -> tuple[str, ...]:
        self._keyword(keyword)
        self._expect("COLON", "':'")
        names = [self._label()]
        while self._peek().type == "COMMA":
            self._next()
            names.append(self._label())
        self._expect("SEMI", "';'")
        return tuple(names)

    def _act(self) -> None:
        kind_tok = self._next()
        kind = ActKind(kind_tok.value)
        self._expect("LPAREN", "'('")
        party_tok = self._expect("NAME", "a party name")
        party = self._require_party(party_tok.value, party_tok.line)
        self._expect("COMMA", "','")
        fact = self._label()
        note: str | None = None
        if kind is ActKind.PROVIDE_EVIDENCE:
            self._expect("COMMA", "','")
            note = self._expect("STRING", "a quoted note").value
        self._expect("RPAREN", "')'")
        self._expect("DOT", "'.'")
        if kind is ActKind.PLAUSIBLE:
            assert self.scenario is not None  # _require_party guarantees it
            if self.scenario.party(party).role is not Role.JUDGE:
                raise PlausibleByNonJudgeError(
                    f"plausible ruling by non-judge party {party!r}", kind_tok.line
                )
        self.acts.append(Act(kind, party, fact, note, line=kind_tok.line))


def parse_script(text: str) -> tuple[StatementSet, FactScript]:
    """Parse a full script into its statement and fact views."""
    return _Parser(text).script()


def parse_statements(text: str) -> StatementSet:
    return parse_script(text)[0]


def parse_facts(text: str, scenario: Scenario | None = None) -> FactScript:
    """Parse courtroom acts. A scenario block in ``text`` wins; otherwise the
    caller-provided one validates party names."""
    _, script = _Parser(text, scenario=scenario).script()
    return script


def print_statements(sset: StatementSet) -> str:
    """Canonical text form; re-parses to an equal StatementSet."""
    blocks: list[str] = []
    if sset.scenario is not None:
        parties = "\n".join(f"  party {p.id} {p.role.value}" for p in sset.scenario.parties)
        blocks.append("scenario {\n" + parties + "\n}")
    for s in sset.statements:
        lines = [f"statement {s.head} proponent {s.proponent} {{"]
        if s.requires:
            lines.append("  requires: " + ", ".join(s.requires) + ";")
        if s.exceptions:
            lines.append("  except: " + ", ".join(s.exceptions) + ";")
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def print_facts(script: FactScript) -> str:
    """Canonical text form of a fact script, scenario included."""
    lines: list[str] = []
    if script.scenario is not None:
        parties = "\n".join(f"  party {p.id} {p.role.value}" for p in script.scenario.parties)
        lines.append("scenario {\n" + parties + "\n}\n")
    for act in script.acts:
        if act.kind is ActKind.PROVIDE_EVIDENCE:
            note = (act.note or "").replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'provide_evidence({act.party}, {act.fact}, "{note}").')
        else:
            lines.append(f"{act.kind.value}({act.party}, {act.fact}).")
    return "\n".join(lines) + ("\n" if lines else "")

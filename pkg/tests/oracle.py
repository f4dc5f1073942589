"""Independent brute-force evaluator used as the oracle for verdict tests.

Deliberately shares no code with the engine: works on plain tuples and
dicts, resolves labels bottom-up by fixpoint iteration instead of memoized
recursion, and re-derives fact establishment from raw acts.
"""

from __future__ import annotations

HOLDS = "holds"
FAILS = "fails"


def establish(fact: str, acts: list[tuple], roles: dict[str, str], bearer: str) -> bool:
    """(kind, party, fact) acts -> established? Re-derivation from scratch."""
    alleged = {p for kind, p, f in acts if kind == "allege" and f == fact}
    evidenced = {p for kind, p, f in acts if kind == "provide_evidence" and f == fact}
    admitted = {p for kind, p, f in acts if kind == "admission" and f == fact}
    plausible = any(kind == "plausible" and f == fact for kind, _, f in acts)
    if bearer not in alleged:
        return False
    bearer_role = roles[bearer]
    adverse = {"proponent": "opponent", "opponent": "proponent"}[bearer_role]
    if any(roles.get(p) == adverse for p in admitted):
        return True
    return bearer in evidenced and plausible


def burdens(statements: list[tuple], roles: dict[str, str]) -> dict[str, str]:
    """(head, requires, excepts, proponent) -> fact label -> bearing party.

    Party flips to the first-declared adversary at each exception crossing.
    Assumes unambiguous inputs (one parity per label).
    """
    first_of_role: dict[str, str] = {}
    for party, role in roles.items():
        first_of_role.setdefault(role, party)

    def flip(party: str) -> str:
        other = {"proponent": "opponent", "opponent": "proponent"}[roles[party]]
        return first_of_role[other]

    defs: dict[str, list[tuple]] = {}
    referenced: set[str] = set()
    for head, requires, excepts, proponent in statements:
        defs.setdefault(head, []).append((head, requires, excepts, proponent))
        referenced.update(requires)
        referenced.update(excepts)

    context: dict[str, str] = {}
    queue = [(head, defs[head][0][3]) for head in defs if head not in referenced]
    while queue:
        label, party = queue.pop()
        if label in context:
            continue
        context[label] = party
        for _, requires, excepts, _ in defs.get(label, []):
            for r in requires:
                queue.append((r, party))
            for e in excepts:
                queue.append((e, flip(party)))
    return {label: party for label, party in context.items() if label not in defs}


def evaluate_labels(
    statements: list[tuple],
    acts: list[tuple],
    roles: dict[str, str],
    bearer_by_fact: dict[str, str],
) -> dict[str, str]:
    """Label -> holds/fails by bottom-up fixpoint over all alternatives."""
    defs: dict[str, list[tuple]] = {}
    labels: set[str] = set()
    for head, requires, excepts, proponent in statements:
        defs.setdefault(head, []).append((head, requires, excepts, proponent))
        labels.add(head)
        labels.update(requires)
        labels.update(excepts)

    status: dict[str, str] = {}
    for label in labels:
        if label not in defs:
            ok = establish(label, acts, roles, bearer_by_fact[label])
            status[label] = HOLDS if ok else FAILS

    remaining = {label for label in labels if label in defs}
    while remaining:
        progressed = False
        for label in sorted(remaining):
            children = set()
            for _, requires, excepts, _ in defs[label]:
                children.update(requires)
                children.update(excepts)
            if not children <= set(status):
                continue
            holds = False
            for _, requires, excepts, _ in defs[label]:
                if all(status[r] == HOLDS for r in requires) and all(
                    status[e] == FAILS for e in excepts
                ):
                    holds = True
                    break
            status[label] = HOLDS if holds else FAILS
            remaining.discard(label)
            progressed = True
        if not progressed:
            raise AssertionError(f"cyclic statements reached the oracle: {sorted(remaining)}")
    return status

"""Subgoal plans: the planner's ordered lemma decomposition.

A plan is a sequence of named subgoal entries, each a proposition the prover
must establish. Proof order is strictly sequential: Proven entries always
form a prefix of the plan. Parsing accepts planner responses as free text
and extracts `have <name> : <proposition>` lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

from ..model import TacticCandidate

__all__ = [
    "SubgoalStatus",
    "SubgoalEntry",
    "SubgoalPlan",
    "parse_have_statements",
    "plan_to_record",
    "plan_from_record",
]

_FENCED_BLOCK = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
# name stops at whitespace or ':'; ':=' does not count as the type colon
_HAVE_LINE = re.compile(r"^\s*have\s+([^\s:]+)\s*:(?!=)\s*(.*)$")
_WS = re.compile(r"\s+")


class SubgoalStatus(Enum):
    PENDING = "Pending"
    PROVING = "Proving"
    PROVEN = "Proven"
    STUCK = "Stuck"


@dataclass(frozen=True)
class SubgoalEntry:
    index: int
    name: str
    proposition: str
    status: SubgoalStatus = SubgoalStatus.PENDING
    proof: tuple[TacticCandidate, ...] | None = None
    prover_id: int | None = None

    def __post_init__(self) -> None:
        if (self.status is SubgoalStatus.PROVEN) != (self.proof is not None):
            raise ValueError("proof present iff status is Proven")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.name, self.proposition)

    def as_have(self) -> str:
        return f"have {self.name} : {self.proposition}"


@dataclass(frozen=True)
class SubgoalPlan:
    theorem_id: str
    entries: tuple[SubgoalEntry, ...]
    revision: int = 0

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate subgoal names: {names}")
        for position, entry in enumerate(self.entries):
            if entry.index != position:
                raise ValueError(f"entry {entry.name} has index {entry.index}, expected {position}")
        # proof order is sequential: Proven entries form a prefix
        seen_unproven = False
        for entry in self.entries:
            if entry.status is not SubgoalStatus.PROVEN:
                seen_unproven = True
            elif seen_unproven:
                raise ValueError(f"Proven entry {entry.name} follows an unproven one")

    @property
    def first_unproven(self) -> int | None:
        for entry in self.entries:
            if entry.status is not SubgoalStatus.PROVEN:
                return entry.index
        return None

    @property
    def proven_entries(self) -> tuple[SubgoalEntry, ...]:
        return tuple(e for e in self.entries if e.status is SubgoalStatus.PROVEN)

    def as_have_block(self) -> str:
        return "\n".join(e.as_have() for e in self.entries)

    def with_entry(self, entry: SubgoalEntry) -> "SubgoalPlan":
        entries = list(self.entries)
        entries[entry.index] = entry
        return replace(self, entries=tuple(entries))


def parse_have_statements(response_text: str) -> list[tuple[str, str]]:
    """Extract (name, proposition) pairs from a planner response.

    Looks inside the last fenced code block, or the whole text when there is
    none. A line contributes iff it matches `have <name> : <proposition>`
    (leading whitespace allowed); a trailing ":= by ..." is stripped. Order
    is preserved; an empty result is legal and left to the caller to judge.
    """
    blocks = _FENCED_BLOCK.findall(response_text)
    text = blocks[-1] if blocks else response_text
    out: list[tuple[str, str]] = []
    for line in text.splitlines():
        match = _HAVE_LINE.match(line)
        if not match:
            continue
        name = match.group(1)
        prop = match.group(2)
        cut = prop.find(":=")
        if cut != -1:
            prop = prop[:cut]
        prop = _WS.sub(" ", prop).strip()
        if prop:
            out.append((name, prop))
    return out


def plan_to_record(plan: SubgoalPlan) -> dict:
    return {
        "theorem_id": plan.theorem_id,
        "revision": plan.revision,
        "entries": [
            {
                "index": e.index,
                "name": e.name,
                "proposition": e.proposition,
                "status": e.status.value,
                "proof": None
                if e.proof is None
                else [
                    {"tactic": c.tactic, "logprob": c.logprob, "token_count": c.token_count}
                    for c in e.proof
                ],
                "prover_id": e.prover_id,
            }
            for e in plan.entries
        ],
    }


def plan_from_record(record: dict) -> SubgoalPlan:
    entries = tuple(
        SubgoalEntry(
            index=item["index"],
            name=item["name"],
            proposition=item["proposition"],
            status=SubgoalStatus(item["status"]),
            proof=None
            if item.get("proof") is None
            else tuple(
                TacticCandidate(c["tactic"], c["logprob"], c["token_count"])
                for c in item["proof"]
            ),
            prover_id=item.get("prover_id"),
        )
        for item in record["entries"]
    )
    return SubgoalPlan(
        theorem_id=record["theorem_id"], entries=entries, revision=record["revision"]
    )

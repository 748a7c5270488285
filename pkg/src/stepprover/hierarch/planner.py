"""Planner contract, prompt templates, and plan construction.

A planner is a text completer: it receives an instantiated prompt and
answers with free text from which `have` statements are parsed. The remote
implementation fronts a reasoning-model server; the scripted one replays
canned responses for tests; the toy chain planner decomposes toy equations
through their rewrite normal form so the whole hierarchical loop runs with
no model at all.

Planner responses are validated, never trusted: initial plans must parse to
at least one subgoal, refined plans must keep every existing entry, keep
Proven entries Proven, reset the stuck entry to Pending, and insert new
entries only before the stuck one. Invalid responses are retried, then
surfaced as errors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, Sequence

import requests

from ..toyenv.oracle import oracle_solve
from ..toyenv.terms import (
    Term,
    normalization_trace,
    parse_equation,
    print_equation,
)
from .cache import InvalidRefinedPlan
from .plan import SubgoalEntry, SubgoalPlan, SubgoalStatus, parse_have_statements

__all__ = [
    "Planner",
    "PlannerUnavailable",
    "NoSubgoalsParsed",
    "ReplanLimitExceeded",
    "InvalidRefinedPlan",
    "ScriptedPlanner",
    "RemotePlanner",
    "ToyChainPlanner",
    "plan_initial",
    "replan",
    "initial_planning_prompt",
    "replanning_prompt",
    "PROMPT_VERSION",
]

PROMPT_VERSION = 1

SLOT_MARKER = "Now, use the same process"


class PlannerUnavailable(RuntimeError):
    """The planner cannot be reached (after retries, for remote planners)."""


class NoSubgoalsParsed(ValueError):
    """The planner's response contained no parseable have statements."""


class ReplanLimitExceeded(RuntimeError):
    """All allowed replanning attempts produced invalid plans."""


class Planner(Protocol):
    def complete(self, prompt: str) -> str: ...


def _template(name: str) -> str:
    return resources.files("stepprover.hierarch").joinpath(f"prompts/{name}").read_text(
        encoding="utf-8"
    )


def initial_planning_prompt(theorem_statement: str, root_state_text: str) -> str:
    body = theorem_statement if not root_state_text else f"{theorem_statement}\n{root_state_text}"
    # .replace, not .format: templates legitimately contain literal braces
    return _template("initial_planning.txt").replace("{theorem}", body)


def replanning_prompt(theorem_statement: str, plan: SubgoalPlan, stuck_index: int) -> str:
    template = _template("dynamic_replanning.txt")
    return (
        template.replace("{theorem}", theorem_statement)
        .replace("{initial_plan}", plan.as_have_block())
        .replace("{stuck_subgoal}", plan.entries[stuck_index].as_have())
    )


@dataclass
class ScriptedPlanner:
    """Replays canned responses in order; for tests."""

    responses: Sequence[str]
    _cursor: int = 0

    def complete(self, prompt: str) -> str:
        if self._cursor >= len(self.responses):
            raise PlannerUnavailable("scripted planner ran out of responses")
        text = self.responses[self._cursor]
        self._cursor += 1
        return text


@dataclass
class RemotePlanner:
    """Client for a completion server: POST {endpoint}/complete with
    {"prompt": ...}, expecting {"text": ...}."""

    endpoint: str
    timeout_s: float = 120.0
    attempts: int = 3
    backoff_base_s: float = 0.2

    def complete(self, prompt: str) -> str:
        url = self.endpoint.rstrip("/") + "/complete"
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                response = requests.post(url, json={"prompt": prompt}, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = PlannerUnavailable(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise PlannerUnavailable(f"planner endpoint returned {response.status_code}")
            body = response.json()
            if not isinstance(body, dict) or not isinstance(body.get("text"), str):
                raise PlannerUnavailable("planner response missing text field")
            return body["text"]
        raise PlannerUnavailable(f"planner endpoint unreachable: {last_error}")


# --- toy chain planner -------------------------------------------------------


@dataclass
class ToyChainPlanner:
    """Decomposes a toy equation into a chain of intermediate equations.

    Waypoints descend the left side's rewrite path to its normal form every
    segment_length steps, then one link crosses to the right side. Segments
    must point downhill: a link "x = y" is cheap exactly when y lies on x's
    rewrite path (the left side of an equation is rewritten first, so x
    passes through y and refl closes), or when x is already normal (rules
    then fall through to the right side). Every link is verified against the
    oracle before it is emitted; if any fails the planner declines to plan.

    Replanning refines a stuck link with the same construction at a finer
    segment length. Talks the same text protocol as any other planner: it
    reads its inputs back out of the instantiated prompt.
    """

    segment_length: int = 4
    replan_segment_length: int | None = None
    oracle_margin: int = 2

    def complete(self, prompt: str) -> str:
        section = prompt[prompt.rfind(SLOT_MARKER) :]
        haves = parse_have_statements(section)
        theorem = self._find_equation_line(section)
        if theorem is None:
            return "I could not identify the theorem to decompose."
        if haves:
            plan_pairs, stuck = haves[:-1], haves[-1]
            return self._refine(theorem, plan_pairs, stuck)
        return self._initial(theorem)

    @staticmethod
    def _find_equation_line(section: str) -> tuple[Term, Term] | None:
        for line in section.splitlines():
            line = line.strip()
            if line.startswith("⊢ "):
                line = line[2:]
            if not line or line.startswith(("have ", "You must", SLOT_MARKER)):
                continue
            try:
                return parse_equation(line)
            except ValueError:
                continue
        return None

    def _links(self, lhs: Term, rhs: Term, segment_length: int) -> list[str] | None:
        down = normalization_trace(lhs)
        if rhs in down:
            down = down[: down.index(rhs) + 1]  # rhs sits on lhs's own path
            cross_bound = None
        else:
            up = normalization_trace(rhs)
            if down[-1] != up[-1]:
                return None  # sides disagree; nothing to decompose
            cross_bound = len(up)  # final link: normal form = rhs
        waypoints = [down[i] for i in range(0, len(down), segment_length)]
        if waypoints[-1] != down[-1]:
            waypoints.append(down[-1])
        bounds = [segment_length + 1] * (len(waypoints) - 1)
        if cross_bound is not None:
            waypoints.append(rhs)
            bounds.append(cross_bound + 1)
        if len(waypoints) - 1 <= 1:
            return None  # a single link is the theorem itself
        links = []
        for left, right, bound in zip(waypoints, waypoints[1:], bounds):
            link = print_equation((left, right))
            if oracle_solve(link, bound + self.oracle_margin) is None:
                return None
            links.append(link)
        return links

    def _initial(self, theorem: tuple[Term, Term]) -> str:
        links = self._links(theorem[0], theorem[1], self.segment_length)
        if not links:
            return "No decomposition needed; prove the goal directly."
        lines = "\n".join(f"  have h{i + 1} : {link}" for i, link in enumerate(links))
        return f"Plan:\n```\n{lines}\n```"

    def _refine(
        self,
        theorem: tuple[Term, Term],
        plan_pairs: list[tuple[str, str]],
        stuck: tuple[str, str],
    ) -> str:
        length = self.replan_segment_length or max(1, self.segment_length // 2)
        try:
            lhs, rhs = parse_equation(stuck[1])
        except ValueError:
            return "I could not parse the stuck subgoal."
        links = self._links(lhs, rhs, length)
        new_names = 0
        lines = []
        existing = {name for name, _ in plan_pairs}
        for name, prop in plan_pairs:
            if (name, prop) == stuck:
                # the finer links go immediately before the stuck entry;
                # the last link is the stuck goal's own tail and is implied
                for link in links[:-1] if links else []:
                    new_names += 1
                    fresh = self._fresh_name(existing, new_names)
                    existing.add(fresh)
                    lines.append(f"  have {fresh} : {link}")
            lines.append(f"  have {name} : {prop}")
        return "Refined plan:\n```\n" + "\n".join(lines) + "\n```"

    @staticmethod
    def _fresh_name(existing: set[str], counter: int) -> str:
        name = f"hr{counter}"
        while name in existing:
            name = name + "x"
        return name


# --- plan construction -------------------------------------------------------


def plan_initial(
    planner: Planner,
    theorem_statement: str,
    root_state_text: str,
    theorem_id: str = "thm",
) -> SubgoalPlan:
    """Query the planner with the initial-planning prompt and wrap the parsed
    subgoals into a revision-0 plan with every entry Pending. Colliding names
    are replaced wholesale by h1..hk."""
    response = planner.complete(initial_planning_prompt(theorem_statement, root_state_text))
    pairs = parse_have_statements(response)
    if not pairs:
        raise NoSubgoalsParsed(f"no have statements in planner response for {theorem_id}")
    names = [name for name, _ in pairs]
    if len(set(names)) != len(names):
        names = [f"h{i + 1}" for i in range(len(pairs))]
    entries = tuple(
        SubgoalEntry(index=i, name=names[i], proposition=prop)
        for i, (_, prop) in enumerate(pairs)
    )
    return SubgoalPlan(theorem_id=theorem_id, entries=entries, revision=0)


def _validate_refined(
    plan: SubgoalPlan, stuck_index: int, pairs: list[tuple[str, str]]
) -> SubgoalPlan:
    old_pairs = [e.pair for e in plan.entries]
    stuck_pair = plan.entries[stuck_index].pair

    # every old entry must survive, in order (subsequence check)
    cursor = 0
    positions: dict[int, int] = {}
    for new_pos, pair in enumerate(pairs):
        if cursor < len(old_pairs) and pair == old_pairs[cursor]:
            positions[cursor] = new_pos
            cursor += 1
    if cursor != len(old_pairs):
        missing = old_pairs[cursor]
        raise InvalidRefinedPlan(f"refined plan dropped entry {missing[0]!r}")

    stuck_pos = positions[stuck_index]
    old_positions = set(positions.values())
    entries: list[SubgoalEntry] = []
    used_names = set()
    inverse = {new_pos: old_index for old_index, new_pos in positions.items()}
    for new_pos, (name, prop) in enumerate(pairs):
        if new_pos in old_positions:
            old = plan.entries[inverse[new_pos]]
            status = SubgoalStatus.PENDING if old.index == stuck_index else old.status
            proof = None if old.index == stuck_index else old.proof
            prover = None if old.index == stuck_index else old.prover_id
            entries.append(
                SubgoalEntry(
                    index=len(entries),
                    name=old.name,
                    proposition=old.proposition,
                    status=status,
                    proof=proof,
                    prover_id=prover,
                )
            )
            used_names.add(old.name)
        else:
            if new_pos > stuck_pos:
                raise InvalidRefinedPlan(
                    f"new entry {name!r} inserted after the stuck subgoal"
                )
            fresh = name
            suffix = 1
            while fresh in used_names or any(fresh == p[0] for p in old_pairs):
                fresh = f"{name}_{suffix}"
                suffix += 1
            used_names.add(fresh)
            entries.append(
                SubgoalEntry(index=len(entries), name=fresh, proposition=prop)
            )
    return SubgoalPlan(
        theorem_id=plan.theorem_id, entries=tuple(entries), revision=plan.revision + 1
    )


def replan(
    planner: Planner,
    theorem_statement: str,
    plan: SubgoalPlan,
    stuck_index: int,
    max_replans: int = 3,
) -> SubgoalPlan:
    """Re-query the planner about a Stuck entry and validate the refined plan.

    The refined plan must contain all existing entries in order, with new
    entries only before the stuck one; Proven entries keep their proofs and
    the stuck entry resets to Pending. Responses violating this are rejected
    and the planner is re-queried, up to max_replans times.
    """
    entry = plan.entries[stuck_index]
    if entry.status is not SubgoalStatus.STUCK:
        raise ValueError(f"entry {entry.name} is {entry.status.value}, not Stuck")
    prompt = replanning_prompt(theorem_statement, plan, stuck_index)
    last: Exception | None = None
    for _ in range(max(1, max_replans)):
        response = planner.complete(prompt)
        pairs = parse_have_statements(response)
        try:
            return _validate_refined(plan, stuck_index, pairs)
        except InvalidRefinedPlan as exc:
            last = exc
    raise ReplanLimitExceeded(f"no valid refined plan after {max_replans} attempts: {last}")

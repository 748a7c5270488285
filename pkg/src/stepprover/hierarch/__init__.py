"""Planner-guided multi-agent search: subgoal plans, the shared cache,
cooperative sprints with first-proof cancellation, and dynamic replanning."""

from .cache import CacheTransition, InvalidRefinedPlan, SharedSubgoalCache
from .guided import GuidedConfig, GuidedResult, ProofOutline, run_planner_guided
from .plan import (
    SubgoalEntry,
    SubgoalPlan,
    SubgoalStatus,
    parse_have_statements,
    plan_from_record,
    plan_to_record,
)
from .planner import (
    NoSubgoalsParsed,
    Planner,
    PlannerUnavailable,
    RemotePlanner,
    ReplanLimitExceeded,
    ScriptedPlanner,
    ToyChainPlanner,
    initial_planning_prompt,
    plan_initial,
    replan,
    replanning_prompt,
)
from .sprint import (
    SharedCounter,
    SprintOutcome,
    SprintReport,
    augment_context,
    run_cooperative_sprint,
    run_free_sprint,
)

__all__ = [
    "CacheTransition",
    "GuidedConfig",
    "GuidedResult",
    "InvalidRefinedPlan",
    "NoSubgoalsParsed",
    "Planner",
    "PlannerUnavailable",
    "ProofOutline",
    "RemotePlanner",
    "ReplanLimitExceeded",
    "ScriptedPlanner",
    "SharedCounter",
    "SharedSubgoalCache",
    "SprintOutcome",
    "SprintReport",
    "SubgoalEntry",
    "SubgoalPlan",
    "SubgoalStatus",
    "ToyChainPlanner",
    "augment_context",
    "initial_planning_prompt",
    "parse_have_statements",
    "plan_from_record",
    "plan_initial",
    "plan_to_record",
    "replan",
    "replanning_prompt",
    "run_cooperative_sprint",
    "run_free_sprint",
    "run_planner_guided",
]

"""Declarative run configuration: one JSON file captures everything a run
needs; CLI flags override individual fields (flags win). Every numeric field
is validated at load time and errors name the offending field path, e.g.
"search.temperature".
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .curation import FilterConfig, IterationConfig, NllStatistic
from .hierarch.guided import GuidedConfig
from .search import SearchBudget, SearchSettings

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULT_CONFIG"]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; message starts with the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SearchSection:
    width: int = 3
    temperature: float = 1.3
    alpha: float = 2.0
    max_expansions: int = 300
    max_depth: int = 8
    max_wall_ms: int | None = None


@dataclass(frozen=True)
class FilterSection:
    q_lo: float = 0.10
    q_hi: float = 0.90
    statistic: str = "PerTokenNll"
    aggressive_q_lo: float = 0.25
    aggressive_q_hi: float = 0.75


@dataclass(frozen=True)
class PlateauSection:
    window: int = 3
    epsilon: float = 0.005


@dataclass(frozen=True)
class BudgetSection:
    max_expansions: int = 100
    max_depth: int = 8
    max_wall_ms: int | None = None


@dataclass(frozen=True)
class HierarchSection:
    pool_size: int = 4
    per_subgoal_budget: BudgetSection = BudgetSection()
    final_budget: BudgetSection | None = None
    max_replans: int = 3


@dataclass(frozen=True)
class EndpointsSection:
    policy_url: str | None = None
    planner_url: str | None = None
    env: str = "toy"  # "toy" or "wire:<host>:<port>"


@dataclass(frozen=True)
class RunConfig:
    config_version: int = CONFIG_VERSION
    seed: int = 0
    workers: int = 4
    eval_fraction: float = 0.25
    smoothing_alpha: float = 1.0
    search: SearchSection = SearchSection()
    filter: FilterSection = FilterSection()
    plateau: PlateauSection = PlateauSection()
    hierarch: HierarchSection = HierarchSection()
    endpoints: EndpointsSection = EndpointsSection()

    # -- conversions to the engine-facing configs -------------------------

    def search_settings(self) -> SearchSettings:
        return SearchSettings(
            budget=SearchBudget(
                max_expansions=self.search.max_expansions,
                max_depth=self.search.max_depth,
                max_wall_ms=self.search.max_wall_ms,
            ),
            width=self.search.width,
            temperature=self.search.temperature,
            alpha=self.search.alpha,
        )

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            q_lo=self.filter.q_lo,
            q_hi=self.filter.q_hi,
            statistic=NllStatistic(self.filter.statistic),
            aggressive_q_lo=self.filter.aggressive_q_lo,
            aggressive_q_hi=self.filter.aggressive_q_hi,
        )

    def guided_config(self) -> GuidedConfig:
        h = self.hierarch
        final = None
        if h.final_budget is not None:
            final = SearchBudget(
                h.final_budget.max_expansions,
                h.final_budget.max_depth,
                h.final_budget.max_wall_ms,
            )
        return GuidedConfig(
            pool_size=h.pool_size,
            per_subgoal_budget=SearchBudget(
                h.per_subgoal_budget.max_expansions,
                h.per_subgoal_budget.max_depth,
                h.per_subgoal_budget.max_wall_ms,
            ),
            final_budget=final,
            max_replans=h.max_replans,
        )

    def iteration_config(self) -> IterationConfig:
        return IterationConfig(
            search=self.search_settings(),
            filter=self.filter_config(),
            plateau_window=self.plateau.window,
            plateau_epsilon=self.plateau.epsilon,
            eval_fraction=self.eval_fraction,
            smoothing_alpha=self.smoothing_alpha,
            workers=self.workers,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


DEFAULT_CONFIG = RunConfig()


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ConfigError(path, message)


def _check_budget(budget: BudgetSection, path: str) -> None:
    _require(budget.max_expansions >= 1, f"{path}.max_expansions", "must be >= 1")
    _require(budget.max_depth >= 1, f"{path}.max_depth", "must be >= 1")
    if budget.max_wall_ms is not None:
        _require(budget.max_wall_ms >= 1, f"{path}.max_wall_ms", "must be >= 1 when set")


def validate(config: RunConfig) -> RunConfig:
    _require(
        config.config_version == CONFIG_VERSION,
        "config_version",
        f"expected {CONFIG_VERSION}, got {config.config_version}",
    )
    _require(config.workers >= 1, "workers", "must be >= 1")
    _require(0.0 <= config.eval_fraction < 1.0, "eval_fraction", "must be in [0, 1)")
    _require(config.smoothing_alpha > 0, "smoothing_alpha", "must be > 0")

    s = config.search
    _require(s.width >= 1, "search.width", "must be >= 1")
    _require(s.temperature > 0, "search.temperature", "must be > 0")
    _require(s.alpha >= 0, "search.alpha", "must be >= 0")
    _check_budget(
        BudgetSection(s.max_expansions, s.max_depth, s.max_wall_ms), "search"
    )

    f = config.filter
    _require(0.0 <= f.q_lo < f.q_hi <= 1.0, "filter.q_lo", "need 0 <= q_lo < q_hi <= 1")
    _require(
        f.statistic in {m.value for m in NllStatistic},
        "filter.statistic",
        f"must be one of {sorted(m.value for m in NllStatistic)}",
    )
    _require(
        f.q_lo < f.aggressive_q_lo < f.aggressive_q_hi < f.q_hi,
        "filter.aggressive_q_lo",
        "aggressive bounds must lie strictly inside the normal bounds",
    )

    _require(config.plateau.window >= 2, "plateau.window", "must be >= 2")
    _require(config.plateau.epsilon > 0, "plateau.epsilon", "must be > 0")

    h = config.hierarch
    _require(h.pool_size >= 1, "hierarch.pool_size", "must be >= 1")
    _require(h.max_replans >= 0, "hierarch.max_replans", "must be >= 0")
    _check_budget(h.per_subgoal_budget, "hierarch.per_subgoal_budget")
    if h.final_budget is not None:
        _check_budget(h.final_budget, "hierarch.final_budget")

    env = config.endpoints.env
    if env != "toy":
        _require(
            env.startswith("wire:") and len(env.split(":")) == 3,
            "endpoints.env",
            'must be "toy" or "wire:<host>:<port>"',
        )
    return config


def _section(cls, data, path: str):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(path, f"must be an object, got {type(data).__name__}")
    known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    return data


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Load a config file (defaults when path is None) and apply overrides
    given as {"search.temperature": 1.0, ...}; flags win over the file."""
    data: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"invalid JSON: {exc.msg}")
        if not isinstance(data, dict):
            raise ConfigError("<file>", "config must be a JSON object")

    try:
        hierarch_data = _section(HierarchSection, data.get("hierarch"), "hierarch") or {}
        per_budget = _section(
            BudgetSection,
            hierarch_data.get("per_subgoal_budget"),
            "hierarch.per_subgoal_budget",
        )
        final_budget = _section(
            BudgetSection, hierarch_data.get("final_budget"), "hierarch.final_budget"
        )
        config = RunConfig(
            config_version=data.get("config_version", CONFIG_VERSION),
            seed=data.get("seed", 0),
            workers=data.get("workers", 4),
            eval_fraction=data.get("eval_fraction", 0.25),
            smoothing_alpha=data.get("smoothing_alpha", 1.0),
            search=SearchSection(**(_section(SearchSection, data.get("search"), "search") or {})),
            filter=FilterSection(**(_section(FilterSection, data.get("filter"), "filter") or {})),
            plateau=PlateauSection(
                **(_section(PlateauSection, data.get("plateau"), "plateau") or {})
            ),
            hierarch=HierarchSection(
                pool_size=hierarch_data.get("pool_size", 4),
                per_subgoal_budget=BudgetSection(**(per_budget or {})),
                final_budget=BudgetSection(**final_budget) if final_budget is not None else None,
                max_replans=hierarch_data.get("max_replans", 3),
            ),
            endpoints=EndpointsSection(
                **(_section(EndpointsSection, data.get("endpoints"), "endpoints") or {})
            ),
        )
    except TypeError as exc:
        raise ConfigError("<file>", str(exc))

    if overrides:
        config = apply_overrides(config, overrides)
    return validate(config)


def apply_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Dotted-path overrides onto the frozen config tree."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        parts = dotted.split(".")
        if len(parts) == 1:
            if not hasattr(config, parts[0]):
                raise ConfigError(dotted, "unknown field")
            config = replace(config, **{parts[0]: value})
        elif len(parts) == 2:
            section = getattr(config, parts[0], None)
            if section is None or not hasattr(section, parts[1]):
                raise ConfigError(dotted, "unknown field")
            config = replace(config, **{parts[0]: replace(section, **{parts[1]: value})})
        else:
            raise ConfigError(dotted, "override paths have at most two segments")
    return config

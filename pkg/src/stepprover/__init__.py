"""Step-level proof search engine.

Subsystems:
  model     -- MDP value objects (states, tactics, trajectories, rewards)
  toyenv    -- deterministic toy formal system + brute-force oracle
  policy    -- tactic generation contract; scripted, tabular, and remote policies
  search    -- best-first proof tree search with length-normalized priorities
  hierarch  -- planner-guided multi-agent subgoal search with a shared cache
  curation  -- perplexity filtering, plateau detection, expert-iteration driver
  wire      -- line-delimited environment protocol (server and client)
  cli       -- operator commands (prove / iterate / curate / eval / serve-env)
"""

__version__ = "0.1.0"

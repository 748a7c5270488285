/**
 * Trajectory replay: apply a recorded tactic list in order and report
 * whether the proof closes. The machine-checked way to trust a stored
 * proof.
 */

import { GoalState, ReplSession } from "./repl";

export async function replayProof(
  replCommand: string[],
  theorem: string,
  tactics: string[]
): Promise<boolean> {
  const repl = new ReplSession(replCommand);
  try {
    let state: GoalState = await repl.init(theorem);
    for (const tactic of tactics) {
      if (state.goals.length === 0) return false; // proof closed too early
      const outcome = await repl.applyTactic(state.proofState, tactic);
      if (typeof outcome === "string") return false; // tactic failed
      state = outcome;
    }
    return state.goals.length === 0;
  } finally {
    repl.close();
  }
}

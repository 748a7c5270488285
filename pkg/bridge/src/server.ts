/**
 * Environment wire protocol server on stdio, backed by one REPL child
 * process per session.
 *
 *   {"cmd":"init","theorem":S}                              -> {"ok":true,"session":N,"state_id":0,"state":T}
 *   {"cmd":"apply","session":N,"state_id":I,"tactic":X}     -> {"ok":true,"proved":false,"state_id":J,"state":T}
 *                                                            | {"ok":true,"proved":true} | {"ok":false,"error":E}
 *   {"cmd":"augment","session":N,"state_id":I,"name":H,"prop":P} -> same shape as apply
 *   {"cmd":"close","session":N}                             -> {"ok":true}
 *
 * Protocol state ids are dense and session-scoped, mapped to the
 * toolchain's proof-state handles. "augment" is realized by applying
 * `have <name> : <prop>`, whose proof obligation becomes the first goal of
 * the new state; the coordinator is expected to discharge it with a cached
 * subgoal proof. apply honors an optional "timeout_ms" field. Toolchain
 * crashes surface as in-band SessionLost errors.
 */

import { encodeLine, Json, LineBuffer, parseLine } from "./framing";
import { GoalState, ReplError, ReplSession, SessionLost } from "./repl";

const GOAL_SEPARATOR = "\n---\n";

interface BridgeSession {
  repl: ReplSession;
  /** protocol state_id -> toolchain proof state (dense, monotone) */
  states: number[];
  nextStateId: number;
}

function renderState(state: GoalState): string {
  return state.goals.join(GOAL_SEPARATOR);
}

export class BridgeServer {
  private sessions = new Map<number, BridgeSession>();
  private nextSession = 1;

  constructor(private replCommand: string[]) {}

  async handle(request: Json): Promise<Json> {
    switch (request.cmd) {
      case "init":
        return this.init(request);
      case "apply":
        return this.apply(request);
      case "augment":
        return this.augment(request);
      case "close":
        return this.closeSession(request);
      default:
        return { ok: false, error: `BadRequest: unknown cmd ${JSON.stringify(request.cmd)}` };
    }
  }

  private async init(request: Json): Promise<Json> {
    if (typeof request.theorem !== "string") {
      return { ok: false, error: "BadRequest: init needs a theorem string" };
    }
    const repl = new ReplSession(this.replCommand);
    let state: GoalState;
    try {
      state = await repl.init(request.theorem);
    } catch (error) {
      repl.close();
      return { ok: false, error: describe(error) };
    }
    const sessionId = this.nextSession++;
    this.sessions.set(sessionId, { repl, states: [state.proofState], nextStateId: 1 });
    return { ok: true, session: sessionId, state_id: 0, state: renderState(state) };
  }

  private lookup(request: Json): [BridgeSession, number] | Json {
    const sessionId = request.session;
    const session = typeof sessionId === "number" ? this.sessions.get(sessionId) : undefined;
    if (!session) {
      return { ok: false, error: `UnknownSession: ${JSON.stringify(request.session)}` };
    }
    const stateId = request.state_id;
    if (typeof stateId !== "number" || stateId < 0 || stateId >= session.states.length) {
      return { ok: false, error: `UnknownState: no state ${JSON.stringify(stateId)} in this session` };
    }
    return [session, stateId];
  }

  private async runTactic(
    session: BridgeSession,
    stateId: number,
    tactic: string,
    timeoutMs?: number
  ): Promise<Json> {
    let outcome: GoalState | string;
    try {
      outcome = await session.repl.applyTactic(session.states[stateId], tactic, timeoutMs);
    } catch (error) {
      return { ok: false, error: describe(error) };
    }
    if (typeof outcome === "string") {
      return { ok: false, error: outcome };
    }
    if (outcome.goals.length === 0) {
      return { ok: true, proved: true };
    }
    const newId = session.nextStateId++;
    session.states.push(outcome.proofState);
    return { ok: true, proved: false, state_id: newId, state: renderState(outcome) };
  }

  private async apply(request: Json): Promise<Json> {
    const found = this.lookup(request);
    if (!Array.isArray(found)) return found;
    const [session, stateId] = found;
    if (typeof request.tactic !== "string" || request.tactic.length === 0) {
      return { ok: false, error: "BadRequest: apply needs a tactic string" };
    }
    const timeout = typeof request.timeout_ms === "number" ? request.timeout_ms : undefined;
    return this.runTactic(session, stateId, request.tactic, timeout);
  }

  private async augment(request: Json): Promise<Json> {
    const found = this.lookup(request);
    if (!Array.isArray(found)) return found;
    const [session, stateId] = found;
    if (typeof request.name !== "string" || typeof request.prop !== "string") {
      return { ok: false, error: "BadRequest: augment needs name and prop strings" };
    }
    return this.runTactic(session, stateId, `have ${request.name} : ${request.prop}`);
  }

  private closeSession(request: Json): Json {
    const sessionId = request.session;
    const session = typeof sessionId === "number" ? this.sessions.get(sessionId) : undefined;
    if (!session) {
      return { ok: false, error: `UnknownSession: ${JSON.stringify(request.session)}` };
    }
    session.repl.close();
    this.sessions.delete(sessionId as number);
    return { ok: true };
  }
}

function describe(error: unknown): string {
  if (error instanceof SessionLost) return `SessionLost: ${error.message}`;
  if (error instanceof ReplError) return error.message;
  return String(error);
}

/** Serve until stdin closes; responses come back in request order. */
export function serveStdio(replCommand: string[]): Promise<void> {
  const server = new BridgeServer(replCommand);
  const buffer = new LineBuffer();
  let chain: Promise<void> = Promise.resolve();
  return new Promise((resolve) => {
    process.stdin.on("data", (chunk) => {
      for (const line of buffer.push(chunk)) {
        chain = chain.then(async () => {
          const request = parseLine(line);
          const response = request
            ? await server.handle(request)
            : { ok: false, error: "BadRequest: invalid JSON" };
          process.stdout.write(encodeLine(response));
        });
      }
    });
    process.stdin.on("end", () => {
      void chain.then(() => resolve());
    });
  });
}

// direct entry: node dist/server.js --repl-cmd "<command>"
if (require.main === module) {
  const args = process.argv.slice(2);
  const index = args.indexOf("--repl-cmd");
  const command =
    index !== -1 && index + 1 < args.length
      ? args[index + 1].split(/\s+/).filter((part) => part.length > 0)
      : ["lake", "env", "repl"];
  void serveStdio(command).then(() => process.exit(0));
}

/**
 * One Lean REPL child process, one proof session: crash isolation over
 * throughput. The child speaks JSON lines:
 *
 *   {"cmd": "<declaration>"}            -> {"env": N, "sorries": [{"proofState": N, "goal": "..."}], ...}
 *   {"tactic": "<t>", "proofState": N}  -> {"proofState": M, "goals": ["..."]}
 *                                        | {"message": "<error>"} | {"messages": [{"severity": "error", ...}]}
 *
 * Requests are serialized (the REPL answers one at a time). A timed-out or
 * crashed child marks the session lost; callers see an in-band SessionLost
 * error from then on, and a fresh init gets a fresh process.
 */

import { ChildProcessWithoutNullStreams, spawn } from "child_process";
import { encodeLine, Json, LineBuffer, parseLine } from "./framing";

export class ReplError extends Error {}
export class SessionLost extends Error {}

interface PendingRequest {
  resolve: (response: Json) => void;
  reject: (error: Error) => void;
  timer?: NodeJS.Timeout;
}

export interface GoalState {
  proofState: number;
  goals: string[];
}

export class ReplSession {
  private child: ChildProcessWithoutNullStreams;
  private buffer = new LineBuffer();
  private queue: PendingRequest[] = [];
  private lost: string | null = null;

  constructor(command: string[], private defaultTimeoutMs = 120_000) {
    const [argv0, ...argv] = command;
    this.child = spawn(argv0, argv, { stdio: ["pipe", "pipe", "pipe"] });
    this.child.stdout.on("data", (chunk) => {
      for (const line of this.buffer.push(chunk)) {
        const pending = this.queue.shift();
        if (!pending) continue; // unsolicited output is dropped
        if (pending.timer) clearTimeout(pending.timer);
        const parsed = parseLine(line);
        if (parsed === null) {
          pending.reject(new ReplError(`malformed REPL response: ${line.slice(0, 200)}`));
        } else {
          pending.resolve(parsed);
        }
      }
    });
    this.child.on("exit", (code) => {
      if (this.lost === null) this.lost = `toolchain process exited (code ${code})`;
      this.failAll(new SessionLost(this.lost));
    });
    this.child.on("error", (err) => {
      this.lost = `toolchain process failed: ${err.message}`;
      this.failAll(new SessionLost(this.lost));
    });
  }

  get isLost(): boolean {
    return this.lost !== null;
  }

  private failAll(error: Error): void {
    const waiting = this.queue;
    this.queue = [];
    for (const pending of waiting) {
      if (pending.timer) clearTimeout(pending.timer);
      pending.reject(error);
    }
  }

  private request(message: Json, timeoutMs?: number): Promise<Json> {
    if (this.lost !== null) {
      return Promise.reject(new SessionLost(this.lost));
    }
    return new Promise((resolve, reject) => {
      const pending: PendingRequest = { resolve, reject };
      const limit = timeoutMs ?? this.defaultTimeoutMs;
      pending.timer = setTimeout(() => {
        // a timed-out tactic leaves the REPL in an unknown state; kill it
        this.lost = `timed out after ${limit} ms`;
        this.child.kill();
        reject(new SessionLost(this.lost));
      }, limit);
      this.queue.push(pending);
      this.child.stdin.write(encodeLine(message));
    });
  }

  /** Elaborate a theorem; resolves to the first sorry's proof state. */
  async init(theorem: string): Promise<GoalState> {
    const response = await this.request({ cmd: theorem });
    const error = extractError(response);
    if (error !== null) throw new ReplError(error);
    const sorries = response.sorries;
    if (!Array.isArray(sorries) || sorries.length === 0) {
      throw new ReplError("theorem produced no proof obligation (no sorries)");
    }
    const first = sorries[0] as Json;
    if (typeof first.proofState !== "number" || typeof first.goal !== "string") {
      throw new ReplError("REPL sorry entry missing proofState/goal");
    }
    return { proofState: first.proofState, goals: [first.goal] };
  }

  /** Run one tactic against a proof state. Tactic failures resolve to a
   * string (the compiler message); protocol failures reject. */
  async applyTactic(
    proofState: number,
    tactic: string,
    timeoutMs?: number
  ): Promise<GoalState | string> {
    const response = await this.request({ tactic, proofState }, timeoutMs);
    const error = extractError(response);
    if (error !== null) return error;
    if (typeof response.proofState !== "number" || !Array.isArray(response.goals)) {
      throw new ReplError("REPL tactic response missing proofState/goals");
    }
    return {
      proofState: response.proofState,
      goals: (response.goals as unknown[]).map(String),
    };
  }

  close(): void {
    if (this.lost === null) this.lost = "closed";
    this.child.kill();
  }
}

function extractError(response: Json): string | null {
  if (typeof response.message === "string") return response.message;
  if (Array.isArray(response.messages)) {
    for (const entry of response.messages as Json[]) {
      if (entry && entry.severity === "error") {
        return String(entry.data ?? entry.message ?? "toolchain error");
      }
    }
  }
  return null;
}

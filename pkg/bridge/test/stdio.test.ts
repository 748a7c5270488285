import assert from "node:assert/strict";
import { test } from "node:test";
import { spawn } from "node:child_process";
import * as path from "node:path";

const SERVER = path.join(__dirname, "..", "dist", "server.js");
const MOCK = path.join(__dirname, "..", "test", "mock_repl.js");

test("stdio server answers one line per request, in order", async () => {
  const child = spawn("node", [SERVER, "--repl-cmd", `node ${MOCK}`]);
  const requests = [
    { cmd: "init", theorem: "demo_theorem" },
    { cmd: "apply", session: 1, state_id: 0, tactic: "intro h" },
    { cmd: "apply", session: 1, state_id: 1, tactic: "exact h" },
    { cmd: "close", session: 1 },
  ];
  const output: Buffer[] = [];
  child.stdout.on("data", (chunk) => output.push(chunk));
  for (const request of requests) {
    child.stdin.write(JSON.stringify(request) + "\n");
  }
  child.stdin.end();
  await new Promise<void>((resolve) => child.on("exit", () => resolve()));
  const lines = Buffer.concat(output).toString().trim().split("\n");
  assert.equal(lines.length, 4);
  const responses = lines.map((line) => JSON.parse(line));
  assert.equal(responses[0].ok, true);
  assert.equal(responses[0].state_id, 0);
  assert.equal(responses[1].proved, false);
  assert.deepEqual(responses[2], { ok: true, proved: true });
  assert.deepEqual(responses[3], { ok: true });
});

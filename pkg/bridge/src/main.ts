#!/usr/bin/env node
/**
 * lean-bridge entry point.
 *
 *   node dist/server.js --repl-cmd "lake env repl"      # via server.js shim
 *   node dist/main.js server --repl-cmd "<command>"
 *   node dist/main.js replay --theorem "<decl>" --tactics-json '["t1","t2"]'
 *                            [--repl-cmd "<command>"]
 */

import { replayProof } from "./replay";
import { serveStdio } from "./server";

export function parseReplCommand(args: string[], fallback: string[]): string[] {
  const index = args.indexOf("--repl-cmd");
  if (index === -1 || index + 1 >= args.length) return fallback;
  return args[index + 1].split(/\s+/).filter((part) => part.length > 0);
}

function flagValue(args: string[], name: string): string | undefined {
  const index = args.indexOf(name);
  return index !== -1 && index + 1 < args.length ? args[index + 1] : undefined;
}

const DEFAULT_REPL = ["lake", "env", "repl"];

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  const replCommand = parseReplCommand(rest, DEFAULT_REPL);
  if (command === "server" || command === undefined) {
    await serveStdio(replCommand);
    return 0;
  }
  if (command === "replay") {
    const theorem = flagValue(rest, "--theorem");
    const tacticsJson = flagValue(rest, "--tactics-json");
    if (!theorem || !tacticsJson) {
      process.stderr.write("replay needs --theorem and --tactics-json\n");
      return 2;
    }
    const tactics = JSON.parse(tacticsJson) as string[];
    const ok = await replayProof(replCommand, theorem, tactics);
    process.stdout.write(ok ? "proof replays\n" : "proof does NOT replay\n");
    return ok ? 0 : 1;
  }
  process.stderr.write(`unknown command ${command}\n`);
  return 2;
}

if (require.main === module) {
  main(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (error) => {
      process.stderr.write(String(error) + "\n");
      process.exit(2);
    }
  );
}

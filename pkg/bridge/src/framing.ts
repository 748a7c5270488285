/**
 * Line framing: one JSON value per newline-terminated line, both directions.
 * The reader tolerates fragmented and coalesced chunks.
 */

export type Json = Record<string, unknown>;

export function encodeLine(message: Json): string {
  return JSON.stringify(message) + "\n";
}

/** Incremental splitter: feed chunks, get complete lines. */
export class LineBuffer {
  private pending = "";

  push(chunk: string | Buffer): string[] {
    this.pending += chunk.toString();
    const lines: string[] = [];
    for (;;) {
      const nl = this.pending.indexOf("\n");
      if (nl === -1) break;
      const line = this.pending.slice(0, nl).trim();
      this.pending = this.pending.slice(nl + 1);
      if (line.length > 0) lines.push(line);
    }
    return lines;
  }
}

export function parseLine(line: string): Json | null {
  try {
    const value = JSON.parse(line);
    return typeof value === "object" && value !== null ? (value as Json) : null;
  } catch {
    return null;
  }
}

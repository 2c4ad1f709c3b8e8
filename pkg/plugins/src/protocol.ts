/**
 * JSON-lines plugin protocol over stdio.
 *
 * One request object per stdin line, exactly one response object per
 * stdout line, in request order, flushed per line. A malformed request
 * line yields {"id": null, "ok": false, "error": "parse"} and the loop
 * continues; EOF on stdin exits cleanly.
 */

import * as readline from "node:readline";

export interface PluginRequest {
  id: string;
  task: string;
  frames: string[];
  params: Record<string, unknown>;
}

export interface PluginResponse {
  id: string | null;
  ok: boolean;
  scores?: number[];
  boxes?: number[][];
  embedding?: number[];
  text?: string;
  error?: string;
}

export type TaskHandler = (
  request: PluginRequest,
) => PluginResponse | Promise<PluginResponse>;

export function okResponse(
  id: string,
  payload: Partial<PluginResponse> = {},
): PluginResponse {
  return { id, ok: true, ...payload };
}

export function errorResponse(id: string | null, message: string): PluginResponse {
  return { id, ok: false, error: message };
}

function parseRequest(line: string): PluginRequest | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const obj = raw as Record<string, unknown>;
  if (typeof obj.id !== "string" || typeof obj.task !== "string") return null;
  return {
    id: obj.id,
    task: obj.task,
    frames: Array.isArray(obj.frames) ? (obj.frames as string[]) : [],
    params:
      typeof obj.params === "object" && obj.params !== null
        ? (obj.params as Record<string, unknown>)
        : {},
  };
}

function writeLine(response: PluginResponse): void {
  // process.stdout.write is line-buffered to a pipe only after "\n";
  // a single write call keeps the line atomic
  process.stdout.write(JSON.stringify(response) + "\n");
}

/**
 * Run the request loop until stdin EOF. Responses keep request order
 * because requests are handled one at a time.
 */
export async function serve(handler: TaskHandler): Promise<void> {
  const lines = readline.createInterface({ input: process.stdin, terminal: false });
  for await (const line of lines) {
    if (line.trim() === "") continue;
    const request = parseRequest(line);
    if (request === null) {
      writeLine(errorResponse(null, "parse"));
      continue;
    }
    try {
      writeLine(await handler(request));
    } catch (err) {
      writeLine(errorResponse(request.id, err instanceof Error ? err.message : String(err)));
    }
  }
}

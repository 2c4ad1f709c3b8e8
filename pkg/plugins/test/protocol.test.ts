/** Protocol-conformance suite against the built plugin process. */

import { spawn, ChildProcessWithoutNullStreams } from "node:child_process";
import * as readline from "node:readline";
import { afterEach, describe, expect, it } from "vitest";

const PLUGIN = new URL("../dist/main.js", import.meta.url).pathname;

class Driver {
  proc: ChildProcessWithoutNullStreams;
  private lines: AsyncIterableIterator<string>;

  constructor(mode: string) {
    this.proc = spawn("node", [PLUGIN, "--mode", mode], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const rl = readline.createInterface({ input: this.proc.stdout });
    this.lines = rl[Symbol.asyncIterator]();
  }

  sendRaw(line: string): void {
    this.proc.stdin.write(line + "\n");
  }

  send(id: string, task: string, params: Record<string, unknown> = {}): void {
    this.sendRaw(JSON.stringify({ id, task, frames: [], params }));
  }

  async next(): Promise<Record<string, unknown>> {
    const { value, done } = await this.lines.next();
    if (done) throw new Error("plugin closed stdout");
    return JSON.parse(value);
  }

  async close(): Promise<number> {
    this.proc.stdin.end();
    return new Promise((resolve) => this.proc.on("exit", (code) => resolve(code ?? -1)));
  }
}

let driver: Driver | null = null;
afterEach(async () => {
  if (driver) {
    driver.proc.kill();
    driver = null;
  }
});

describe("echo plugin protocol", () => {
  it("answers 100 requests in order with matching ids", async () => {
    driver = new Driver("echo");
    for (let i = 0; i < 100; i++) driver.send(String(i), "aesthetic");
    for (let i = 0; i < 100; i++) {
      const response = await driver.next();
      expect(response.id).toBe(String(i));
      expect(response.ok).toBe(true);
      expect(response.scores).toEqual([5]);
    }
  });

  it("answers a malformed line with id null and keeps serving", async () => {
    driver = new Driver("echo");
    driver.sendRaw("not-json at all");
    const bad = await driver.next();
    expect(bad).toEqual({ id: null, ok: false, error: "parse" });
    driver.send("after", "classify");
    const good = await driver.next();
    expect(good.id).toBe("after");
    expect(good.ok).toBe(true);
  });

  it("rejects structurally wrong requests without dying", async () => {
    driver = new Driver("echo");
    driver.sendRaw(JSON.stringify({ task: "aesthetic" })); // no id
    const bad = await driver.next();
    expect(bad.ok).toBe(false);
    driver.send("1", "motion");
    expect((await driver.next()).id).toBe("1");
  });

  it("emits ok=false error lines for failing tasks and continues", async () => {
    driver = new Driver("echo");
    driver.send("1", "fail");
    const failed = await driver.next();
    expect(failed).toMatchObject({ id: "1", ok: false, error: "requested failure" });
    driver.send("2", "aesthetic");
    expect((await driver.next()).ok).toBe(true);
  });

  it("exits 0 on stdin EOF", async () => {
    driver = new Driver("echo");
    driver.send("1", "aesthetic");
    await driver.next();
    const code = await driver.close();
    expect(code).toBe(0);
    driver = null;
  });

  it("honors sleep_ms for driver-side timeout testing", async () => {
    driver = new Driver("echo");
    const t0 = Date.now();
    driver.send("1", "aesthetic", { sleep_ms: 150 });
    await driver.next();
    expect(Date.now() - t0).toBeGreaterThanOrEqual(140);
  });
});

describe("reference plugin over the same transport", () => {
  it("reports unknown tasks as errors, in order", async () => {
    driver = new Driver("reference");
    driver.send("a", "nonsense-task");
    driver.send("b", "caption_merge", { video_caption: "x", keyframe_captions: ["y"] });
    const first = await driver.next();
    expect(first).toMatchObject({ id: "a", ok: false });
    const second = await driver.next();
    expect(second).toMatchObject({ id: "b", ok: true, text: "x; y" });
  });
});

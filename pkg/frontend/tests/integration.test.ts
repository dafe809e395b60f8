// Live round trip against the real session service: latency budget and a
// scripted click-at-center hit in the target game.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { TargetGame, targetGameStep } from "../src/game.js";
import { encodeFrameMessage, parseServerMessage } from "../src/wire.js";

const PYTHON = process.env.PYTHON ?? "python3";

function generateSession(dir: string): void {
  const script = [
    "import sys",
    "from facepointer.fixtures import SessionScript, BlinkSpec",
    "from facepointer.images import write_pgm",
    "out = sys.argv[1]",
    // still face, one 8-frame voluntary blink of the image-right eye:
    // a left click fires with the pointer still at the screen center
    "script = SessionScript(length=30, blinks=(BlinkSpec(10, 18, 'image-right'),))",
    "for i, f in enumerate(script.frames()):",
    "    write_pgm(f, f'{out}/frame_{i:04d}.pgm')",
  ].join("\n");
  const result = spawnSync(PYTHON, ["-c", script, dir], { encoding: "utf-8" });
  if (result.status !== 0) {
    throw new Error(`fixture generation failed: ${result.stderr}`);
  }
}

function readPgm(path: string): { gray: Uint8Array; width: number; height: number } {
  const raw = readFileSync(path);
  const header = raw.subarray(0, 64).toString("latin1");
  const match = /^P5\s+(\d+)\s+(\d+)\s+255\s/.exec(header);
  if (!match) {
    throw new Error(`not a binary PGM: ${path}`);
  }
  const width = Number(match[1]);
  const height = Number(match[2]);
  const offset = match[0].length;
  return { gray: new Uint8Array(raw.subarray(offset, offset + width * height)), width, height };
}

describe("live service round trip", () => {
  let server: ChildProcess;
  let port = 0;
  let framesDir: string;

  beforeAll(async () => {
    framesDir = mkdtempSync(join(tmpdir(), "fp-frames-"));
    generateSession(framesDir);

    server = spawn(PYTHON, ["-m", "facepointer", "serve", "--bind", "127.0.0.1:0"], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    port = await new Promise<number>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("service did not start")), 15000);
      let seen = "";
      server.stderr!.on("data", (chunk: Buffer) => {
        seen += chunk.toString();
        const match = /listening on ws:\/\/[\d.]+:(\d+)/.exec(seen);
        if (match) {
          clearTimeout(timer);
          resolve(Number(match[1]));
        }
      });
      server.on("exit", () => reject(new Error(`service exited early: ${seen}`)));
    });
  }, 30000);

  afterAll(() => {
    server?.kill();
    rmSync(framesDir, { recursive: true, force: true });
  });

  it("round-trips every frame under 100 ms and hits the center target", async () => {
    const files = readdirSync(framesDir).filter((f) => f.endsWith(".pgm")).sort();
    expect(files.length).toBe(30);

    const ws = new WebSocket(`ws://127.0.0.1:${port}/session`);
    ws.binaryType = "arraybuffer";
    await new Promise<void>((resolve, reject) => {
      ws.once("open", () => resolve());
      ws.once("error", reject);
    });

    const game = new TargetGame(1280, 720, 42);
    const latencies: number[] = [];
    let clicks = 0;

    for (const file of files) {
      const { gray, width, height } = readPgm(join(framesDir, file));
      const sent = performance.now();
      ws.send(encodeFrameMessage(gray, width, height));
      const reply = await new Promise<string>((resolve, reject) => {
        ws.once("message", (data) => resolve(data.toString()));
        ws.once("error", reject);
      });
      latencies.push(performance.now() - sent);
      const message = parseServerMessage(reply);
      expect(message?.type).toBe("state");
      if (message?.type === "state") {
        clicks += message.state.events.filter((e) => e.kind === "click").length;
        targetGameStep(game, message.state);
      }
    }
    ws.close();

    const worst = Math.max(...latencies);
    expect(worst).toBeLessThan(100);
    expect(clicks).toBe(1);
    expect(game.hits).toBe(1);
    expect(game.misses).toBe(0);
  }, 30000);
});

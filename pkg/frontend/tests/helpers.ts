import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const PKG_ROOT = join(import.meta.dirname, "..", "..");
export const FIXTURES = join(PKG_ROOT, "tests", "fixtures");

export type NodeHandle = {
  url: string;
  proc: ChildProcess;
  stop: () => void;
};

let nextPort = 18100 + (process.pid % 1000);

export const startNode = async (flags: string[] = []): Promise<NodeHandle> => {
  const port = nextPort;
  nextPort += 1;
  const proc = spawn(
    "python3",
    ["-m", "valori.node", "--port", String(port), ...flags],
    { cwd: PKG_ROOT, stdio: ["ignore", "inherit", "inherit"] },
  );
  const url = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const res = await fetch(`${url}/v1/health`);
      if (res.ok) {
        break;
      }
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      proc.kill();
      throw new Error("node did not become healthy within 60s");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  return { url, proc, stop: () => proc.kill() };
};

export const makeTempDir = (): { path: string; cleanup: () => void } => {
  const path = mkdtempSync(join(tmpdir(), "valori-eval-"));
  return { path, cleanup: () => rmSync(path, { recursive: true, force: true }) };
};

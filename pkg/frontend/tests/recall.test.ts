import { execFileSync } from "node:child_process";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { NodeClient, NodeError } from "../src/client.js";
import { exactTopK, recallAtK, runRecallEval } from "../src/recall.js";
import { loadNpyMatrix } from "../src/npy.js";
import { PKG_ROOT, makeTempDir, startNode, type NodeHandle } from "./helpers.js";

const tmp = makeTempDir();
let node: NodeHandle;
let orthogonalPath: string;

beforeAll(async () => {
  orthogonalPath = join(tmp.path, "ortho.npy");
  // mutually orthogonal vectors with distinct norms: quantization cannot
  // reorder them, so recall must be exactly 1.0
  execFileSync(
    "python3",
    [
      "-c",
      `import numpy as np; np.save(${JSON.stringify(orthogonalPath)}, ` +
        "np.diag(np.arange(1, 9, dtype=np.float32)))",
    ],
    { cwd: PKG_ROOT },
  );
  node = await startNode([
    "--dim", "8", "--m", "4", "--ef-construction", "16", "--ef-search", "64",
  ]);
});

afterAll(() => {
  node?.stop();
  tmp.cleanup();
});

describe("local exact scan", () => {
  it("orders by distance then id", () => {
    const mat = loadNpyMatrix(orthogonalPath);
    const top = exactTopK(mat, [1, 0, 0, 0, 0, 0, 0, 0], 3);
    expect(top[0]).toBe(0); // exact match on row 0
    expect(top).toHaveLength(3);
  });

  it("recallAtK matches the shared definition", () => {
    expect(recallAtK([1, 2, 3], [3, 2, 1], 3)).toBe(1);
    expect(recallAtK([1, 2, 3, 4], [1, 2, 8, 9], 4)).toBe(0.5);
    expect(() => recallAtK([1, 2, 3], [1], 2)).toThrow();
  });
});

describe("recall eval against a live node", () => {
  it("orthogonal corpus gives recall 1.0 and a stable hash", async () => {
    const report = await runRecallEval({
      nodeUrl: node.url,
      embeddingsPath: orthogonalPath,
      queryIndices: [0, 1, 2, 3, 4, 5, 6, 7],
      k: 3,
      ingest: true,
    });
    expect(report.meanRecallAtK).toBe(1);
    expect(report.queryCount).toBe(8);
    expect(report.shortQueries).toEqual([]);
    expect(report.finalHash).toMatch(/^[0-9a-f]{64}$/);
    // the harness computed nothing that fed back into the node
    expect(await new NodeClient(node.url).hash()).toBe(report.finalHash);
  });

  it("flags queries where fewer than k results exist", async () => {
    const report = await runRecallEval({
      nodeUrl: node.url,
      embeddingsPath: orthogonalPath,
      queryIndices: [0],
      k: 10, // only 8 stored
      ingest: false,
    });
    expect(report.shortQueries).toEqual([0]);
    expect(report.meanRecallAtK).toBeCloseTo(8 / 10, 10);
  });

  it("surfaces node-side rejections as typed errors", async () => {
    const client = new NodeClient(node.url);
    await expect(client.insert(0, [1, 0, 0, 0, 0, 0, 0, 0])).rejects.toThrowError(
      NodeError,
    );
    await expect(client.delete(999)).rejects.toMatchObject({ status: 404 });
  });
});

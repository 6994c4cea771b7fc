/**
 * Twin-run recall study: the harness drives a live node over HTTP with
 * the same seeded 10k x 384 corpus the in-process suite uses, and must
 * land within ±0.005 of the in-process mean Recall@10 (0.995). Same
 * data, disjoint code paths (TypeScript float64 baseline + HTTP index
 * queries vs Python oracle + in-process index).
 *
 * This ingests 10k vectors over HTTP with per-mutation hashing, so it
 * runs for several minutes.
 */

import { execFileSync } from "node:child_process";
import { join } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import { runRecallEval } from "../src/recall.js";
import { PKG_ROOT, makeTempDir, startNode, type NodeHandle } from "./helpers.js";

const PRIMARY_MEAN_RECALL = 0.995;
const TOLERANCE = 0.005;

const tmp = makeTempDir();
let node: NodeHandle;
let corpusPath: string;

beforeAll(async () => {
  corpusPath = join(tmp.path, "corpus.npy");
  // identical bytes to the corpus the in-process recall criterion uses
  execFileSync(
    "python3",
    [
      "-c",
      "import numpy as np; from valori.oracle import make_synthetic_corpus; " +
        `np.save(${JSON.stringify(corpusPath)}, make_synthetic_corpus(10_000, 384))`,
    ],
    { cwd: PKG_ROOT },
  );
  node = await startNode(["--dim", "384"]); // default index parameters
}, 120_000);

afterAll(() => {
  node?.stop();
  tmp.cleanup();
});

it(
  "twin-run recall matches the in-process study within ±0.005",
  async () => {
    const report = await runRecallEval({
      nodeUrl: node.url,
      embeddingsPath: corpusPath,
      queryIndices: Array.from({ length: 100 }, (_, i) => i),
      k: 10,
    });
    expect(report.queryCount).toBe(100);
    expect(Math.abs(report.meanRecallAtK - PRIMARY_MEAN_RECALL)).toBeLessThanOrEqual(
      TOLERANCE,
    );
    console.log(
      `twin-run mean recall@10 = ${report.meanRecallAtK.toFixed(4)} ` +
        `(in-process ${PRIMARY_MEAN_RECALL})`,
    );
  },
  1_800_000,
);

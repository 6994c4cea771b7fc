/**
 * Recall study against a live node: ingest an embedding corpus in id
 * order, query top-k through the node, and compare against an exact
 * double-precision scan computed locally. The two code paths share no
 * arithmetic — that is the point: the node answers from its fixed-point
 * index, the harness answers from the original floats.
 */

import { NodeClient } from "./client.js";
import { loadNpyMatrix, npyRow, type NpyMatrix } from "./npy.js";

export type EvalConfig = {
  nodeUrl: string;
  embeddingsPath: string;
  queryIndices: number[];
  k: number;
  /** skip ingestion if the node already holds the corpus */
  ingest?: boolean;
  onProgress?: (done: number, total: number) => void;
};

export type RecallReport = {
  perQueryOverlap: number[];
  meanRecallAtK: number;
  k: number;
  queryCount: number;
  /** queries where fewer than k results existed (overlap over available) */
  shortQueries: number[];
  finalHash: string;
};

/** exact top-k by (squared L2 in float64 ascending, id ascending) */
export const exactTopK = (mat: NpyMatrix, queryRow: number[], k: number): number[] => {
  const scored: Array<{ id: number; dist: number }> = [];
  for (let row = 0; row < mat.rows; row += 1) {
    let dist = 0;
    const base = row * mat.cols;
    for (let d = 0; d < mat.cols; d += 1) {
      const diff = mat.data[base + d] - queryRow[d];
      dist += diff * diff;
    }
    scored.push({ id: row, dist });
  }
  scored.sort((a, b) => (a.dist !== b.dist ? a.dist - b.dist : a.id - b.id));
  return scored.slice(0, k).map((entry) => entry.id);
};

/** |a intersect b| / k — identical to the node-side recall definition */
export const recallAtK = (a: number[], b: number[], k: number): number => {
  if (a.length > k || b.length > k) {
    throw new Error("result lists longer than k");
  }
  const seen = new Set(a);
  let overlap = 0;
  for (const id of b) {
    if (seen.has(id)) {
      overlap += 1;
    }
  }
  return overlap / k;
};

export const runRecallEval = async (config: EvalConfig): Promise<RecallReport> => {
  if (config.k < 1) {
    throw new Error("k must be >= 1");
  }
  const mat = loadNpyMatrix(config.embeddingsPath);
  const client = new NodeClient(config.nodeUrl);

  if (config.ingest ?? true) {
    for (let id = 0; id < mat.rows; id += 1) {
      await client.insert(id, npyRow(mat, id));
      config.onProgress?.(id + 1, mat.rows);
    }
  }

  const perQueryOverlap: number[] = [];
  const shortQueries: number[] = [];
  let finalHash = "";
  for (const qi of config.queryIndices) {
    const queryRow = npyRow(mat, qi);
    const baseline = exactTopK(mat, queryRow, config.k);
    const response = await client.query(queryRow, config.k);
    finalHash = response.state_hash;
    const candidate = response.results.map((hit) => hit.id);
    if (candidate.length < config.k) {
      shortQueries.push(qi);
    }
    perQueryOverlap.push(recallAtK(baseline, candidate, config.k));
  }
  const mean =
    perQueryOverlap.length > 0
      ? perQueryOverlap.reduce((acc, value) => acc + value, 0) / perQueryOverlap.length
      : 0;
  return {
    perQueryOverlap,
    meanRecallAtK: mean,
    k: config.k,
    queryCount: perQueryOverlap.length,
    shortQueries,
    finalHash,
  };
};

export const formatReport = (report: RecallReport): string => {
  const lines = [
    `queries: ${report.queryCount}  k: ${report.k}`,
    `mean recall@${report.k}: ${report.meanRecallAtK.toFixed(4)}`,
    `state hash: ${report.finalHash}`,
  ];
  if (report.shortQueries.length > 0) {
    lines.push(
      `note: ${report.shortQueries.length} queries returned fewer than k results ` +
        `(overlap computed over available): ${report.shortQueries.join(", ")}`,
    );
  }
  return lines.join("\n");
};

#!/usr/bin/env node
/**
 * valori-eval — evaluation harness commands.
 *
 *   valori-eval hex FILE [--row N] [--count N] [--diff OTHERFILE]
 *   valori-eval recall --node URL --embeddings FILE [--k N]
 *                      [--queries N | --query-indices 0,5,9] [--no-ingest]
 *   valori-eval generate ...
 *
 * `generate` (embedding-model wrapper) requires network/model downloads,
 * which this harness deliberately excludes: supply a pre-computed NPY
 * file instead.
 */

import { parseArgs } from "node:util";

import { hexDiff, hexInspect } from "./hex.js";
import { formatReport, runRecallEval } from "./recall.js";

const usage = (): never => {
  console.error(
    [
      "usage:",
      "  valori-eval hex FILE [--row N] [--count N] [--diff OTHERFILE]",
      "  valori-eval recall --node URL --embeddings FILE [--k N]",
      "                     [--queries N | --query-indices LIST] [--no-ingest]",
    ].join("\n"),
  );
  process.exit(3);
};

const cmdHex = (argv: string[]): number => {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      row: { type: "string", default: "0" },
      count: { type: "string", default: "5" },
      diff: { type: "string" },
    },
  });
  const file = positionals[0];
  if (!file) {
    return usage();
  }
  const row = Number.parseInt(values.row as string, 10);
  const count = Number.parseInt(values.count as string, 10);
  if (values.diff) {
    const mismatches = hexDiff(file, values.diff as string, row, count);
    if (mismatches.length === 0) {
      console.log(`identical: all ${count} dimensions match bit-for-bit`);
      return 0;
    }
    console.log("dimension left right");
    for (const m of mismatches) {
      console.log(`${m.dimension} ${m.left} ${m.right}`);
    }
    return 1;
  }
  for (const line of hexInspect(file, row, count)) {
    console.log(line);
  }
  return 0;
};

const cmdRecall = async (argv: string[]): Promise<number> => {
  const { values } = parseArgs({
    args: argv,
    options: {
      node: { type: "string" },
      embeddings: { type: "string" },
      k: { type: "string", default: "10" },
      queries: { type: "string", default: "100" },
      "query-indices": { type: "string" },
      "no-ingest": { type: "boolean", default: false },
    },
  });
  if (!values.node || !values.embeddings) {
    return usage();
  }
  const k = Number.parseInt(values.k as string, 10);
  const queryIndices = values["query-indices"]
    ? (values["query-indices"] as string).split(",").map((s) => Number.parseInt(s.trim(), 10))
    : Array.from({ length: Number.parseInt(values.queries as string, 10) }, (_, i) => i);
  const report = await runRecallEval({
    nodeUrl: values.node as string,
    embeddingsPath: values.embeddings as string,
    queryIndices,
    k,
    ingest: !(values["no-ingest"] as boolean),
    onProgress: (done, total) => {
      if (done % 1000 === 0 || done === total) {
        process.stderr.write(`ingested ${done}/${total}\n`);
      }
    },
  });
  console.log(formatReport(report));
  return 0;
};

const main = async (): Promise<number> => {
  const [command, ...rest] = process.argv.slice(2);
  try {
    switch (command) {
      case "hex":
        return cmdHex(rest);
      case "recall":
        return await cmdRecall(rest);
      case "generate":
        console.error(
          "generate requires downloading an embedding model, which this " +
            "harness excludes; produce an NPY file elsewhere and pass it " +
            "to `valori-eval recall --embeddings FILE`",
        );
        return 2;
      default:
        return usage();
    }
  } catch (error) {
    console.error(`error: ${error instanceof Error ? error.message : String(error)}`);
    return 2;
  }
};

main().then((code) => {
  process.exitCode = code;
});

/**
 * IEEE-754 bit inspection of stored embeddings. Printing the exact
 * 32-bit patterns is the portable way to prove two machines produced
 * (or failed to produce) the same floats — decimal printing rounds.
 */

import { loadNpyMatrix, npyRow } from "./npy.js";

const scratch = new DataView(new ArrayBuffer(4));

/** lowercase 0x-prefixed 32-bit pattern of a value narrowed to float32 */
export const float32Hex = (value: number): string => {
  scratch.setFloat32(0, Math.fround(value), true);
  return `0x${scratch.getUint32(0, true).toString(16).padStart(8, "0")}`;
};

/** Bit patterns of `count` floats from one row of an NPY file. */
export const hexInspect = (path: string, row = 0, count = 5): string[] => {
  const values = npyRow(loadNpyMatrix(path), row);
  return values.slice(0, count).map(float32Hex);
};

export type HexMismatch = {
  dimension: number;
  left: string;
  right: string;
};

/**
 * Per-dimension comparison of the same row across two files — the
 * cross-machine divergence report. Empty result means bit-identical.
 */
export const hexDiff = (
  leftPath: string,
  rightPath: string,
  row = 0,
  count?: number,
): HexMismatch[] => {
  const left = npyRow(loadNpyMatrix(leftPath), row);
  const right = npyRow(loadNpyMatrix(rightPath), row);
  const n = count ?? Math.max(left.length, right.length);
  if (left.length < n || right.length < n) {
    throw new Error(`rows have ${left.length} and ${right.length} dims, need ${n}`);
  }
  const mismatches: HexMismatch[] = [];
  for (let d = 0; d < n; d += 1) {
    const a = float32Hex(left[d]);
    const b = float32Hex(right[d]);
    if (a !== b) {
      mismatches.push({ dimension: d, left: a, right: b });
    }
  }
  return mismatches;
};

/**
 * Minimal NPY (NumPy array file) reader: versions 1.0/2.0, C-order,
 * little-endian float32/float64, 2-D arrays. That is exactly the shape
 * of embedding files the harness consumes; anything else is an error,
 * never a silent coercion.
 */

import { readFileSync } from "node:fs";

export type NpyMatrix = {
  /** row-major values, `rows * cols` long */
  data: Float32Array | Float64Array;
  rows: number;
  cols: number;
  dtype: "<f4" | "<f8";
};

const MAGIC = "\x93NUMPY";

const parseHeader = (raw: string) => {
  const descr = /'descr':\s*'([^']+)'/.exec(raw)?.[1] ?? "";
  const fortran = /'fortran_order':\s*(True|False)/.exec(raw)?.[1] === "True";
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(raw)?.[1] ?? "";
  const shape = shapeText
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part.length > 0)
    .map((part) => Number.parseInt(part, 10));
  return { descr, fortran, shape };
};

export const parseNpyMatrix = (buffer: ArrayBuffer): NpyMatrix => {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 10 || String.fromCharCode(...bytes.subarray(0, 6)) !== MAGIC) {
    throw new Error("not an NPY file (bad magic)");
  }
  const view = new DataView(buffer);
  const major = view.getUint8(6);
  if (major !== 1 && major !== 2) {
    throw new Error(`unsupported NPY version ${major}.${view.getUint8(7)}`);
  }
  const headerLength = major === 1 ? view.getUint16(8, true) : view.getUint32(8, true);
  const headerOffset = major === 1 ? 10 : 12;
  const headerRaw = new TextDecoder().decode(
    bytes.subarray(headerOffset, headerOffset + headerLength),
  );
  const { descr, fortran, shape } = parseHeader(headerRaw);
  if (fortran) {
    throw new Error("Fortran-ordered arrays are not supported");
  }
  if (shape.length !== 2 || shape.some((dim) => !Number.isFinite(dim) || dim < 0)) {
    throw new Error(`expected a 2-D array, got shape (${shape.join(", ")})`);
  }
  const [rows, cols] = shape;
  const length = rows * cols;
  const dataOffset = headerOffset + headerLength;
  if (descr === "<f4") {
    if (bytes.length < dataOffset + length * 4) {
      throw new Error("truncated NPY payload");
    }
    return { data: new Float32Array(buffer, dataOffset, length), rows, cols, dtype: "<f4" };
  }
  if (descr === "<f8") {
    if (bytes.length < dataOffset + length * 8) {
      throw new Error("truncated NPY payload");
    }
    return { data: new Float64Array(buffer, dataOffset, length), rows, cols, dtype: "<f8" };
  }
  throw new Error(`unsupported dtype ${descr || "unknown"} (need <f4 or <f8)`);
};

export const loadNpyMatrix = (path: string): NpyMatrix => {
  const raw = readFileSync(path);
  // copy into a fresh ArrayBuffer so typed-array views start at offset 0
  // with correct alignment regardless of how Node pooled the read
  const buffer = raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
  return parseNpyMatrix(buffer);
};

export const npyRow = (mat: NpyMatrix, row: number): number[] => {
  if (row < 0 || row >= mat.rows) {
    throw new Error(`row ${row} out of range (0..${mat.rows - 1})`);
  }
  return Array.from(mat.data.subarray(row * mat.cols, (row + 1) * mat.cols));
};

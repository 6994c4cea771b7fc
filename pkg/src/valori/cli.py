"""Operator command line: ingestion, querying, snapshotting, replay
verification, benchmarking and float bit inspection.

Exit codes are a stable contract: 0 success, 1 verification mismatch,
2 format/corruption error, 3 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
import time
from decimal import Decimal

import numpy as np

from . import replaylog, snapshot
from .errors import (
    ConfigMismatch,
    CorruptRecord,
    DimensionMismatch,
    DuplicateId,
    NonFiniteInput,
    ParseError,
    ReplayDivergence,
    ValoriError,
)
from .fixedpoint import FixedVector, from_float_array
from .kernel import (
    HnswParams,
    Insert,
    KernelConfig,
    Precision,
    apply,
    new_state,
    query as kernel_query,
    state_hash,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_FORMAT = 2
EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _use_color() -> bool:
    return sys.stdout.isatty() and "VALORI_NO_COLOR" not in os.environ


def _status(ok: bool) -> str:
    word = "PASS" if ok else "FAIL"
    if _use_color():
        return f"\x1b[32m{word}\x1b[0m" if ok else f"\x1b[31m{word}\x1b[0m"
    return word


def _config_from_args(args) -> KernelConfig:
    if args.precision.lower() not in ("q16.16", "q16_16"):
        raise ValoriError(f"precision {args.precision!r} is not implemented")
    return KernelConfig(
        dim=args.dim,
        precision=Precision.Q16_16,
        hnsw=HnswParams(
            m=args.m,
            ef_construction=args.ef_construction,
            ef_search=args.ef_search,
        ),
    )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=128)
    p.add_argument("--ef-search", type=int, default=768)
    p.add_argument("--precision", default="q16.16", help="only q16.16 accepted")


def _load_npy(path: str) -> np.ndarray:
    arr = np.load(path, allow_pickle=False)
    if arr.ndim != 2:
        raise ValoriError(f"expected a 2-D array, got shape {arr.shape}")
    if arr.dtype not in (np.float32, np.float64):
        raise ValoriError(f"expected float32/float64, got {arr.dtype}")
    return np.ascontiguousarray(arr)


def _read_ingest_file(path: str, dim: int):
    """Yields (id, float coords, metadata bytes) tuples, unsorted."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".npy":
        arr = _load_npy(path)
        if arr.shape[1] != dim:
            raise DimensionMismatch(f"file dim {arr.shape[1]} != --dim {dim}")
        # NPY carries no ids: rows become ids 0..n-1 in row order.
        for i in range(arr.shape[0]):
            yield i, arr[i], b""
        return
    if ext in (".jsonl", ".ndjson", ".json"):
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    vid = int(obj["id"])
                    vec = [float(x) for x in obj["vector"]]
                except (ValueError, KeyError, TypeError) as e:
                    raise ParseError(lineno, str(e)) from e
                if len(vec) != dim:
                    raise ParseError(lineno, f"vector has {len(vec)} coords, expected {dim}")
                meta = obj.get("metadata", "")
                yield vid, np.array(vec, dtype=np.float64), str(meta).encode()
        return
    # CSV: id, dim coords, optional trailing metadata column
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) not in (dim + 1, dim + 2):
                raise ParseError(
                    lineno, f"{len(row)} columns, expected {dim + 1} or {dim + 2}"
                )
            try:
                vid = int(row[0])
                vec = np.array([float(x) for x in row[1 : dim + 1]], dtype=np.float64)
            except ValueError as e:
                raise ParseError(lineno, str(e)) from e
            meta = row[dim + 1].encode() if len(row) == dim + 2 else b""
            yield vid, vec, meta


def cmd_ingest(args) -> int:
    config = _config_from_args(args)
    records = sorted(_read_ingest_file(args.input, config.dim), key=lambda r: r[0])
    if os.path.exists(args.log) and os.path.getsize(args.log) > 0:
        state, _ = replaylog.replay(args.log)
        if state.config != config:
            raise ConfigMismatch("existing log config differs from flags")
    else:
        state = new_state(config)
    count = 0
    with replaylog.LogWriter(args.log, config, fsync_policy=args.fsync) as writer:
        for vid, vec, meta in records:
            try:
                raws = from_float_array(vec)
            except NonFiniteInput as e:
                raise NonFiniteInput(f"id {vid}: {e}") from e
            cmd = Insert(vid, FixedVector(raws), meta)
            apply(state, cmd)  # validate before the record is logged
            writer.append(cmd)
            count += 1
    print(f"ingested={count} clock={state.clock} hash={state_hash(state)}")
    return EXIT_OK


def _parse_query_vector(args, dim: int) -> np.ndarray:
    if args.query is not None:
        vec = np.array([float(x) for x in args.query.split(",")], dtype=np.float64)
    else:
        ext = os.path.splitext(args.query_file)[1].lower()
        if ext == ".npy":
            vec = _load_npy(args.query_file)[args.row].astype(np.float64)
        else:
            with open(args.query_file, "r", encoding="utf-8") as fh:
                text = fh.read().replace(",", " ")
            vec = np.array([float(x) for x in text.split()], dtype=np.float64)
    if vec.size != dim:
        raise DimensionMismatch(f"query dim {vec.size} != snapshot dim {dim}")
    return vec


def _dist_decimal(raw: int) -> str:
    return str(Decimal(raw) / Decimal(1 << 32))


def cmd_query(args) -> int:
    if args.query is None and args.query_file is None:
        print("error: one of --query/--query-file is required", file=sys.stderr)
        return EXIT_USAGE
    with open(args.snapshot, "rb") as fh:
        state = snapshot.deserialize(fh.read())
    vec = _parse_query_vector(args, state.config.dim)
    q = FixedVector(from_float_array(vec))
    result = kernel_query(state, q, args.k, ef_search=args.ef)
    for rank, (vid, dist) in enumerate(result, 1):
        print(f"{rank} {vid} {dist} {_dist_decimal(dist)}")
    return EXIT_OK


def cmd_snapshot(args) -> int:
    state, final_hash = replaylog.replay(args.log)
    data = snapshot.serialize(state)
    with open(args.out, "wb") as fh:
        fh.write(data)
    print(f"clock={state.clock} hash={final_hash}")
    return EXIT_OK


def cmd_restore(args) -> int:
    with open(args.snapshot, "rb") as fh:
        data = fh.read()
    state = snapshot.deserialize(data)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(snapshot.serialize(state))
    print(f"clock={state.clock} hash={state_hash(state)}")
    return EXIT_OK


def cmd_hash(args) -> int:
    with open(args.file, "rb") as fh:
        print(snapshot.content_hash(fh.read()))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        report = replaylog.verify(args.log, args.expected_hash)
    except (CorruptRecord, ReplayDivergence) as e:
        index = e.index
        print(f"{_status(False)} corrupt record index={index}")
        return EXIT_FORMAT
    print(
        f"{_status(report.ok)} records={report.record_count} clock={report.clock}\n"
        f"computed {report.final_hash}\n"
        f"expected {report.expected_hash}"
    )
    return EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_bench(args) -> int:
    with open(args.snapshot, "rb") as fh:
        state = snapshot.deserialize(fh.read())
    dim = state.config.dim
    rng = np.random.default_rng(args.seed)
    queries = rng.standard_normal((args.queries, dim))
    norms = np.linalg.norm(queries, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    queries = from_float_array(queries / norms)
    timings = []
    stable = True
    for i in range(args.queries):
        q = FixedVector(queries[i])
        t0 = time.perf_counter()
        first = kernel_query(state, q, args.k, ef_search=args.ef)
        timings.append((time.perf_counter() - t0) * 1e6)
        if kernel_query(state, q, args.k, ef_search=args.ef) != first:
            stable = False  # pragma: no cover - would break determinism
    timings.sort()
    quantiles = {
        "p50": timings[len(timings) // 2],
        "p95": timings[int(len(timings) * 0.95)],
        "p99": timings[min(int(len(timings) * 0.99), len(timings) - 1)],
    }
    print("metric,value_us")
    for name, value in quantiles.items():
        print(f"{name},{value:.1f}")
    print(f"mean,{statistics.fmean(timings):.1f}")
    note = "identical across repetitions" if stable else "DIVERGED"
    print(f"# determinism: results {note}; only timings vary")
    return EXIT_OK if stable else EXIT_MISMATCH


def cmd_inspect_hex(args) -> int:
    ext = os.path.splitext(args.file)[1].lower()
    if ext == ".npy":
        arr = _load_npy(args.file)
    else:
        with open(args.file, "r", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
        arr = np.array([[float(x) for x in r] for r in rows], dtype=np.float32)
    row = arr[args.row].astype(np.float32)
    bits = row[: args.count].view(np.uint32)
    for b in bits:
        print(f"0x{int(b):08x}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="valori", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="convert floats at the boundary and append to a command log")
    sp.add_argument("input", help="CSV, JSON-lines or NPY input file")
    sp.add_argument("--log", required=True, help="output .vkl log path")
    sp.add_argument("--fsync", choices=("record", "batch"), default="record")
    _add_config_flags(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("query", help="k-NN query against a snapshot")
    sp.add_argument("snapshot")
    sp.add_argument("--query", help="comma-separated float coordinates")
    sp.add_argument("--query-file", help="file holding the query vector")
    sp.add_argument("--row", type=int, default=0, help="row for NPY query files")
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--ef", type=int, default=None)
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("snapshot", help="replay a log and write a .vks snapshot")
    sp.add_argument("log")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_snapshot)

    sp = sub.add_parser("restore", help="load and validate a snapshot, print its hash")
    sp.add_argument("snapshot")
    sp.add_argument("--out", help="optionally re-serialize to this path")
    sp.set_defaults(func=cmd_restore)

    sp = sub.add_parser("hash", help="print the SHA-256 of a file")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_hash)

    sp = sub.add_parser("verify", help="replay a log and compare the final state hash")
    sp.add_argument("log")
    sp.add_argument("expected_hash")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bench", help="query latency benchmark over a snapshot")
    sp.add_argument("snapshot")
    sp.add_argument("--queries", type=int, default=1000)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--ef", type=int, default=None)
    sp.add_argument("--seed", type=int, default=7)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("inspect-hex", help="print 32-bit IEEE bit patterns of stored floats")
    sp.add_argument("file", help="NPY or CSV float file")
    sp.add_argument("--row", type=int, default=0)
    sp.add_argument("--count", type=int, default=5)
    sp.set_defaults(func=cmd_inspect_hex)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except (ValoriError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())

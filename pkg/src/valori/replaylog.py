"""Append-only command log (`.vkl` files) and replay engine.

File layout (little-endian; see docs/log-format.md):

  header   magic "VKL1" | version u16 | precision u8 | dim u32 | M u32
           | ef_construction u32 | ef_search u32
  records  length u32 (payload bytes) | opcode u8 | payload | crc32 u32

Payloads carry Q16.16 raw coordinates only — floats were converted at the
ingestion boundary, so the log replays bit-identically on any host. The
CRC32 covers opcode + payload and is cheap corruption detection, distinct
from the cryptographic state hash.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernel as _kernel
from .errors import (
    BadMagic,
    ConfigMismatch,
    CorruptRecord,
    IoFailure,
    ReplayDivergence,
    UnsupportedPrecision,
    UnsupportedVersion,
)
from .fixedpoint import FixedVector
from .kernel import Command, Delete, Insert, KernelConfig, Link, Opcode

MAGIC = b"VKL1"
VERSION = 1
_HEADER = struct.Struct("<4sHBIIII")

FILE_EXTENSION = ".vkl"


def _pack_config(config: KernelConfig) -> bytes:
    return _HEADER.pack(
        MAGIC,
        VERSION,
        int(config.precision),
        config.dim,
        config.hnsw.m,
        config.hnsw.ef_construction,
        config.hnsw.ef_search,
    )


def _read_config(data: bytes):
    from .kernel import HnswParams, Precision

    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise BadMagic("not a VKL1 log")
    magic, version, precision, dim, m, ef_c, ef_s = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersion(f"log version {version}")
    if precision != int(Precision.Q16_16):
        raise UnsupportedPrecision(f"precision tag {precision}")
    config = KernelConfig(
        dim=dim, hnsw=HnswParams(m=m, ef_construction=ef_c, ef_search=ef_s)
    )
    return config, _HEADER.size


def encode_command(cmd: Command) -> bytes:
    """One framed record: length | opcode | payload | crc32."""
    if isinstance(cmd, Insert):
        coords = cmd.vector.coords.astype("<i4").tobytes()
        payload = (
            struct.pack("<QI", cmd.id, cmd.vector.dim)
            + coords
            + struct.pack("<I", len(cmd.metadata))
            + cmd.metadata
        )
        opcode = Opcode.INSERT
    elif isinstance(cmd, Delete):
        payload = struct.pack("<Q", cmd.id)
        opcode = Opcode.DELETE
    elif isinstance(cmd, Link):
        payload = struct.pack("<QQ", cmd.a, cmd.b)
        opcode = Opcode.LINK
    else:
        raise TypeError(f"unknown command {cmd!r}")
    body = bytes([opcode]) + payload
    crc = zlib.crc32(body) & 0xFFFFFFFF
    return struct.pack("<I", len(payload)) + body + struct.pack("<I", crc)


def _decode_payload(opcode: int, payload: bytes, index: int) -> Command:
    try:
        if opcode == Opcode.INSERT:
            vid, dim = struct.unpack_from("<QI", payload)
            off = 12
            raws = np.frombuffer(payload, dtype="<i4", count=dim, offset=off)
            off += 4 * dim
            (mlen,) = struct.unpack_from("<I", payload, off)
            off += 4
            meta = payload[off : off + mlen]
            if len(meta) != mlen or off + mlen != len(payload):
                raise CorruptRecord(index, "payload length mismatch")
            return Insert(vid, FixedVector(raws), bytes(meta))
        if opcode == Opcode.DELETE:
            if len(payload) != 8:
                raise CorruptRecord(index, "bad delete payload")
            return Delete(struct.unpack("<Q", payload)[0])
        if opcode == Opcode.LINK:
            if len(payload) != 16:
                raise CorruptRecord(index, "bad link payload")
            a, b = struct.unpack("<QQ", payload)
            return Link(a, b)
    except (struct.error, ValueError) as e:
        if isinstance(e, CorruptRecord):
            raise
        raise CorruptRecord(index, str(e)) from e
    raise CorruptRecord(index, f"unknown opcode {opcode}")


def iter_records(data: bytes, offset: int) -> Iterator[Command]:
    """Walk the record stream; CRC-checks every record."""
    index = 0
    off = offset
    n = len(data)
    while off < n:
        if off + 4 > n:
            raise CorruptRecord(index, "truncated length field")
        (plen,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + 1 + plen + 4 > n:
            raise CorruptRecord(index, "truncated record")
        body = data[off : off + 1 + plen]
        off += 1 + plen
        (crc,) = struct.unpack_from("<I", data, off)
        off += 4
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise CorruptRecord(index, "crc mismatch")
        yield _decode_payload(body[0], body[1:], index)
        index += 1


class LogWriter:
    """Single appender; stores accepted commands only. `fsync_policy` is
    "record" (durable per append) or "batch" (flush on close) — durability
    is orthogonal to determinism."""

    def __init__(self, path, config: KernelConfig, fsync_policy: str = "record"):
        if fsync_policy not in ("record", "batch"):
            raise ValueError("fsync_policy must be 'record' or 'batch'")
        self.path = os.fspath(path)
        self.config = config
        self.fsync_policy = fsync_policy
        try:
            exists = os.path.exists(self.path) and os.path.getsize(self.path) > 0
            self._fh = open(self.path, "ab")
            if not exists:
                self._fh.write(_pack_config(config))
                self._fh.flush()
        except OSError as e:
            raise IoFailure(str(e)) from e

    def append(self, cmd: Command) -> None:
        try:
            self._fh.write(encode_command(cmd))
            if self.fsync_policy == "record":
                self._fh.flush()
                os.fsync(self._fh.fileno())
        except OSError as e:
            raise IoFailure(str(e)) from e

    def close(self) -> None:
        try:
            self._fh.flush()
            if self.fsync_policy == "batch":
                os.fsync(self._fh.fileno())
            self._fh.close()
        except OSError as e:
            raise IoFailure(str(e)) from e

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path):
    """Returns (config, command iterator) for a log file."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise IoFailure(str(e)) from e
    config, offset = _read_config(data)
    return config, iter_records(data, offset)


def replay(path, initial: "_kernel.KernelState | None" = None):
    """Apply every record in order; returns (state, final hash hex).

    An apply error mid-replay means the log was tampered with or written
    by an incompatible version and aborts with ReplayDivergence.
    """
    config, records = read_log(path)
    if initial is not None:
        if initial.config != config:
            raise ConfigMismatch(
                f"log config {config} != kernel config {initial.config}"
            )
        state = initial
    else:
        state = _kernel.new_state(config)
    for index, cmd in enumerate(records):
        try:
            _kernel.apply(state, cmd)
        except Exception as e:
            raise ReplayDivergence(index, e) from e
    return state, _kernel.state_hash(state)


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    final_hash: str
    expected_hash: str
    record_count: int
    clock: int


def verify(path, expected_hash: str) -> VerifyReport:
    """Replay the log and compare the final hash against `expected_hash`."""
    config, records = read_log(path)
    state = _kernel.new_state(config)
    count = 0
    for index, cmd in enumerate(records):
        try:
            _kernel.apply(state, cmd)
        except Exception as e:
            raise ReplayDivergence(index, e) from e
        count += 1
    final = _kernel.state_hash(state)
    expected = expected_hash.lower()
    return VerifyReport(final == expected, final, expected, count, state.clock)

"""The pure state machine: S_{t+1} = apply(S_t, command).

All mutation flows through `apply` on a totally ordered command stream.
Validation happens completely before any mutation, so a rejected command
leaves the state bit-identical. Queries are read-only and never advance
the clock.
"""

from __future__ import annotations

import hashlib
import struct as _struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import snapshot as _snapshot
from .errors import (
    DimensionMismatch,
    DuplicateId,
    SelfLink,
    Unimplemented,
    UnknownId,
)
from .fixedpoint import FixedVector, batch_l2_sq_raw
from .index import HnswGraph

MAX_METADATA = 64 * 1024
MAX_ID = (1 << 64) - 1


class Precision(IntEnum):
    """Numeric precision contracts. Only Q16_16 is executable; the wider
    formats are declared identifiers for forward compatibility."""

    Q16_16 = 1
    Q32_32 = 2
    Q64_64 = 3


@dataclass(frozen=True)
class HnswParams:
    m: int = 16
    ef_construction: int = 128
    ef_search: int = 768

    def __post_init__(self):
        if self.m < 1 or self.ef_construction < 1 or self.ef_search < 1:
            raise ValueError("HNSW parameters must be positive")


@dataclass(frozen=True)
class KernelConfig:
    dim: int = 384
    precision: Precision = Precision.Q16_16
    hnsw: HnswParams = field(default_factory=HnswParams)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.precision != Precision.Q16_16:
            raise Unimplemented(
                f"precision contract {Precision(self.precision).name} is declared but not implemented"
            )


class Opcode(IntEnum):
    INSERT = 1
    DELETE = 2
    LINK = 3


@dataclass(frozen=True)
class Insert:
    id: int
    vector: FixedVector
    metadata: bytes = b""

    opcode = Opcode.INSERT


@dataclass(frozen=True)
class Delete:
    id: int

    opcode = Opcode.DELETE


@dataclass(frozen=True)
class Link:
    a: int
    b: int

    opcode = Opcode.LINK


Command = Insert | Delete | Link


@dataclass(frozen=True)
class ApplyReceipt:
    clock: int
    opcode: Opcode
    ids: tuple[int, ...]


@dataclass(frozen=True)
class SearchResult:
    """Ranked (id, wide squared-L2 distance) pairs under total order."""

    entries: tuple[tuple[int, int], ...]

    def ids(self) -> list[int]:
        return [i for i, _ in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


class _VectorStore:
    """Row-matrix cache of raw coordinates for fast batch distances.

    Row assignment is an internal detail: it never enters serialization and
    cannot affect results (distances are exact integers)."""

    def __init__(self, dim: int):
        self.dim = dim
        self._mat = np.empty((0, dim), dtype=np.int32)
        self._rows: dict[int, int] = {}
        self._free: list[int] = []

    def add(self, vid: int, coords: np.ndarray) -> None:
        if self._free:
            row = self._free.pop()
        else:
            if len(self._rows) >= self._mat.shape[0]:
                grow = max(64, self._mat.shape[0])
                self._mat = np.vstack(
                    [self._mat, np.empty((grow, self.dim), dtype=np.int32)]
                )
            row = len(self._rows)
            # rows are dense except for freed slots
            while row in self._rows.values():  # pragma: no cover - defensive
                row += 1
        self._mat[row] = coords
        self._rows[vid] = row

    def drop(self, vid: int) -> None:
        self._free.append(self._rows.pop(vid))

    def get(self, vid: int) -> np.ndarray:
        return self._mat[self._rows[vid]]

    def dists_from_raw(self, q64: np.ndarray, ids: list[int]) -> np.ndarray:
        rows = [self._rows[i] for i in ids]
        return batch_l2_sq_raw(self._mat[rows], q64)


class KernelState:
    """Complete memory state: vectors, metadata, links, tombstones, logical
    clock and the HNSW graph. Canonical iteration order everywhere is
    ascending key order (enforced at serialization time)."""

    def __init__(self, config: KernelConfig):
        self.config = config
        self.clock = 0
        self.vectors: dict[int, np.ndarray] = {}
        self.metadata: dict[int, bytes] = {}
        self.links: set[tuple[int, int]] = set()
        self.tombstones: set[int] = set()
        self.graph = HnswGraph()
        self._store = _VectorStore(config.dim)
        # Per-entry serialized bytes, keyed by id; kept in lockstep with
        # vectors/metadata so per-mutation hashing stays cheap.
        self._venc: dict[int, bytes] = {}
        self._menc: dict[int, bytes] = {}

    # -- internal distance callbacks ----------------------------------

    def _dist_from_query(self, q_raw: np.ndarray):
        q64 = q_raw.astype(np.int64)
        return lambda ids: self._store.dists_from_raw(q64, ids)

    def _dist_between(self, center: int, ids: list[int]) -> np.ndarray:
        q64 = self._store.get(center).astype(np.int64)
        return self._store.dists_from_raw(q64, ids)

    def is_live(self, vid: int) -> bool:
        return vid in self.vectors


def new_state(config: KernelConfig) -> KernelState:
    return KernelState(config)


def _check_id(vid: int) -> None:
    if not (0 <= vid <= MAX_ID):
        raise ValueError(f"id {vid} outside unsigned 64-bit range")


def apply(state: KernelState, cmd: Command) -> tuple[KernelState, ApplyReceipt]:
    """Apply one command; validates fully before mutating. On error the
    state is untouched (bit-identical serialization)."""
    if isinstance(cmd, Insert):
        _check_id(cmd.id)
        if cmd.vector.dim != state.config.dim:
            raise DimensionMismatch(
                f"vector dim {cmd.vector.dim} != configured dim {state.config.dim}"
            )
        if cmd.id in state.vectors or cmd.id in state.tombstones:
            raise DuplicateId(f"id {cmd.id} already used")
        if len(cmd.metadata) > MAX_METADATA:
            raise ValueError(f"metadata exceeds {MAX_METADATA} bytes")
        coords = cmd.vector.coords
        meta = bytes(cmd.metadata)
        state.vectors[cmd.id] = coords
        state.metadata[cmd.id] = meta
        state._venc[cmd.id] = _struct.pack("<Q", cmd.id) + coords.astype("<i4").tobytes()
        state._menc[cmd.id] = _struct.pack("<QI", cmd.id, len(meta)) + meta
        state._store.add(cmd.id, coords)
        state.graph.insert(
            cmd.id,
            state._dist_from_query(coords),
            state._dist_between,
            state.config.hnsw.m,
            state.config.hnsw.ef_construction,
        )
        affected = (cmd.id,)
    elif isinstance(cmd, Delete):
        _check_id(cmd.id)
        if cmd.id not in state.vectors:
            raise UnknownId(f"id {cmd.id} is not live")
        state.graph.remove(cmd.id, state._dist_between, state.config.hnsw.m)
        del state.vectors[cmd.id]
        del state.metadata[cmd.id]
        del state._venc[cmd.id]
        del state._menc[cmd.id]
        state._store.drop(cmd.id)
        state.links = {p for p in state.links if cmd.id not in p}
        state.tombstones.add(cmd.id)
        affected = (cmd.id,)
    elif isinstance(cmd, Link):
        _check_id(cmd.a)
        _check_id(cmd.b)
        if cmd.a == cmd.b:
            raise SelfLink(f"link({cmd.a}, {cmd.a}) rejected")
        for vid in (cmd.a, cmd.b):
            if vid not in state.vectors:
                raise UnknownId(f"id {vid} is not live")
        state.links.add((min(cmd.a, cmd.b), max(cmd.a, cmd.b)))
        affected = (min(cmd.a, cmd.b), max(cmd.a, cmd.b))
    else:
        raise TypeError(f"unknown command {cmd!r}")

    state.clock += 1
    return state, ApplyReceipt(state.clock, cmd.opcode, affected)


def query(
    state: KernelState, q: FixedVector, k: int, ef_search: int | None = None
) -> SearchResult:
    """Top-k live ids by (squared L2 ascending, id ascending). Read-only."""
    if q.dim != state.config.dim:
        raise DimensionMismatch(
            f"query dim {q.dim} != configured dim {state.config.dim}"
        )
    if k < 1:
        raise ValueError("k must be >= 1")
    ef = state.config.hnsw.ef_search if ef_search is None else ef_search
    hits = state.graph.search(state._dist_from_query(q.coords), k, ef)
    return SearchResult(tuple((i, d) for d, i in hits))


def state_hash(state: KernelState) -> str:
    """SHA-256 of the canonical snapshot bytes, lowercase hex."""
    h = hashlib.sha256()
    _snapshot.emit(state, h.update)
    return h.hexdigest()

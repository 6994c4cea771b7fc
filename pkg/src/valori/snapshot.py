"""Canonical binary serialization of the kernel state (`.vks` files).

Byte layout (all integers little-endian; see docs/snapshot-format.md):

  header   magic "VKS1" | version u16 | precision u8 | dim u32 | M u32
           | ef_construction u32 | ef_search u32 | clock u64
           | section_count u32 (= 5)
  vectors      count u64, then per id ascending: id u64, dim x i32 raws
  metadata     count u64, then per id ascending: id u64, len u32, bytes
  links        count u64, then per (a,b) ascending lexicographic: a u64, b u64
  tombstones   count u64, then ids u64 ascending
  graph        has_entry u8, entry u64, level_count u32, then per level
               ascending: node count u64, then per node ascending id:
               id u64, neighbor count u32, neighbor ids u64 ascending

Serialization is injective on valid states and contains nothing
host-dependent; equal bytes <=> equal states, and the SHA-256 of the bytes
is the state's content hash.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .errors import (
    BadMagic,
    CorruptSection,
    IntegrityViolation,
    UnsupportedPrecision,
    UnsupportedVersion,
)
from .index import LEVEL_CAP, HnswGraph, level_for

MAGIC = b"VKS1"
VERSION = 1
SECTION_COUNT = 5
_HEADER = struct.Struct("<4sHBIIIIQI")

FILE_EXTENSION = ".vks"


def _pack_header(state) -> bytes:
    cfg = state.config
    return _HEADER.pack(
        MAGIC,
        VERSION,
        int(cfg.precision),
        cfg.dim,
        cfg.hnsw.m,
        cfg.hnsw.ef_construction,
        cfg.hnsw.ef_search,
        state.clock,
        SECTION_COUNT,
    )


def emit(state, write) -> None:
    """Stream the canonical snapshot bytes of `state` into `write`.

    `write` is any callable accepting bytes (a hasher's update, a file's
    write, a bytearray's extend); streaming keeps per-mutation hashing
    cheap because no full buffer is materialized.
    """
    write(_pack_header(state))
    ids = sorted(state.vectors)
    count = struct.pack("<Q", len(ids))
    write(count)
    venc = state._venc
    for i in ids:
        write(venc[i])
    write(count)
    menc = state._menc
    for i in ids:
        write(menc[i])
    links = sorted(state.links)
    write(struct.pack("<Q", len(links)))
    if links:
        write(np.asarray(links, dtype="<u8").tobytes())
    tombs = sorted(state.tombstones)
    write(struct.pack("<Q", len(tombs)))
    if tombs:
        write(np.asarray(tombs, dtype="<u8").tobytes())
    g = state.graph
    if g.entry_point is None:
        write(struct.pack("<BQI", 0, 0, 0))
    else:
        write(struct.pack("<BQI", 1, g.entry_point, g.max_level + 1))
        for level, layer in enumerate(g.layers):
            write(struct.pack("<Q", len(layer)))
            for nid in sorted(layer):
                write(g.encoded_node(level, nid))


def serialize(state) -> bytes:
    buf = bytearray()
    emit(state, buf.extend)
    return bytes(buf)


def content_hash(data: bytes) -> str:
    """SHA-256 over the exact snapshot bytes, lowercase hex."""
    return hashlib.sha256(data).hexdigest()


class _Reader:
    def __init__(self, data: bytes, section: str):
        self.data = data
        self.off = 0
        self.section = section

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise CorruptSection(self.section, self.off, "truncated")
        b = self.data[self.off : self.off + n]
        self.off += n
        return b

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def deserialize(data: bytes):
    """Decode and fully validate a snapshot; returns the exact KernelState.

    Canonical order is enforced on read, never silently repaired: any
    out-of-order key, asymmetric edge or dangling reference is an
    IntegrityViolation.
    """
    from .kernel import HnswParams, KernelConfig, KernelState, Precision

    r = _Reader(data, "header")
    if r.take(4) != MAGIC:
        raise BadMagic("not a VKS1 snapshot")
    version = r.u16()
    if version != VERSION:
        raise UnsupportedVersion(f"snapshot version {version}")
    precision = r.u8()
    if precision != int(Precision.Q16_16):
        raise UnsupportedPrecision(f"precision tag {precision}")
    dim = r.u32()
    m = r.u32()
    ef_c = r.u32()
    ef_s = r.u32()
    clock = r.u64()
    sections = r.u32()
    if sections != SECTION_COUNT:
        raise CorruptSection("header", r.off, f"section_count {sections}")
    if dim < 1 or m < 1 or ef_c < 1 or ef_s < 1:
        raise IntegrityViolation("non-positive config field")
    config = KernelConfig(
        dim=dim, hnsw=HnswParams(m=m, ef_construction=ef_c, ef_search=ef_s)
    )
    state = KernelState(config)
    state.clock = clock

    r.section = "vectors"
    n = r.u64()
    prev = -1
    for _ in range(n):
        vid = r.u64()
        if vid <= prev:
            raise IntegrityViolation("vector ids not strictly ascending")
        prev = vid
        raws = np.frombuffer(r.take(4 * dim), dtype="<i4").astype(np.int32)
        raws.setflags(write=False)
        state.vectors[vid] = raws
        state._store.add(vid, raws)
        state._venc[vid] = struct.pack("<Q", vid) + raws.astype("<i4").tobytes()

    r.section = "metadata"
    mcount = r.u64()
    if mcount != n:
        raise IntegrityViolation("metadata ids differ from vector ids")
    prev = -1
    for _ in range(mcount):
        vid = r.u64()
        if vid <= prev:
            raise IntegrityViolation("metadata ids not strictly ascending")
        prev = vid
        if vid not in state.vectors:
            raise IntegrityViolation(f"metadata for unknown id {vid}")
        length = r.u32()
        blob = bytes(r.take(length))
        state.metadata[vid] = blob
        state._menc[vid] = struct.pack("<QI", vid, length) + blob

    r.section = "links"
    lcount = r.u64()
    prev_pair = (-1, -1)
    for _ in range(lcount):
        a = r.u64()
        b = r.u64()
        if not a < b:
            raise IntegrityViolation(f"link ({a}, {b}) not canonical (a < b)")
        if (a, b) <= prev_pair:
            raise IntegrityViolation("links not strictly ascending")
        prev_pair = (a, b)
        for vid in (a, b):
            if vid not in state.vectors:
                raise IntegrityViolation(f"link references non-live id {vid}")
        state.links.add((a, b))

    r.section = "tombstones"
    tcount = r.u64()
    prev = -1
    for _ in range(tcount):
        vid = r.u64()
        if vid <= prev:
            raise IntegrityViolation("tombstones not strictly ascending")
        prev = vid
        if vid in state.vectors:
            raise IntegrityViolation(f"tombstoned id {vid} is live")
        state.tombstones.add(vid)

    r.section = "graph"
    has_entry = r.u8()
    entry = r.u64()
    level_count = r.u32()
    g = HnswGraph()
    if has_entry not in (0, 1):
        raise CorruptSection("graph", r.off, f"entry flag {has_entry}")
    if has_entry == 0:
        if entry != 0 or level_count != 0 or state.vectors:
            raise IntegrityViolation("empty graph with live vectors or stray fields")
    else:
        for level in range(level_count):
            g.layers.append({})
            ncount = r.u64()
            prev = -1
            for _ in range(ncount):
                nid = r.u64()
                if nid <= prev:
                    raise IntegrityViolation("graph node ids not strictly ascending")
                prev = nid
                deg = r.u32()
                neigh = [r.u64() for _ in range(deg)]
                g.layers[level][nid] = neigh
        _validate_graph(g, entry, state, m)
        g.entry_point = entry
    state.graph = g

    if r.off != len(data):
        raise CorruptSection("trailer", r.off, "trailing bytes")
    return state


def _validate_graph(g: HnswGraph, entry: int, state, m: int) -> None:
    if not g.layers or not g.layers[-1]:
        raise IntegrityViolation("graph top layer empty")
    if set(g.layers[0]) != set(state.vectors):
        raise IntegrityViolation("graph layer 0 nodes differ from live vectors")
    for level, layer in enumerate(g.layers):
        cap = 2 * m if level == 0 else m
        for nid, neigh in layer.items():
            lvl = LEVEL_CAP if nid == entry else level_for(nid)
            if level > lvl:
                raise IntegrityViolation(
                    f"node {nid} appears above its level {lvl}"
                )
            if neigh != sorted(set(neigh)):
                raise IntegrityViolation(
                    f"adjacency of node {nid} not strictly ascending"
                )
            if nid in neigh:
                raise IntegrityViolation(f"self-edge on node {nid}")
            if len(neigh) > cap:
                raise IntegrityViolation(f"node {nid} exceeds degree cap {cap}")
            for nb in neigh:
                other = layer.get(nb)
                if other is None:
                    raise IntegrityViolation(
                        f"edge {nid}->{nb} references missing node"
                    )
                if nid not in other:
                    raise IntegrityViolation(f"edge {nid}-{nb} not symmetric")
        if level > 0:
            if not set(layer) <= set(g.layers[level - 1]):
                raise IntegrityViolation("layer membership not nested")
    if entry not in g.layers[0]:
        raise IntegrityViolation(f"entry point {entry} not in graph")
    # every node must appear on all layers up to its own level; the entry
    # point spans the whole hierarchy
    if len(g.layers) != LEVEL_CAP + 1:
        raise IntegrityViolation(
            f"graph has {len(g.layers)} layers, expected {LEVEL_CAP + 1}"
        )
    for nid in g.layers[0]:
        lvl = LEVEL_CAP if nid == entry else level_for(nid)
        for level in range(lvl + 1):
            if nid not in g.layers[level]:
                raise IntegrityViolation(
                    f"node {nid} missing from layer {level}"
                )
    g.levels = {
        nid: (LEVEL_CAP if nid == entry else level_for(nid))
        for nid in g.layers[0]
    }

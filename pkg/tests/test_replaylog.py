import json
import struct

import pytest

from valori.errors import (
    BadMagic,
    ConfigMismatch,
    CorruptRecord,
    ReplayDivergence,
    UnsupportedVersion,
)
from valori.fixedpoint import FixedVector
from valori.kernel import (
    Delete,
    HnswParams,
    Insert,
    KernelConfig,
    Link,
    apply,
    new_state,
    state_hash,
)
from valori.replaylog import (
    MAGIC,
    LogWriter,
    encode_command,
    iter_records,
    read_log,
    replay,
    verify,
)

from conftest import FIXTURES, random_raws

PINS = json.loads((FIXTURES / "pins.json").read_text())


def make_commands(rng, dim, n=12):
    cmds = [Insert(i, FixedVector(random_raws(rng, dim)), f"m{i}".encode()) for i in range(n)]
    cmds += [Link(0, 2), Delete(1)]
    return cmds


def write_log(path, config, cmds, policy="batch"):
    with LogWriter(path, config, fsync_policy=policy) as w:
        for c in cmds:
            w.append(c)


class TestFraming:
    def test_round_trip_each_opcode(self, rng):
        cmds = [
            Insert(7, FixedVector(random_raws(rng, 4)), b"meta"),
            Delete(9),
            Link(3, 12),
        ]
        for cmd in cmds:
            rec = encode_command(cmd)
            (plen,) = struct.unpack_from("<I", rec)
            assert len(rec) == 4 + 1 + plen + 4
            decoded = list(iter_records(rec, 0))
            assert decoded == [cmd]

    def test_header_echoes_config(self, tmp_path, small_config):
        path = tmp_path / "a.vkl"
        write_log(path, small_config, [])
        config, records = read_log(path)
        assert config == small_config
        assert list(records) == []
        assert path.read_bytes()[:4] == MAGIC

    def test_crc_flip_detected(self, rng):
        rec = bytearray(encode_command(Insert(1, FixedVector(random_raws(rng, 4)))))
        rec[10] ^= 0x01
        with pytest.raises(CorruptRecord):
            list(iter_records(bytes(rec), 0))

    def test_truncated_record(self, rng):
        rec = encode_command(Delete(4))
        with pytest.raises(CorruptRecord):
            list(iter_records(rec[:-2], 0))

    def test_unknown_opcode(self):
        body = bytes([9]) + b"\x00" * 8
        import zlib

        rec = struct.pack("<I", 8) + body + struct.pack("<I", zlib.crc32(body))
        with pytest.raises(CorruptRecord):
            list(iter_records(rec, 0))


class TestReplay:
    def test_replay_matches_live_state(self, tmp_path, small_config, rng):
        cmds = make_commands(rng, 4)
        live = new_state(small_config)
        for c in cmds:
            apply(live, c)
        path = tmp_path / "log.vkl"
        write_log(path, small_config, cmds)
        state, final = replay(path)
        assert final == state_hash(live)
        assert state.clock == live.clock

    def test_replay_thrice_identical(self, tmp_path, small_config, rng):
        path = tmp_path / "log.vkl"
        write_log(path, small_config, make_commands(rng, 4))
        hashes = {replay(path)[1] for _ in range(3)}
        assert len(hashes) == 1

    def test_replay_onto_initial_requires_matching_config(self, tmp_path, small_config, rng):
        path = tmp_path / "log.vkl"
        write_log(path, small_config, make_commands(rng, 4, n=3))
        other = KernelConfig(dim=8, hnsw=HnswParams(m=4, ef_construction=16, ef_search=16))
        with pytest.raises(ConfigMismatch):
            replay(path, initial=new_state(other))
        state, _ = replay(path, initial=new_state(small_config))
        assert state.clock == 5  # 3 inserts + link + delete

    def test_divergence_carries_record_index(self, tmp_path, small_config, rng):
        cmds = [
            Insert(1, FixedVector(random_raws(rng, 4))),
            Delete(99),  # invalid: id never inserted
        ]
        path = tmp_path / "bad.vkl"
        write_log(path, small_config, cmds)
        with pytest.raises(ReplayDivergence) as ei:
            replay(path)
        assert ei.value.index == 1

    def test_golden_log_pin(self):
        state, final = replay(FIXTURES / "golden10.vkl")
        assert final == PINS["golden10_hash"]
        assert state.clock == PINS["golden10_clock"]

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.vkl"
        p.write_bytes(b"NOPE" + b"\x00" * 30)
        with pytest.raises(BadMagic):
            read_log(p)

    def test_bad_version(self, tmp_path, small_config):
        p = tmp_path / "x.vkl"
        write_log(p, small_config, [])
        data = bytearray(p.read_bytes())
        data[4] = 9
        p.write_bytes(bytes(data))
        with pytest.raises(UnsupportedVersion):
            read_log(p)


class TestWriter:
    def test_append_after_reopen(self, tmp_path, small_config, rng):
        path = tmp_path / "log.vkl"
        cmds = make_commands(rng, 4, n=6)
        write_log(path, small_config, cmds[:4])
        write_log(path, small_config, cmds[4:])  # reopen appends, no second header
        config, records = read_log(path)
        assert list(records) == cmds
        assert path.read_bytes().count(MAGIC) == 1

    def test_record_policy_durable_per_append(self, tmp_path, small_config, rng):
        path = tmp_path / "log.vkl"
        w = LogWriter(path, small_config, fsync_policy="record")
        cmd = Insert(1, FixedVector(random_raws(rng, 4)))
        w.append(cmd)
        # visible to an independent reader before close
        config, records = read_log(path)
        assert list(records) == [cmd]
        w.close()

    def test_bad_policy(self, tmp_path, small_config):
        with pytest.raises(ValueError):
            LogWriter(tmp_path / "x.vkl", small_config, fsync_policy="never")


class TestVerify:
    def test_pass_and_fail(self, tmp_path, small_config, rng):
        path = tmp_path / "log.vkl"
        cmds = make_commands(rng, 4)
        write_log(path, small_config, cmds)
        _, final = replay(path)
        good = verify(path, final.upper())  # case-insensitive
        assert good.ok and good.record_count == len(cmds) == good.clock
        bad = verify(path, "0" * 64)
        assert not bad.ok and bad.final_hash == final

    def test_single_bit_flip_in_record_detected(self, tmp_path, small_config, rng):
        path = tmp_path / "log.vkl"
        write_log(path, small_config, make_commands(rng, 4))
        data = path.read_bytes()
        _, final = replay(path)
        flip_at = len(data) // 2  # somewhere inside the record stream
        mutated = bytearray(data)
        mutated[flip_at] ^= 0x01
        bad = tmp_path / "bad.vkl"
        bad.write_bytes(bytes(mutated))
        with pytest.raises((CorruptRecord, ReplayDivergence)):
            verify(bad, final)

"""Regenerate the committed test fixtures.

Everything here is deterministic: rerunning this script must reproduce the
committed files byte for byte (the golden-hash tests enforce that).
"""

import json
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from valori import replaylog, snapshot  # noqa: E402
from valori.fixedpoint import FixedVector, from_float_array  # noqa: E402
from valori.kernel import (  # noqa: E402
    Delete,
    HnswParams,
    Insert,
    KernelConfig,
    Link,
    apply,
    new_state,
    state_hash,
)

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"

# First five dimensions of the reference x86 embedding, as raw IEEE bits.
X86_FLOAT_BITS = [0xBD8276F8, 0x3D6BB481, 0x3D1DCDF1, 0xBD601D21, 0x3B761FFB]

GOLDEN_CONFIG = KernelConfig(
    dim=8, hnsw=HnswParams(m=4, ef_construction=16, ef_search=16)
)


def golden_commands():
    rng = np.random.default_rng(1234)
    cmds = []
    for i in range(10):
        vec = rng.standard_normal(8)
        vec /= np.linalg.norm(vec)
        meta = f"doc-{i}".encode()
        cmds.append(Insert(i, FixedVector(from_float_array(vec)), meta))
    cmds.append(Link(0, 3))
    cmds.append(Link(7, 2))
    cmds.append(Delete(5))
    return cmds


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    bits = np.array(X86_FLOAT_BITS, dtype="<u4")
    np.save(FIXTURES / "x86_first5.npy", bits.view("<f4").reshape(1, 5))

    log_path = FIXTURES / "golden10.vkl"
    log_path.unlink(missing_ok=True)
    state = new_state(GOLDEN_CONFIG)
    with replaylog.LogWriter(log_path, GOLDEN_CONFIG, fsync_policy="batch") as w:
        for cmd in golden_commands():
            apply(state, cmd)
            w.append(cmd)
    data = snapshot.serialize(state)
    (FIXTURES / "golden10.vks").write_bytes(data)

    empty = new_state(
        KernelConfig(dim=384, hnsw=HnswParams(m=16, ef_construction=128, ef_search=64))
    )
    pins = {
        "golden10_hash": state_hash(state),
        "golden10_clock": state.clock,
        "empty_state_hash_384": state_hash(empty),
        "empty_snapshot_len": len(snapshot.serialize(empty)),
    }
    (FIXTURES / "pins.json").write_text(json.dumps(pins, indent=2) + "\n")
    print(json.dumps(pins, indent=2))


if __name__ == "__main__":
    main()

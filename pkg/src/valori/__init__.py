"""Valori: a deterministic fixed-point vector memory kernel.

Embeddings are stored in Q16.16 fixed point, every mutation flows through a
pure state-machine transition function over a totally ordered command log,
the HNSW index is fully derandomized, and snapshots / state hashes / k-NN
results are bit-identical for any replay of the same log on any host.
"""

from .errors import ValoriError
from .fixedpoint import Fixed32, FixedVector, dot_wide, l2_sq_wide
from .kernel import (
    ApplyReceipt,
    Delete,
    HnswParams,
    Insert,
    KernelConfig,
    KernelState,
    Link,
    Precision,
    SearchResult,
    apply,
    new_state,
    query,
    state_hash,
)

__all__ = [
    "ValoriError",
    "Fixed32",
    "FixedVector",
    "dot_wide",
    "l2_sq_wide",
    "ApplyReceipt",
    "Delete",
    "HnswParams",
    "Insert",
    "KernelConfig",
    "KernelState",
    "Link",
    "Precision",
    "SearchResult",
    "apply",
    "new_state",
    "query",
    "state_hash",
]

__version__ = "0.1.0"

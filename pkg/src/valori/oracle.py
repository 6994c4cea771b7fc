"""Independent verification machinery for the kernel.

Everything here is deliberately simple and brute-force: exact full-scan
k-NN in fixed point and in double precision, big-integer arithmetic checks
for the wide accumulators, and Recall@k measurement. None of it shares a
code path with the index it verifies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch
from .fixedpoint import FixedVector, batch_l2_sq_raw


@dataclass(frozen=True)
class RecallReport:
    per_query_overlap: tuple[float, ...]
    mean_recall_at_k: float
    k: int
    query_count: int

    def to_table(self) -> str:
        lines = [
            f"queries: {self.query_count}  k: {self.k}",
            f"mean recall@{self.k}: {self.mean_recall_at_k:.4f}",
        ]
        return "\n".join(lines)

    def to_csv_lines(self) -> list[str]:
        lines = ["query,overlap"]
        lines += [f"{i},{o:.6f}" for i, o in enumerate(self.per_query_overlap)]
        lines.append(f"mean,{self.mean_recall_at_k:.6f}")
        return lines


class ExactFixedScanner:
    """Exact fixed-point k-NN over a set of (id, raw-coords) pairs."""

    def __init__(self, vectors: Mapping[int, np.ndarray]):
        self.ids = np.array(sorted(vectors), dtype=np.uint64)
        if len(self.ids):
            self.mat = np.stack([vectors[int(i)] for i in self.ids])
        else:
            self.mat = np.empty((0, 0), dtype=np.int32)

    def knn(self, q_raw: np.ndarray, k: int) -> list[tuple[int, int]]:
        if len(self.ids) == 0:
            return []
        if self.mat.shape[1] != q_raw.size:
            raise DimensionMismatch(
                f"stored dim {self.mat.shape[1]} != query dim {q_raw.size}"
            )
        d = batch_l2_sq_raw(self.mat, q_raw.astype(np.int64))
        order = sorted(range(len(self.ids)), key=lambda i: (int(d[i]), int(self.ids[i])))
        return [(int(self.ids[i]), int(d[i])) for i in order[:k]]


def exact_knn_fixed(
    vectors: Mapping[int, np.ndarray], q: FixedVector, k: int
) -> list[tuple[int, int]]:
    """Full scan under the (distance, id) total order; top k (id, dist)."""
    return ExactFixedScanner(vectors).knn(q.coords, k)


def exact_knn_float(
    float_vectors: np.ndarray, q_float: np.ndarray, k: int, ids: Sequence[int] | None = None
) -> list[int]:
    """Exact double-precision squared-L2 scan over the original float
    values (pre-quantization); ties broken by id ascending."""
    mat = np.asarray(float_vectors, dtype=np.float64)
    q = np.asarray(q_float, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != q.size:
        raise DimensionMismatch(
            f"stored shape {mat.shape} incompatible with query dim {q.size}"
        )
    if ids is None:
        ids = range(mat.shape[0])
    ids = list(ids)
    diff = mat - q
    d = np.einsum("ij,ij->i", diff, diff)
    order = sorted(range(mat.shape[0]), key=lambda i: (d[i], ids[i]))
    return [ids[i] for i in order[:k]]


def recall_at_k(list_a: Sequence[int], list_b: Sequence[int], k: int) -> float:
    """|a intersect b| / k."""
    sa, sb = set(list_a), set(list_b)
    if len(sa) > k or len(sb) > k:
        raise ValueError("result lists longer than k")
    return len(sa & sb) / k


def recall_report(
    baseline: Sequence[Sequence[int]], candidate: Sequence[Sequence[int]], k: int
) -> RecallReport:
    overlaps = tuple(recall_at_k(a, b, k) for a, b in zip(baseline, candidate))
    mean = sum(overlaps) / len(overlaps) if overlaps else 0.0
    return RecallReport(overlaps, mean, k, len(overlaps))


def bigint_dot_check(a_raw: Sequence[int], b_raw: Sequence[int]) -> int:
    """Arbitrary-precision dot product over raw values (exact)."""
    if len(a_raw) != len(b_raw):
        raise DimensionMismatch(f"{len(a_raw)} != {len(b_raw)}")
    return sum(int(x) * int(y) for x, y in zip(a_raw, b_raw))


def bigint_l2_sq_check(a_raw: Sequence[int], b_raw: Sequence[int]) -> int:
    """Arbitrary-precision sum of squared raw differences (exact)."""
    if len(a_raw) != len(b_raw):
        raise DimensionMismatch(f"{len(a_raw)} != {len(b_raw)}")
    return sum((int(x) - int(y)) ** 2 for x, y in zip(a_raw, b_raw))


def make_synthetic_corpus(n: int, dim: int, seed: int = 20260823) -> np.ndarray:
    """Seeded L2-normalized Gaussian float32 corpus, shape (n, dim)."""
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((n, dim)).astype(np.float32)
    norms = np.linalg.norm(mat.astype(np.float64), axis=1, keepdims=True)
    return (mat / norms).astype(np.float32)

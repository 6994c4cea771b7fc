"""Q16.16 fixed-point scalars and vectors.

All arithmetic inside the determinism boundary happens on 32-bit signed raw
integers (value = raw / 2^16). Narrow ops saturate at the raw bounds; wide
reductions (dot product, squared L2) accumulate in 64-bit signed integers
with wraparound semantics and are overflow-free for every supported input
domain (dim <= 65536, coords in [-1, 1]).

Determinism contract (documented in docs/determinism.md):
  * float -> fixed conversion rounds half away from zero on x * 2^16,
    then saturates;
  * mul_sat shifts the 64-bit product arithmetically right by 16
    (rounding toward negative infinity) before saturating;
  * wide sums run in strict index order 0..dim-1 — because 64-bit modular
    integer addition is associative, any evaluation order yields the same
    bits, which is what makes vectorized backends safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput

FRAC_BITS = 16
SCALE = 1 << FRAC_BITS
RAW_MIN = -(1 << 31)
RAW_MAX = (1 << 31) - 1
MAX_DIM = 1 << 16

_U64 = (1 << 64) - 1
_BIAS = 1 << 63


def _wrap64(x: int) -> int:
    """Reduce a python int to 64-bit signed two's-complement."""
    return ((x + _BIAS) & _U64) - _BIAS


def _sat32(raw: int) -> int:
    if raw > RAW_MAX:
        return RAW_MAX
    if raw < RAW_MIN:
        return RAW_MIN
    return raw


def from_float_raw(x: float) -> int:
    """Convert a finite float to a Q16.16 raw value.

    Rounds half away from zero on x * 2^16 and saturates. The scaling by a
    power of two is exact in IEEE double, so the result is a pure function
    of the input bit pattern.
    """
    if not math.isfinite(x):
        raise NonFiniteInput(f"cannot convert {x!r} to fixed-point")
    t = float(x) * SCALE
    if t >= RAW_MAX:
        return RAW_MAX
    if t <= RAW_MIN:
        return RAW_MIN
    # |t| < 2^31 so t +/- 0.5 is exact in double precision.
    r = math.floor(t + 0.5) if t >= 0.0 else math.ceil(t - 0.5)
    return _sat32(r)


def from_float_array(xs) -> np.ndarray:
    """Vectorized from_float_raw; returns int32 raws. Bit-equal to the
    scalar path (same exact scaling, same rounding)."""
    a = np.asarray(xs, dtype=np.float64)
    finite = np.isfinite(a)
    if not finite.all():
        bad = int(np.argmin(finite.ravel()))
        raise NonFiniteInput(f"non-finite coordinate at flat index {bad}")
    t = a * SCALE
    r = np.where(t >= 0.0, np.floor(t + 0.5), np.ceil(t - 0.5))
    r = np.clip(r, float(RAW_MIN), float(RAW_MAX))
    return r.astype(np.int32)


def to_float_raw(raw: int) -> float:
    """Exact: |raw| < 2^31 <= 2^53, so raw / 2^16 is representable."""
    return raw / SCALE


def add_sat_raw(a: int, b: int) -> int:
    return _sat32(a + b)


def sub_sat_raw(a: int, b: int) -> int:
    return _sat32(a - b)


def mul_sat_raw(a: int, b: int) -> int:
    # Full 64-bit product, arithmetic shift right 16 (floor), then saturate.
    return _sat32((a * b) >> FRAC_BITS)


@dataclass(frozen=True, slots=True)
class Fixed32:
    """A Q16.16 scalar; `raw` is the 32-bit signed representation."""

    raw: int

    def __post_init__(self):
        if not (RAW_MIN <= self.raw <= RAW_MAX):
            raise ValueError(f"raw {self.raw} outside 32-bit signed range")

    @classmethod
    def from_float(cls, x: float) -> "Fixed32":
        return cls(from_float_raw(x))

    def to_float(self) -> float:
        return to_float_raw(self.raw)

    def add_sat(self, other: "Fixed32") -> "Fixed32":
        return Fixed32(add_sat_raw(self.raw, other.raw))

    def sub_sat(self, other: "Fixed32") -> "Fixed32":
        return Fixed32(sub_sat_raw(self.raw, other.raw))

    def mul_sat(self, other: "Fixed32") -> "Fixed32":
        return Fixed32(mul_sat_raw(self.raw, other.raw))


class FixedVector:
    """An immutable vector of Q16.16 coordinates backed by an int32 array."""

    __slots__ = ("_coords",)

    def __init__(self, raw_coords):
        a = np.asarray(raw_coords, dtype=np.int32)
        if a.ndim != 1:
            raise ValueError("FixedVector expects a 1-D coordinate array")
        if a.size == 0:
            raise ValueError("FixedVector dimension must be positive")
        if a.size > MAX_DIM:
            raise DimensionMismatch(f"dim {a.size} exceeds maximum {MAX_DIM}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "_coords", a)

    @classmethod
    def from_floats(cls, xs) -> "FixedVector":
        return cls(from_float_array(xs))

    @property
    def dim(self) -> int:
        return int(self._coords.size)

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    def to_floats(self) -> np.ndarray:
        return self._coords.astype(np.float64) / SCALE

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, i: int) -> Fixed32:
        return Fixed32(int(self._coords[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FixedVector):
            return NotImplemented
        return self._coords.shape == other._coords.shape and bool(
            np.array_equal(self._coords, other._coords)
        )

    def __hash__(self):
        return hash(self._coords.tobytes())

    def __repr__(self) -> str:
        return f"FixedVector(dim={self.dim})"


def _check_dims(a: FixedVector, b: FixedVector) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} != dim {b.dim}")


def dot_wide(a: FixedVector, b: FixedVector) -> int:
    """Sum of raw products in a 64-bit signed accumulator (Q32.32 raw)."""
    _check_dims(a, b)
    return dot_wide_raw(a.coords, b.coords)


def l2_sq_wide(a: FixedVector, b: FixedVector) -> int:
    """Sum of squared raw differences in a 64-bit signed accumulator."""
    _check_dims(a, b)
    return l2_sq_wide_raw(a.coords, b.coords)


def dot_wide_raw(a: np.ndarray, b: np.ndarray) -> int:
    x = a.astype(np.int64)
    y = b.astype(np.int64)
    with np.errstate(over="ignore"):
        s = int(np.multiply(x, y).sum(dtype=np.int64))
    return s


def l2_sq_wide_raw(a: np.ndarray, b: np.ndarray) -> int:
    d = a.astype(np.int64) - b.astype(np.int64)
    with np.errstate(over="ignore"):
        s = int(np.multiply(d, d).sum(dtype=np.int64))
    return s


def batch_l2_sq_raw(mat: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Squared L2 from every row of `mat` (int32/int64 raws) to `q`.

    Returns int64 distances; bit-identical to per-row l2_sq_wide_raw.
    """
    d = mat.astype(np.int64) - q.astype(np.int64)
    with np.errstate(over="ignore"):
        return np.einsum("ij,ij->i", d, d)

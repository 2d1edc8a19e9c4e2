"""Counter-based randomization, reproducible independent of pixel order.

The per-pixel uniform draw used by the randomized non-conformity scores is a
pure function of ``(seed, row, col)``: a SplitMix64-style integer hash of the
pixel counter, keyed by the seed.  Evaluating pixels in any order (or in
parallel) therefore yields bit-identical fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4B7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = float(2.0**-53)


def _mix(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer: bijective avalanche mix on uint64."""
    with np.errstate(over="ignore"):  # wrap-around is the point
        x = (x + _GAMMA) & _MASK
        x ^= x >> np.uint64(30)
        x = (x * _M1) & _MASK
        x ^= x >> np.uint64(27)
        x = (x * _M2) & _MASK
        x ^= x >> np.uint64(31)
    return x


def _as_u64(seed: int) -> np.uint64:
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def uniform_at(seed: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Uniform draws in ``[0, 1)`` for pixel coordinates, vectorized.

    The draw depends only on ``(seed, row, col)``, never on grid shape.
    """
    rows = np.asarray(rows, dtype=np.uint64)
    cols = np.asarray(cols, dtype=np.uint64)
    counter = ((rows << np.uint64(32)) | cols) & _MASK
    key = _mix(_as_u64(seed))
    with np.errstate(over="ignore"):  # wrap-around is the point
        bits = _mix((key ^ counter * _GAMMA) & _MASK)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV_2_53


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed, e.g. one per experiment trial."""
    return int(_mix(_as_u64(seed) ^ _mix(_as_u64(index))))


@dataclass(frozen=True)
class RandomizationField:
    """One uniform draw per pixel, shared across all labels of that pixel."""

    seed: int
    height: int
    width: int

    @cached_property
    def values(self) -> np.ndarray:
        """Dense (H, W) field of draws in ``[0, 1)``."""
        rows, cols = np.indices((self.height, self.width))
        out = uniform_at(self.seed, rows, cols)
        out.flags.writeable = False
        return out

    def u(self, row: int, col: int) -> float:
        return float(uniform_at(self.seed, np.uint64(row), np.uint64(col)))

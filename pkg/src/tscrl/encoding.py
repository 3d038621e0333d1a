"""Binary encoding of scalar queue lengths.

A queue length is spread over a 4x12 bit matrix by greedy subtraction of
per-cell weights, scanning column by column (rows within a column).  The
default weights sum to 304, so a matrix saturates to all ones at 304
stationary vehicles; because the weight sequence is non-increasing along
the scan and "complete" (each weight is at most 1 + the sum of all later
weights), the greedy fill decodes exactly for every count up to 304, and
because consecutive weight values never drop by more than 1, the number
of set bits is non-decreasing in the encoded count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ROWS = 4
COLS = 12
CAPACITY = 304

# Per-column weights, identical down each column. Column sums times four
# rows total 304. This is the only column-constant layout of that total
# whose distinct values step down by one, which the bit-count
# monotonicity invariant requires.
DEFAULT_COLUMN_WEIGHTS = (11, 10, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1)


@dataclass(frozen=True)
class EncodingWeights:
    """4x12 positive integer weight matrix for the greedy encoder."""

    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.cells) != ROWS or any(len(r) != COLS for r in self.cells):
            raise ValueError(f"weights must be {ROWS}x{COLS}")
        seq = self.scan_sequence()
        if any(w <= 0 or w != int(w) for w in seq):
            raise ValueError("weights must be positive integers")
        if sum(seq) != CAPACITY:
            raise ValueError(f"weights must sum to {CAPACITY}, got {sum(seq)}")
        for i in range(len(seq) - 1):
            if seq[i] < seq[i + 1]:
                raise ValueError("weights must be non-increasing in scan order")
        # Completeness makes greedy subtraction exact for all counts.
        tail = 0
        for w in reversed(seq):
            if w > 1 + tail:
                raise ValueError(
                    f"weight {w} exceeds 1 + sum of later weights ({tail}); "
                    "greedy decode would not be exact"
                )
            tail += w
        # A value gap above 1 breaks bit-count monotonicity: the count just
        # below the larger weight needs several bits, the weight itself one.
        values = sorted(set(seq), reverse=True)
        for hi, lo in zip(values, values[1:]):
            if hi - lo > 1:
                raise ValueError(
                    f"weight values {hi} and {lo} differ by more than 1; "
                    "bit count would not be monotone in the encoded count"
                )
        return None

    def scan_sequence(self) -> list[int]:
        """Cell weights in scan order: for each column, rows top to bottom."""
        return [self.cells[i][j] for j in range(COLS) for i in range(ROWS)]

    def as_array(self) -> np.ndarray:
        return np.array(self.cells, dtype=np.int64)

    @classmethod
    def from_columns(cls, columns: Iterable[int]) -> "EncodingWeights":
        cols = tuple(int(c) for c in columns)
        if len(cols) != COLS:
            raise ValueError(f"expected {COLS} column weights, got {len(cols)}")
        return cls(tuple(cols for _ in range(ROWS)))

    @classmethod
    def default(cls) -> "EncodingWeights":
        return cls.from_columns(DEFAULT_COLUMN_WEIGHTS)


def encode_queue(ql: int, weights: EncodingWeights | None = None) -> np.ndarray:
    """Encode a queue length into a 4x12 binary matrix.

    Greedy fill: scan columns, then rows; whenever the remaining count is
    at least the cell weight, subtract it and set the bit. Counts above
    304 saturate to the all-ones matrix.
    """
    if ql < 0:
        raise ValueError("queue length must be non-negative")
    w = weights if weights is not None else EncodingWeights.default()
    bits = np.zeros((ROWS, COLS), dtype=np.uint8)
    remaining = int(ql)
    for j in range(COLS):
        for i in range(ROWS):
            c = w.cells[i][j]
            if remaining >= c:
                remaining -= c
                bits[i, j] = 1
    return bits


def decode(matrix: np.ndarray, weights: EncodingWeights | None = None) -> int:
    """Weighted sum of the set bits; exact inverse of encode_queue up to 304."""
    w = weights if weights is not None else EncodingWeights.default()
    m = np.asarray(matrix)
    if m.shape != (ROWS, COLS):
        raise ValueError(f"matrix must be {ROWS}x{COLS}, got {m.shape}")
    return int((m.astype(np.int64) * w.as_array()).sum())


def flatten_state(matrix: np.ndarray) -> np.ndarray:
    """Flatten one 4x12 matrix in scan order into a 48-entry bit vector."""
    m = np.asarray(matrix, dtype=np.uint8)
    if m.shape != (ROWS, COLS):
        raise ValueError(f"matrix must be {ROWS}x{COLS}, got {m.shape}")
    return m.flatten(order="F")


def compose_turn_state(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate the four approach matrices (N, W, E, S) into 192 bits."""
    if len(matrices) != 4:
        raise ValueError(f"expected 4 matrices, got {len(matrices)}")
    return np.concatenate([flatten_state(m) for m in matrices])

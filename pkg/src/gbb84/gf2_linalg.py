"""Bitstrings and dense matrices over GF(2).

Bit index 0 is the leftmost character of the ASCII form. When a bitstring is
read as an integer, index 0 is the most significant bit, which matches the
kron ordering used for qubit registers in :mod:`gbb84.quantum_oracle`.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def _as_bits(values, ndim: int) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array of bits, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit entries must be 0 or 1")
    out = arr.astype(np.uint8, copy=True)
    out.setflags(write=False)
    return out


class BitString:
    """Immutable row vector over GF(2)."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int] | np.ndarray | str = ()):
        if isinstance(bits, str):
            bits = [_char_bit(ch) for ch in bits]
        elif not isinstance(bits, np.ndarray):
            bits = list(bits)
        self._bits = _as_bits(np.asarray(bits, dtype=np.int64).reshape(-1), 1)

    @classmethod
    def zeros(cls, length: int) -> BitString:
        return cls(np.zeros(length, dtype=np.uint8))

    @classmethod
    def from_int(cls, value: int, length: int) -> BitString:
        if value < 0 or value >> length:
            raise ValueError(f"{value} does not fit in {length} bits")
        return cls([(value >> (length - 1 - idx)) & 1 for idx in range(length)])

    @classmethod
    def from_str(cls, text: str) -> BitString:
        return cls(text)

    @property
    def bits(self) -> np.ndarray:
        """Read-only uint8 view of the entries."""
        return self._bits

    def __len__(self) -> int:
        return int(self._bits.shape[0])

    def __iter__(self):
        return (int(v) for v in self._bits)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return int(self._bits[idx])
        return BitString(self._bits[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash((len(self), self._bits.tobytes()))

    def __str__(self) -> str:
        return "".join("1" if v else "0" for v in self._bits)

    def __repr__(self) -> str:
        return f"BitString('{self}')"

    def _check_len(self, other: BitString) -> None:
        if len(self) != len(other):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")

    def __xor__(self, other: BitString) -> BitString:
        self._check_len(other)
        return BitString(self._bits ^ other._bits)

    def __and__(self, other: BitString) -> BitString:
        self._check_len(other)
        return BitString(self._bits & other._bits)

    def __invert__(self) -> BitString:
        return BitString(1 - self._bits)

    def __add__(self, other: BitString) -> BitString:
        """Concatenation."""
        return BitString(np.concatenate([self._bits, other._bits]))

    @property
    def weight(self) -> int:
        return int(self._bits.sum())

    def dot(self, other: BitString) -> int:
        self._check_len(other)
        return int(np.bitwise_and(self._bits, other._bits).sum() & 1)

    def to_int(self) -> int:
        value = 0
        for v in self._bits:
            value = (value << 1) | int(v)
        return value

    def select(self, mask: BitString) -> BitString:
        """Substring at the positions where ``mask`` is 1, in index order."""
        self._check_len(mask)
        return BitString(self._bits[mask._bits.astype(bool)])

    def support(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self._bits)]


def _char_bit(ch: str) -> int:
    if ch == "0":
        return 0
    if ch == "1":
        return 1
    raise ValueError(f"invalid bit character {ch!r}")


def weight(s: BitString) -> int:
    return s.weight


def hamming_distance(a: BitString, b: BitString) -> int:
    return (a ^ b).weight


def merge_bits(mask: BitString, ones_part: BitString, zeros_part: BitString) -> BitString:
    """Inverse of ``select``: place ``ones_part`` where mask is 1 and ``zeros_part`` elsewhere."""
    sel = mask.bits.astype(bool)
    if len(ones_part) != int(sel.sum()) or len(zeros_part) != len(mask) - int(sel.sum()):
        raise ValueError("part lengths do not match the mask")
    out = np.zeros(len(mask), dtype=np.uint8)
    out[sel] = ones_part.bits
    out[~sel] = zeros_part.bits
    return BitString(out)


class BitMatrix:
    """Immutable dense matrix over GF(2)."""

    __slots__ = ("_entries",)

    def __init__(self, rows: Sequence[Sequence[int]] | np.ndarray | str, cols: int | None = None):
        if isinstance(rows, str):
            rows = [[_char_bit(ch) for ch in row] for row in rows.split(";")] if rows else []
        arr = np.asarray(rows, dtype=np.int64)
        if arr.size == 0 and not (arr.ndim == 2 and cols is None):
            arr = arr.reshape(arr.shape[0] if arr.ndim == 2 else 0, cols or 0)
        self._entries = _as_bits(arr, 2)
        if cols is not None and self._entries.shape[1] != cols:
            raise ValueError(f"expected {cols} columns, got {self._entries.shape[1]}")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BitMatrix:
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, size: int) -> BitMatrix:
        return cls(np.eye(size, dtype=np.uint8))

    @classmethod
    def from_str(cls, text: str, cols: int | None = None) -> BitMatrix:
        return cls(text, cols=cols)

    @classmethod
    def from_rows(cls, rows: Sequence[BitString], cols: int) -> BitMatrix:
        if not rows:
            return cls.zeros(0, cols)
        return cls(np.stack([r.bits for r in rows]), cols=cols)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def rows(self) -> int:
        return int(self._entries.shape[0])

    @property
    def cols(self) -> int:
        return int(self._entries.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def row(self, idx: int) -> BitString:
        return BitString(self._entries[idx])

    def row_list(self) -> list[BitString]:
        return [self.row(i) for i in range(self.rows)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._entries, other._entries)

    def __hash__(self) -> int:
        return hash((self.shape, self._entries.tobytes()))

    def __str__(self) -> str:
        return ";".join("".join("1" if v else "0" for v in row) for row in self._entries)

    def __repr__(self) -> str:
        return f"BitMatrix('{self}', cols={self.cols})"

    @property
    def T(self) -> BitMatrix:
        return BitMatrix(self._entries.T)

    def vstack(self, other: BitMatrix) -> BitMatrix:
        if self.cols != other.cols:
            raise ValueError("column count mismatch")
        return BitMatrix(np.vstack([self._entries, other._entries]))

    def matmul(self, other: BitMatrix) -> BitMatrix:
        if self.cols != other.rows:
            raise ValueError("dimension mismatch")
        prod = self._entries.astype(np.int64) @ other._entries.astype(np.int64)
        return BitMatrix(prod & 1)

    def row_ints(self) -> np.ndarray:
        """Each row packed into an integer, index 0 as the most significant bit."""
        return pack_rows(self._entries)


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into int64 words (at most 63 bits)."""
    bits = np.asarray(bits)
    width = bits.shape[-1]
    if width > 63:
        raise ValueError("packing supports at most 63 bits")
    weights = (1 << np.arange(width - 1, -1, -1, dtype=np.int64)).astype(np.int64)
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def unpack_ints(values: np.ndarray, width: int) -> np.ndarray:
    """Inverse of :func:`pack_rows`."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def mat_vec(M: BitMatrix, x: BitString) -> BitString:
    """Return x·M^T over GF(2)."""
    if len(x) != M.cols:
        raise ValueError(f"dimension mismatch: vector length {len(x)}, matrix has {M.cols} columns")
    prod = M.entries.astype(np.int64) @ x.bits.astype(np.int64)
    return BitString(prod & 1)


def row_echelon(entries: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (matrix, pivot columns)."""
    work = np.array(entries, dtype=np.uint8, copy=True)
    rows, cols = work.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(work[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            work[[r, p]] = work[[p, r]]
        hits = np.flatnonzero(work[:, c])
        hits = hits[hits != r]
        if hits.size:
            work[hits] ^= work[r]
        pivots.append(c)
        r += 1
    return work, pivots


def rank(M: BitMatrix) -> int:
    if M.rows == 0 or M.cols == 0:
        return 0
    return len(row_echelon(M.entries)[1])


def nullspace(M: BitMatrix) -> BitMatrix:
    """Basis (as rows) of {x : x·M^T = 0}."""
    cols = M.cols
    if M.rows == 0:
        return BitMatrix.identity(cols)
    rref, pivots = row_echelon(M.entries)
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row_idx, pc in enumerate(pivots):
            basis[i, pc] = rref[row_idx, f]
    return BitMatrix(basis.reshape(len(free), cols))


def solve(M: BitMatrix, target: BitString) -> BitString | None:
    """Some x with x·M^T = target, or None when no solution exists."""
    if len(target) != M.rows:
        raise ValueError("target length must equal the row count")
    aug = np.hstack([M.entries, target.bits.reshape(-1, 1)])
    rref, pivots = row_echelon(aug)
    if M.cols in pivots:
        return None
    x = np.zeros(M.cols, dtype=np.uint8)
    for row_idx, pc in enumerate(pivots):
        x[pc] = rref[row_idx, M.cols]
    return BitString(x)


def extend_to_basis(rows: BitMatrix) -> BitMatrix:
    """Append unit vectors so the rows become a basis of F2^cols (input rows must be independent)."""
    if rank(rows) != rows.rows:
        raise ValueError("input rows are linearly dependent")
    current = rows
    for c in range(rows.cols):
        if current.rows == rows.cols:
            break
        unit = np.zeros((1, rows.cols), dtype=np.uint8)
        unit[0, c] = 1
        candidate = current.vstack(BitMatrix(unit))
        if rank(candidate) == candidate.rows:
            current = candidate
    return current


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2, size=shape, dtype=np.uint8)


def random_stacked_full_rank(r: int, m: int, n: int, rng: np.random.Generator) -> tuple[BitMatrix, BitMatrix]:
    """Draw (P_C, P_K) uniformly among pairs whose stacked (r+m)×n matrix has full row rank.

    Rejection sampling over uniform bit matrices keeps the accepted draw exactly
    uniform over the valid set.
    """
    if min(r, m, n) < 0:
        raise ValueError("dimensions must be non-negative")
    if r + m > n:
        raise ValueError(f"r + m = {r + m} exceeds n = {n}")
    while True:
        draw = random_bits(rng, (r + m, n))
        if r + m == 0 or len(row_echelon(draw)[1]) == r + m:
            return BitMatrix(draw[:r].reshape(r, n)), BitMatrix(draw[r:].reshape(m, n))


def all_bitstrings(length: int) -> np.ndarray:
    """All 2^length words as rows of a uint8 array, in increasing integer order."""
    return unpack_ints(np.arange(1 << length, dtype=np.int64), length)

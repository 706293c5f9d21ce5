"""Dense bit-packed linear algebra over GF(2).

Rows are stored as little-endian ``uint64`` words, least significant bit
first, so bit ``j`` of a row lives in word ``j // 64`` at position ``j % 64``.
Pad bits past ``cols`` are always zero.  Values are immutable once built.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WORD = 64
MAGIC = b"GF2M"
VERSION = 1
_HEADER = struct.Struct("<4sBII")


class NotInvertible(ArithmeticError):
    """Raised by :func:`invert` when the matrix is singular."""


class FormatError(ValueError):
    """Malformed serialized data; ``offset`` points at the offending byte."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


def _nwords(cols: int) -> int:
    return (cols + WORD - 1) // WORD


def _tail_mask(cols: int) -> np.uint64:
    rem = cols % WORD
    if rem == 0:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << rem) - 1)


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array into (rows, nwords) uint64, LSB-first."""
    rows, cols = bits.shape
    nbytes = _nwords(cols) * 8
    packed = np.packbits(bits.astype(np.uint8, copy=False), axis=1, bitorder="little")
    if packed.shape[1] < nbytes:
        packed = np.pad(packed, ((0, 0), (0, nbytes - packed.shape[1])))
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def _unpack(words: np.ndarray, cols: int) -> np.ndarray:
    raw = np.ascontiguousarray(words.astype("<u8", copy=False)).view(np.uint8)
    return np.unpackbits(raw, axis=1, count=cols, bitorder="little")


def _frozen(words: np.ndarray) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=np.uint64)
    words.flags.writeable = False
    return words


@dataclass(frozen=True, eq=False)
class BitMatrix:
    rows: int
    cols: int
    words: np.ndarray

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"matrix dims must be positive, got {self.rows}x{self.cols}")
        if self.words.shape != (self.rows, _nwords(self.cols)):
            raise ValueError("payload shape does not match dims")
        object.__setattr__(self, "words", _frozen(self.words))

    # construction

    @classmethod
    def from_bits(cls, bits) -> "BitMatrix":
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array of bits")
        return cls(arr.shape[0], arr.shape[1], _pack(arr & 1))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, np.zeros((rows, _nwords(cols)), dtype=np.uint64))

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls.from_bits(np.eye(n, dtype=np.uint8))

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "BitMatrix":
        words = rng.integers(0, 2**64, size=(rows, _nwords(cols)), dtype=np.uint64)
        words[:, -1] &= _tail_mask(cols)
        return cls(rows, cols, words)

    # access

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def to_bits(self) -> np.ndarray:
        return _unpack(self.words, self.cols)

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return int((self.words[i, j // WORD] >> np.uint64(j % WORD)) & np.uint64(1))

    def row(self, i: int) -> "BitVector":
        return BitVector(self.cols, self.words[i].copy())

    def take_rows(self, indices: Sequence[int]) -> "BitMatrix":
        idx = np.asarray(indices, dtype=np.intp)
        return BitMatrix(len(idx), self.cols, self.words[idx])

    def transpose(self) -> "BitMatrix":
        return BitMatrix.from_bits(self.to_bits().T)

    @property
    def T(self) -> "BitMatrix":
        return self.transpose()

    def is_zero(self) -> bool:
        return not self.words.any()

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __add__(self, other: "BitMatrix") -> "BitMatrix":
        return add(self, other)

    def __matmul__(self, other):
        if isinstance(other, BitVector):
            return mul_vec(self, other)
        return mul(self, other)

    def __repr__(self):
        return f"BitMatrix({self.rows}x{self.cols})"

    # serialization

    def to_bytes(self) -> bytes:
        nbytes = (self.cols + 7) // 8
        raw = np.ascontiguousarray(self.words.astype("<u8")).view(np.uint8)[:, :nbytes]
        return _HEADER.pack(MAGIC, VERSION, self.rows, self.cols) + raw.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["BitMatrix", int]:
        """Parse one matrix starting at ``offset``; returns it and the next offset."""
        if len(data) - offset < _HEADER.size:
            raise FormatError("truncated matrix header", offset)
        magic, version, rows, cols = _HEADER.unpack_from(data, offset)
        if magic != MAGIC:
            raise FormatError(f"bad matrix magic {magic!r}", offset)
        if version != VERSION:
            raise FormatError(f"unsupported matrix version {version}", offset + 4)
        if rows < 1 or cols < 1:
            raise FormatError(f"invalid matrix dims {rows}x{cols}", offset + 5)
        start = offset + _HEADER.size
        nbytes = (cols + 7) // 8
        end = start + rows * nbytes
        if len(data) < end:
            raise FormatError("truncated matrix payload", len(data))
        raw = np.frombuffer(data, dtype=np.uint8, count=rows * nbytes, offset=start)
        raw = raw.reshape(rows, nbytes)
        if cols % 8 and np.any(raw[:, -1] >> (cols % 8)):
            raise FormatError("nonzero pad bits", start)
        padded = np.zeros((rows, _nwords(cols) * 8), dtype=np.uint8)
        padded[:, :nbytes] = raw
        return cls(rows, cols, padded.view("<u8").astype(np.uint64)), end


@dataclass(frozen=True, eq=False)
class BitVector:
    length: int
    words: np.ndarray

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative length")
        if self.words.shape != (_nwords(self.length),):
            raise ValueError("payload shape does not match length")
        object.__setattr__(self, "words", _frozen(self.words))

    @classmethod
    def from_bits(cls, bits) -> "BitVector":
        arr = np.asarray(bits, dtype=np.uint8).reshape(-1) & 1
        if arr.size == 0:
            return cls(0, np.zeros(0, dtype=np.uint64))
        return cls(arr.size, _pack(arr[None, :])[0])

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length, np.zeros(_nwords(length), dtype=np.uint64))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "BitVector":
        words = rng.integers(0, 2**64, size=_nwords(length), dtype=np.uint64)
        if length:
            words[-1] &= _tail_mask(length)
        return cls(length, words)

    def to_bits(self) -> np.ndarray:
        if self.length == 0:
            return np.zeros(0, dtype=np.uint8)
        return _unpack(self.words[None, :], self.length)[0]

    def weight(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __len__(self):
        return self.length

    def __getitem__(self, i):
        if isinstance(i, slice):
            return BitVector.from_bits(self.to_bits()[i])
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(i)
        return int((self.words[i // WORD] >> np.uint64(i % WORD)) & np.uint64(1))

    def __add__(self, other: "BitVector") -> "BitVector":
        if self.length != other.length:
            raise ValueError(f"length mismatch: {self.length} vs {other.length}")
        return BitVector(self.length, self.words ^ other.words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.length, self.words.tobytes()))

    def concat(self, other: "BitVector") -> "BitVector":
        return BitVector.from_bits(np.concatenate([self.to_bits(), other.to_bits()]))

    def __repr__(self):
        bits = "".join(map(str, self.to_bits()[:32]))
        more = "..." if self.length > 32 else ""
        return f"BitVector({self.length}, {bits}{more})"


class OpCounter:
    """Accumulates bit-level multiply-accumulate operations."""

    def __init__(self):
        self.macs = 0

    def __repr__(self):
        return f"OpCounter(macs={self.macs})"


def _check_same_shape(a: BitMatrix, b: BitMatrix):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def add(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    _check_same_shape(a, b)
    return BitMatrix(a.rows, a.cols, a.words ^ b.words)


def mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """GF(2) product ``a @ b``.

    Computed as an integer product of the unpacked operands followed by a
    parity reduction; float32 accumulation is exact while the inner
    dimension stays below 2**24.
    """
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    if a.cols >= 1 << 24:
        raise ValueError("inner dimension too large for exact accumulation")
    prod = a.to_bits().astype(np.float32) @ b.to_bits().astype(np.float32)
    return BitMatrix.from_bits(prod.astype(np.int64) & 1)


def mul_vec(a: BitMatrix, v: BitVector, counter: OpCounter | None = None) -> BitVector:
    """Matrix-vector product; ``counter`` (if given) is charged rows*cols MACs."""
    if a.cols != v.length:
        raise ValueError(f"dimension mismatch: {a.shape} @ vector[{v.length}]")
    if counter is not None:
        counter.macs += a.rows * a.cols
    ones = np.bitwise_count(a.words & v.words[None, :]).sum(axis=1)
    return BitVector.from_bits((ones & 1).astype(np.uint8))


def hstack(blocks: Iterable[BitMatrix]) -> BitMatrix:
    return BitMatrix.from_bits(np.hstack([b.to_bits() for b in blocks]))


def vstack(blocks: Iterable[BitMatrix]) -> BitMatrix:
    blocks = list(blocks)
    cols = {b.cols for b in blocks}
    if len(cols) != 1:
        raise ValueError("column mismatch in vstack")
    return BitMatrix(sum(b.rows for b in blocks), blocks[0].cols,
                     np.vstack([b.words for b in blocks]))


def block(grid: Sequence[Sequence[BitMatrix]]) -> BitMatrix:
    return vstack(hstack(row) for row in grid)


def _reduce(words: np.ndarray, cols: int, *companions: np.ndarray) -> list[int]:
    """In-place Gauss-Jordan elimination; returns pivot columns.

    Row operations are mirrored on each companion array (same row count).
    """
    rows = words.shape[0]
    r = 0
    pivots = []
    one = np.uint64(1)
    for c in range(cols):
        if r == rows:
            break
        w, b = divmod(c, WORD)
        sh = np.uint64(b)
        col = (words[r:, w] >> sh) & one
        nz = np.flatnonzero(col)
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            words[[r, p]] = words[[p, r]]
            for comp in companions:
                comp[[r, p]] = comp[[p, r]]
        hit = ((words[:, w] >> sh) & one).astype(bool)
        hit[r] = False
        if hit.any():
            words[hit] ^= words[r]
            for comp in companions:
                comp[hit] ^= comp[r]
        pivots.append(c)
        r += 1
    return pivots


def rank(a: BitMatrix) -> int:
    return len(_reduce(a.words.copy(), a.cols))


def rref(a: BitMatrix) -> tuple[BitMatrix, list[int]]:
    """Reduced row echelon form and its pivot columns."""
    work = a.words.copy()
    pivots = _reduce(work, a.cols)
    return BitMatrix(a.rows, a.cols, work), pivots


def invert(a: BitMatrix) -> BitMatrix:
    if a.rows != a.cols:
        raise ValueError(f"cannot invert non-square {a.shape} matrix")
    work = a.words.copy()
    inv = BitMatrix.identity(a.rows).words.copy()
    pivots = _reduce(work, a.cols, inv)
    if len(pivots) < a.rows:
        raise NotInvertible(f"matrix has rank {len(pivots)} < {a.rows}")
    return BitMatrix(a.rows, a.cols, inv)


def solve(a: BitMatrix, b: BitVector) -> tuple[BitVector, list[BitVector]] | None:
    """All solutions of ``a x = b``: a particular solution plus a kernel basis.

    Returns ``None`` when the system is inconsistent.
    """
    if b.length != a.rows:
        raise ValueError("right-hand side length mismatch")
    aug = np.hstack([a.to_bits(), b.to_bits()[:, None]])
    red, pivots = rref(BitMatrix.from_bits(aug))
    if a.cols in pivots:
        return None
    bits = red.to_bits()
    x = np.zeros(a.cols, dtype=np.uint8)
    for r, c in enumerate(pivots):
        x[c] = bits[r, a.cols]
    free = [c for c in range(a.cols) if c not in set(pivots)]
    kernel = []
    for f in free:
        k = np.zeros(a.cols, dtype=np.uint8)
        k[f] = 1
        for r, c in enumerate(pivots):
            k[c] = bits[r, f]
        kernel.append(BitVector.from_bits(k))
    return BitVector.from_bits(x), kernel


def random_full_rank(rows: int, cols: int, rng: np.random.Generator) -> BitMatrix:
    """Uniform sample from the full-rank rows x cols matrices (rejection).

    Full rank means rank == min(rows, cols): column-wise for tall matrices,
    row-wise for wide ones.
    """
    target = min(rows, cols)
    while True:
        m = BitMatrix.random(rows, cols, rng)
        if rank(m) == target:
            return m


def remove_columns(a: BitMatrix, indices: Iterable[int]) -> BitMatrix:
    idx = sorted(indices)
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate column index")
    if idx and (idx[0] < 0 or idx[-1] >= a.cols):
        raise ValueError(f"column index out of range for {a.cols} columns")
    if len(idx) >= a.cols:
        raise ValueError("cannot remove every column")
    if not idx:
        return a
    return BitMatrix.from_bits(np.delete(a.to_bits(), idx, axis=1))


def insert_zeros(v: BitVector, positions: Iterable[int]) -> BitVector:
    """Inverse of dropping ``positions``: the output has zeros there."""
    pos = sorted(positions)
    total = v.length + len(pos)
    out = np.zeros(total, dtype=np.uint8)
    keep = np.ones(total, dtype=bool)
    keep[pos] = False
    out[keep] = v.to_bits()
    return BitVector.from_bits(out)

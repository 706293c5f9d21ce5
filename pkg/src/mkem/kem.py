"""Key generation, encapsulation and recovery.

Alice publishes ``P = B G`` where ``G`` stacks a column-permuted
concatenation of length-3 repetition codes (``G1``, n x d) on top of ``m``
random rows (``G2``).  ``B`` is chosen so that ``A B = diag(I_n, E)`` for her
private ``A = [[I_n, S], [R, Q]]``.  Bob drops ``p`` random columns of ``P``,
encodes a random short vector, adds an error sequence with memory in the
first ``n`` positions and sends the result.  Alice multiplies by ``A``, keeps
the first ``n`` bits and majority-decodes each 3-bit block.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import gf2
from .gf2 import BitMatrix, BitVector, FormatError, NotInvertible, OpCounter
from .markov import ErrorModel, sample_error

MAX_KEYGEN_ATTEMPTS = 64


class ParamError(ValueError):
    """Parameters or key material inconsistent with a parameter set."""


class KeygenError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParamSet:
    d: int
    p: int
    m: int
    mu: float = 0.055

    def __post_init__(self):
        if not (isinstance(self.d, int) and isinstance(self.p, int) and isinstance(self.m, int)):
            raise ParamError("d, p, m must be integers")
        if not self.d > self.p >= 0:
            raise ParamError(f"need d > p >= 0, got d={self.d}, p={self.p}")
        if self.m < 1:
            raise ParamError(f"need m >= 1, got m={self.m}")
        if self.d - self.p - self.m <= 0:
            raise ParamError(f"need d - p - m > 0, got {self.d - self.p - self.m}")
        if not 0.0 < self.mu < 1.0:
            raise ParamError(f"need 0 < mu < 1, got {self.mu}")

    @property
    def n(self) -> int:
        return 3 * self.d

    @property
    def model(self) -> ErrorModel:
        return ErrorModel(self.mu)

    def with_mu(self, mu: float) -> "ParamSet":
        return ParamSet(self.d, self.p, self.m, mu)


# the four published operating points
PRESETS = {
    "sec258": ParamSet(205, 80, 10),
    "sec388": ParamSet(300, 118, 10),
    "sec524": ParamSet(400, 155, 10),
    "sec1000": ParamSet(750, 302, 10),
}


@dataclass(frozen=True)
class PublicKey:
    params: ParamSet
    P: BitMatrix

    def __post_init__(self):
        want = (self.params.n + self.params.m, self.params.d)
        if self.P.shape != want:
            raise ParamError(f"public key must be {want[0]}x{want[1]}, got {self.P.rows}x{self.P.cols}")


@dataclass(frozen=True)
class PrivateKey:
    params: ParamSet
    S: BitMatrix
    R: BitMatrix
    Q: BitMatrix
    sigma: np.ndarray

    def __post_init__(self):
        n, m, d = self.params.n, self.params.m, self.params.d
        if self.S.shape != (n, m) or self.R.shape != (m, n) or self.Q.shape != (m, m):
            raise ParamError("private key blocks do not match parameters")
        sigma = np.asarray(self.sigma, dtype=np.int64)
        if sigma.shape != (d,) or not np.array_equal(np.sort(sigma), np.arange(d)):
            raise ParamError("sigma is not a permutation of range(d)")
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)

    @property
    def A(self) -> BitMatrix:
        n = self.params.n
        return gf2.block([[BitMatrix.identity(n), self.S], [self.R, self.Q]])


@dataclass(frozen=True)
class Ciphertext:
    params: ParamSet
    c: BitVector

    def __post_init__(self):
        if self.c.length != self.params.n + self.params.m:
            raise ParamError(f"ciphertext must have {self.params.n + self.params.m} bits")


@dataclass(frozen=True)
class SharedKey:
    bits: BitVector

    def to_bytes(self) -> bytes:
        """Packed bits, most significant bit first in each byte."""
        return np.packbits(self.bits.to_bits(), bitorder="big").tobytes()

    def hex(self) -> str:
        return self.to_bytes().hex()

    def __len__(self):
        return self.bits.length


class Encapsulation(NamedTuple):
    ciphertext: Ciphertext
    shared_key: SharedKey
    discard: tuple[int, ...]


@dataclass(frozen=True)
class KeyMaterial:
    """Everything keygen builds, kept for inspection and tests."""

    params: ParamSet
    S: BitMatrix
    R: BitMatrix
    Q: BitMatrix
    C1: BitMatrix
    C2: BitMatrix
    D1: BitMatrix
    D2: BitMatrix
    E: BitMatrix
    G1: BitMatrix
    G2: BitMatrix
    sigma: np.ndarray
    P: BitMatrix
    attempts: int

    @property
    def A(self) -> BitMatrix:
        return gf2.block([[BitMatrix.identity(self.params.n), self.S], [self.R, self.Q]])

    @property
    def B(self) -> BitMatrix:
        return gf2.block([[self.C1, self.D1], [self.C2, self.D2]])

    @property
    def G(self) -> BitMatrix:
        return gf2.vstack([self.G1, self.G2])


def repetition_generator(sigma: np.ndarray) -> BitMatrix:
    """n x d matrix whose column j is all-ones on rows 3*sigma[j] .. 3*sigma[j]+2."""
    d = len(sigma)
    bits = np.zeros((3 * d, d), dtype=np.uint8)
    for j, blk in enumerate(sigma):
        bits[3 * blk:3 * blk + 3, j] = 1
    return BitMatrix.from_bits(bits)


def build_key_material(params: ParamSet, rng: np.random.Generator) -> KeyMaterial:
    n, m, d = params.n, params.m, params.d
    sigma = rng.permutation(d)
    G1 = repetition_generator(sigma)
    G2 = BitMatrix.random(m, d, rng)
    I_n, I_m = BitMatrix.identity(n), BitMatrix.identity(m)

    for attempt in range(1, MAX_KEYGEN_ATTEMPTS + 1):
        R = BitMatrix.random(m, n, rng)
        Q = gf2.random_full_rank(m, m, rng)
        D1 = BitMatrix.random(n, m, rng)
        D2 = gf2.random_full_rank(m, m, rng)
        S = D1 @ gf2.invert(D2)
        W = gf2.invert(Q) @ R
        # (I_n + S W)^-1 = I_n + S (I_m + W S)^-1 W; singular exactly when the m x m core is
        try:
            core = gf2.invert(I_m + W @ S)
        except NotInvertible:
            continue
        C1 = I_n + S @ (core @ W)
        C2 = W @ C1
        break
    else:
        raise KeygenError(f"no invertible C1 after {MAX_KEYGEN_ATTEMPTS} attempts")

    # A B must be diag(I_n, E)
    if C1 + S @ C2 != I_n or not (R @ C1 + Q @ C2).is_zero() or not (D1 + S @ D2).is_zero():
        raise KeygenError("A B lost its block-diagonal structure")
    E = R @ D1 + Q @ D2

    # C1 G1 through the low-rank form of C1; equal to the dense product
    C1G1 = G1 + S @ (core @ (W @ G1))
    P = gf2.vstack([C1G1 + D1 @ G2, W @ C1G1 + D2 @ G2])
    return KeyMaterial(params, S, R, Q, C1, C2, D1, D2, E, G1, G2, sigma, P, attempt)


def keygen(params: ParamSet, rng: np.random.Generator) -> tuple[PublicKey, PrivateKey]:
    km = build_key_material(params, rng)
    return PublicKey(params, km.P), PrivateKey(params, km.S, km.R, km.Q, km.sigma)


def encapsulate(pk: PublicKey, rng: np.random.Generator, *,
                counter: OpCounter | None = None,
                discard=None, data: BitVector | None = None,
                error: BitVector | None = None) -> Encapsulation:
    """Bob's side.  ``discard``, ``data`` and ``error`` override the random
    draws (used for planted test vectors); otherwise they are sampled in that
    order from ``rng``."""
    prm = pk.params
    if discard is None:
        discard = np.sort(rng.choice(prm.d, size=prm.p, replace=False))
    discard = tuple(sorted(int(i) for i in discard))
    if len(discard) != prm.p:
        raise ParamError(f"discard set must have {prm.p} entries")
    if data is None:
        data = BitVector.random(prm.d - prm.p, rng)
    if error is None:
        error = sample_error(prm.n, prm.model, rng)
    if data.length != prm.d - prm.p or error.length != prm.n:
        raise ParamError("planted data/error length mismatch")

    P_hat = gf2.remove_columns(pk.P, discard)
    e = error.concat(BitVector.zeros(prm.m))
    c = gf2.mul_vec(P_hat, data, counter) + e
    key = SharedKey(gf2.insert_zeros(data, discard))
    return Encapsulation(Ciphertext(prm, c), key, discard)


def decapsulate(sk: PrivateKey, ct: Ciphertext) -> SharedKey:
    prm = sk.params
    if ct.params != prm:
        raise ParamError(f"ciphertext params {ct.params} do not match key params {prm}")
    n = prm.n
    bits = ct.c.to_bits()
    head = BitVector.from_bits(bits[:n])
    tail = BitVector.from_bits(bits[n:])
    y = (head + gf2.mul_vec(sk.S, tail)).to_bits()
    votes = y.reshape(prm.d, 3).sum(axis=1) >= 2
    return SharedKey(BitVector.from_bits(votes[sk.sigma].astype(np.uint8)))


Kdf = Callable[[bytes], bytes]


def sha256_kdf(raw: bytes) -> bytes:
    return hashlib.sha256(raw).digest()


def derive_session_key(key: SharedKey, kdf: Kdf | None = None) -> bytes:
    raw = key.to_bytes()
    return raw if kdf is None else kdf(raw)


# -- serialization -------------------------------------------------------

MAGIC = b"MKEM"
VERSION = 1
KIND_PK, KIND_SK, KIND_CT = 1, 2, 3
_HEADER = struct.Struct("<4sBBIIId")


def _header(kind: int, prm: ParamSet) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, kind, prm.d, prm.p, prm.m, prm.mu)


def serialize(obj) -> bytes:
    if isinstance(obj, PublicKey):
        return _header(KIND_PK, obj.params) + obj.P.to_bytes()
    if isinstance(obj, PrivateKey):
        sigma = np.asarray(obj.sigma, dtype="<u4").tobytes()
        return (_header(KIND_SK, obj.params) + obj.S.to_bytes() + obj.R.to_bytes()
                + obj.Q.to_bytes() + sigma)
    if isinstance(obj, Ciphertext):
        row = BitMatrix(1, obj.c.length, obj.c.words[None, :])
        return _header(KIND_CT, obj.params) + row.to_bytes()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialized_size(kind: int, prm: ParamSet) -> int:
    def mat(r, c):
        return 13 + r * math.ceil(c / 8)
    n, m, d = prm.n, prm.m, prm.d
    body = {KIND_PK: mat(n + m, d),
            KIND_SK: mat(n, m) + mat(m, n) + mat(m, m) + 4 * d,
            KIND_CT: mat(1, n + m)}[kind]
    return _HEADER.size + body


def deserialize(data: bytes, expect: int | None = None):
    """Parse a key or ciphertext; ``expect`` restricts the accepted kind."""
    if len(data) < _HEADER.size:
        raise FormatError("truncated key header", len(data))
    magic, version, kind, d, p, m, mu = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if kind not in (KIND_PK, KIND_SK, KIND_CT):
        raise FormatError(f"unknown kind {kind}", 5)
    if expect is not None and kind != expect:
        raise FormatError(f"expected kind {expect}, found {kind}", 5)
    try:
        prm = ParamSet(d, p, m, mu)
    except ParamError as exc:
        raise FormatError(f"invalid parameters: {exc}", 6) from None
    off = _HEADER.size

    def take_matrix(shape):
        nonlocal off
        start = off
        mat, off = BitMatrix.from_bytes(data, off)
        if mat.shape != shape:
            raise FormatError(f"matrix is {mat.rows}x{mat.cols}, parameters require "
                              f"{shape[0]}x{shape[1]}", start)
        return mat

    n = prm.n
    if kind == KIND_PK:
        obj = PublicKey(prm, take_matrix((n + m, d)))
    elif kind == KIND_SK:
        S, R, Q = take_matrix((n, m)), take_matrix((m, n)), take_matrix((m, m))
        if len(data) < off + 4 * d:
            raise FormatError("truncated permutation", len(data))
        sigma = np.frombuffer(data, dtype="<u4", count=d, offset=off).astype(np.int64)
        off += 4 * d
        try:
            obj = PrivateKey(prm, S, R, Q, sigma)
        except ParamError as exc:
            raise FormatError(str(exc), off - 4 * d) from None
    else:
        row = take_matrix((1, n + m))
        obj = Ciphertext(prm, BitVector(n + m, row.words[0].copy()))
    if off != len(data):
        raise FormatError("trailing bytes", off)
    return obj

"""Error sequences with memory.

A three-state chain (states 00, 01, 10) emits a 1 from state 00 with
probability ``1 - mu`` and is then forced through two zeros, so every 1 is
followed by at least two 0s.  Equivalently the output is a concatenation of
the tokens ``0`` (probability mu) and ``100`` (probability 1 - mu), cut to
length.  With that spacing a length-3 repetition code aligned on multiples of
three sees at most one flipped bit per block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf2 import BitVector

# state transition adjacency: 00 -> {00, 01}, 01 -> 10, 10 -> 00
ADJACENCY = np.array([[1, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)


@dataclass(frozen=True)
class ErrorModel:
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")


def _as_mu(model) -> float:
    return model.mu if isinstance(model, ErrorModel) else float(model)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def stationary(model) -> tuple[float, float, float]:
    mu = _as_mu(model)
    den = 3 - 2 * mu
    return 1 / den, (1 - mu) / den, (1 - mu) / den


def entropy_per_bit(model) -> float:
    """Entropy rate of the chain in bits per emitted symbol."""
    mu = _as_mu(model)
    return binary_entropy(mu) / (3 - 2 * mu)


def entropy_per_bit_array(mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -mu * np.log2(mu) - (1 - mu) * np.log2(1 - mu)
    h = np.where((mu <= 0) | (mu >= 1), 0.0, h)
    return h / (3 - 2 * mu)


def max_entropy() -> float:
    """log2 of the spectral radius of the state adjacency matrix."""
    lam = max(np.linalg.eigvals(ADJACENCY).real)
    return math.log2(lam)


def prob_one(model) -> float:
    mu = _as_mu(model)
    return (1 - mu) / (3 - 2 * mu)


def expected_weight(n: int, model) -> float:
    return n * prob_one(model)


def sample_errors(count: int, n: int, model, rng: np.random.Generator,
                  chunk: int = 2048) -> np.ndarray:
    """``count`` independent length-``n`` error sequences as a uint8 array."""
    if n < 1:
        raise ValueError("n must be positive")
    mu = _as_mu(model)
    out = np.zeros((count, n), dtype=np.uint8)
    for lo in range(0, count, chunk):
        hi = min(count, lo + chunk)
        # n tokens always cover n bits since every token is at least 1 bit
        ones = rng.random((hi - lo, n)) >= mu
        lengths = 1 + 2 * ones.astype(np.int32)
        starts = np.cumsum(lengths, axis=1) - lengths
        r, c = np.nonzero(ones & (starts < n))
        out[lo + r, starts[r, c]] = 1
    return out


def sample_error(n: int, model, rng: np.random.Generator) -> BitVector:
    return BitVector.from_bits(sample_errors(1, n, model, rng)[0])


def _bits(f) -> np.ndarray:
    if isinstance(f, BitVector):
        return f.to_bits()
    if isinstance(f, str):
        return np.frombuffer(f.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(f, dtype=np.uint8).reshape(-1)


def is_valid_error(f) -> bool:
    """True iff every 1 is followed by two 0s (truncated at the end is fine)."""
    ones = np.flatnonzero(_bits(f))
    return bool(np.all(np.diff(ones) >= 3))


def blocks_correctable(f) -> bool:
    """At most one 1 in every aligned window [3k, 3k+2]."""
    bits = _bits(f)
    full = len(bits) - len(bits) % 3
    if full and bits[:full].reshape(-1, 3).sum(axis=1).max() > 1:
        return False
    return int(bits[full:].sum()) <= 1


def valid_sequence_count(n: int) -> int:
    """Number of length-n binary strings accepted by :func:`is_valid_error`."""
    # a[k]: strings of length k; a 1 must be followed by "00" unless truncated
    a = [1, 2, 3]
    for k in range(3, n + 1):
        a.append(a[k - 1] + a[k - 3])
    return a[n]


def fixed_weight_error(n: int, weight: int, rng: np.random.Generator) -> BitVector:
    """Uniform draw among valid sequences of length n with exactly ``weight`` ones."""
    slots = n - 2 * (weight - 1) if weight else n
    if weight and slots < weight:
        raise ValueError(f"no valid length-{n} sequence has weight {weight}")
    out = np.zeros(n, dtype=np.uint8)
    if weight:
        picks = np.sort(rng.choice(slots, size=weight, replace=False))
        out[picks + 2 * np.arange(weight)] = 1
    return BitVector.from_bits(out)

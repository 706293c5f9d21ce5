"""Toy-scale attacker and exhaustive mask experiments.

The attacker is plain information-set decoding: guess which columns Bob
discarded, pick rows hoping none carries an error, solve, then verify the
candidate in two stages.  The cheap stage checks that the residual
``c + P_hat x`` looks like an error sequence (spacing rule, zero tail); the
full stage compares the candidate's session-key fingerprint against one the
attacker observed (as on the exchange wire).
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from . import gf2
from .gf2 import BitMatrix, BitVector
from .kem import Ciphertext, Kdf, PublicKey, SharedKey, derive_session_key, sha256_kdf

SEARCH_GUARD_BITS = 30
KERNEL_CAP_BITS = 12
EXHAUSTIVE_GUARD_BITS = 24


class AttackRefused(ValueError):
    """Raised when an experiment would be far beyond desk scale."""


class Verdict(enum.Enum):
    FAST_REJECT = "fast_reject"
    SYNDROME_REJECT = "syndrome_reject"
    ACCEPT = "accept"


@dataclass(frozen=True)
class AttackConfig:
    max_iterations: int
    know_discard_set: bool = False
    know_error_weight: bool = False
    use_tail_equations: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def fingerprint(key: SharedKey, kdf: Kdf | None = sha256_kdf) -> bytes:
    return derive_session_key(key, kdf)[:8]


@dataclass(frozen=True)
class KeyCheck:
    """What the attacker may consult: an observed key fingerprint, plus the
    optional hints switched on by :class:`AttackConfig`."""
    fingerprint: bytes
    kdf: Kdf | None = sha256_kdf
    discard: tuple[int, ...] | None = None
    error_weight: int | None = None

    @classmethod
    def from_encapsulation(cls, enc, error_weight: int | None = None,
                           kdf: Kdf | None = sha256_kdf) -> "KeyCheck":
        return cls(fingerprint(enc.shared_key, kdf), kdf, tuple(enc.discard), error_weight)

    def matches(self, key: SharedKey) -> bool:
        return fingerprint(key, self.kdf) == self.fingerprint


@dataclass
class AttackOutcome:
    success: bool
    iterations_used: int
    fast_rejects: int = 0
    syndrome_rejects: int = 0
    key: SharedKey | None = None
    discard_guess: tuple[int, ...] | None = None


def _residuals(P_hat: np.ndarray, c: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Rows of X are candidates; returns (len(X), n+m) residual bits."""
    return ((X.astype(np.int32) @ P_hat.T.astype(np.int32)) + c) & 1


def _fast_ok(res: np.ndarray, n: int, weight: int | None = None) -> np.ndarray:
    head = res[:, :n]
    bad = np.zeros(len(res), dtype=bool)
    if n > 1:
        bad |= np.any(head[:, :-1] & head[:, 1:], axis=1)
    if n > 2:
        bad |= np.any(head[:, :-2] & head[:, 2:], axis=1)
    bad |= np.any(res[:, n:], axis=1)
    if weight is not None:
        bad |= head.sum(axis=1) != weight
    return ~bad


def verify_candidate(pk: PublicKey, ct: Ciphertext, candidate: BitVector,
                     discard_guess, key_check: KeyCheck | None = None) -> Verdict:
    """Two-stage check.  Without ``key_check`` a candidate that survives the
    residual test is accepted, since nothing else is observable."""
    prm = pk.params
    if candidate.length != prm.d - prm.p:
        raise ValueError(f"candidate must have {prm.d - prm.p} bits")
    discard = tuple(sorted(int(i) for i in discard_guess))
    P_hat = gf2.remove_columns(pk.P, discard).to_bits()
    res = _residuals(P_hat, ct.c.to_bits(), candidate.to_bits()[None, :])
    weight = key_check.error_weight if key_check else None
    if not _fast_ok(res, prm.n, weight)[0]:
        return Verdict.FAST_REJECT
    if key_check is None:
        return Verdict.ACCEPT
    key = SharedKey(gf2.insert_zeros(candidate, discard))
    return Verdict.ACCEPT if key_check.matches(key) else Verdict.SYNDROME_REJECT


def search_space_bits(pk: PublicKey) -> float:
    prm = pk.params
    return math.log2(math.comb(prm.d, prm.p)) + prm.d - prm.p


def _candidates(particular: BitVector, kernel: list[BitVector]) -> np.ndarray:
    x0 = particular.to_bits()
    if not kernel:
        return x0[None, :]
    basis = np.array([v.to_bits() for v in kernel[:KERNEL_CAP_BITS]], dtype=np.uint8)
    coeffs = (np.arange(2 ** len(basis))[:, None] >> np.arange(len(basis))) & 1
    return ((coeffs @ basis) + x0) & 1


def isd_attack(pk: PublicKey, ct: Ciphertext, cfg: AttackConfig,
               rng: np.random.Generator, *, oracle: KeyCheck) -> AttackOutcome:
    prm = pk.params
    if cfg.know_discard_set:
        if oracle.discard is None:
            raise ValueError("know_discard_set needs the true discard set in the oracle")
    elif search_space_bits(pk) > SEARCH_GUARD_BITS:
        raise AttackRefused(f"search space 2^{search_space_bits(pk):.1f} exceeds 2^{SEARCH_GUARD_BITS}")
    if cfg.know_error_weight and oracle.error_weight is None:
        raise ValueError("know_error_weight needs the true weight in the oracle")
    weight = oracle.error_weight if cfg.know_error_weight else None

    n, m, k = prm.n, prm.m, prm.d - prm.p
    P_bits = pk.P.to_bits()
    c = ct.c.to_bits()
    tail = list(range(n, n + m)) if cfg.use_tail_equations else []
    draw = k - len(tail)
    out = AttackOutcome(False, 0)
    for it in range(1, cfg.max_iterations + 1):
        out.iterations_used = it
        if cfg.know_discard_set:
            guess = tuple(oracle.discard)
        else:
            guess = tuple(sorted(int(i) for i in rng.choice(prm.d, size=prm.p, replace=False)))
        keep = np.setdiff1d(np.arange(prm.d), guess)
        P_hat = P_bits[:, keep]
        rows = np.concatenate([np.sort(rng.choice(n, size=max(draw, 0), replace=False)), tail]).astype(int)
        sol = gf2.solve(BitMatrix.from_bits(P_hat[rows]), BitVector.from_bits(c[rows]))
        if sol is None:
            continue
        X = _candidates(*sol)
        ok = _fast_ok(_residuals(P_hat, c, X), n, weight)
        if not ok.any():
            out.fast_rejects += 1
            continue
        for x in X[ok]:
            key = SharedKey(gf2.insert_zeros(BitVector.from_bits(x), guess))
            if oracle.matches(key):
                out.success, out.key, out.discard_guess = True, key, guess
                return out
        out.syndrome_rejects += 1
    return out


# -- exhaustive mask experiments ------------------------------------------

def _all_matrices(rows: int, cols: int) -> np.ndarray:
    idx = np.arange(2 ** (rows * cols))
    bits = (idx[:, None] >> np.arange(rows * cols)) & 1
    return bits.reshape(-1, rows, cols).astype(np.uint8)


def _rank_batch(mats: np.ndarray) -> np.ndarray:
    return np.array([gf2.rank(BitMatrix.from_bits(a)) for a in mats])


def _encode(mats: np.ndarray) -> np.ndarray:
    flat = mats.reshape(len(mats), -1).astype(np.int64)
    return flat @ (1 << np.arange(flat.shape[1], dtype=np.int64))


def gl_order(r: int) -> int:
    """Number of invertible r x r binary matrices."""
    out = 1
    for i in range(r):
        out *= 2**r - 2**i
    return out


def _guard(s: int, r: int):
    if not s >= r >= 1:
        raise ValueError(f"need s >= r >= 1, got s={s}, r={r}")
    if 2 * r * s > EXHAUSTIVE_GUARD_BITS:
        raise AttackRefused(f"2^{2 * r * s} pairs exceed the exhaustive budget 2^{EXHAUSTIVE_GUARD_BITS}")


@dataclass
class MaskExperiment:
    s: int
    r: int
    full_rank_factors: int
    pairs: int
    distinct: int
    multiplicity_hist: dict[int, int]
    claimed_distinct: int
    claimed_multiplicity: int
    group_order: int
    deficient_distinct: int = 0
    deficient_max_multiplicity: int = 0
    deficient_excess: int = 0

    def to_text(self) -> str:
        lines = [f"{k}={v}" for k, v in vars(self).items() if k != "multiplicity_hist"]
        lines += [f"multiplicity[{k}]={v}" for k, v in sorted(self.multiplicity_hist.items())]
        return "\n".join(lines) + "\n"


def _products(Z: np.ndarray, U: np.ndarray) -> np.ndarray:
    prod = np.einsum("aij,bjk->abik", Z.astype(np.int32), U.astype(np.int32)) & 1
    return prod.reshape(-1, Z.shape[1], U.shape[2])


def full_rank_factors(s: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    Z = _all_matrices(s, r)
    Z = Z[_rank_batch(Z) == r]
    return Z, Z.transpose(0, 2, 1).copy()


def mask_uniqueness_experiment(s: int, r: int) -> MaskExperiment:
    """Count distinct Z U over all full-rank Z (s x r) and U (r x s)."""
    _guard(s, r)
    Z, U = full_rank_factors(s, r)
    codes = _encode(_products(Z, U))
    _, counts = np.unique(codes, return_counts=True)
    h = len(Z)
    exp = MaskExperiment(
        s=s, r=r, full_rank_factors=h, pairs=h * h, distinct=len(counts),
        multiplicity_hist=dict(Counter(counts.tolist())),
        claimed_distinct=h * h // math.factorial(r),
        claimed_multiplicity=math.factorial(r),
        group_order=gl_order(r),
    )
    # drop the full-rank requirement on the factors
    allZ = _all_matrices(s, r)
    _, dcounts = np.unique(_encode(_products(allZ, allZ.transpose(0, 2, 1))), return_counts=True)
    exp.deficient_distinct = len(dcounts)
    exp.deficient_max_multiplicity = int(dcounts.max())
    # collisions beyond what any full-rank pair exhibits
    exp.deficient_excess = int(np.sum(dcounts > max(exp.group_order, exp.claimed_multiplicity)))
    return exp


@dataclass
class UniformityExperiment:
    s: int
    r: int
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    masks: int
    tallied: int
    zero_intersections: int
    histogram: dict[int, int] = field(default_factory=dict)
    chi_square: float = 0.0
    critical_999: float = 0.0

    @property
    def uniform(self) -> bool:
        return self.chi_square < self.critical_999


def intersection_uniformity_experiment(s: int, r: int, rows=None, cols=None) -> UniformityExperiment:
    """Over the distinct masks, tally the r x r block at (rows, cols) whenever it is invertible."""
    _guard(s, r)
    rows = tuple(range(r)) if rows is None else tuple(rows)
    cols = tuple(range(r)) if cols is None else tuple(cols)
    if len(rows) != r or len(cols) != r:
        raise ValueError("need exactly r rows and r columns")
    Z, U = full_rank_factors(s, r)
    prods = _products(Z, U)
    _, first = np.unique(_encode(prods), return_index=True)
    masks = prods[np.sort(first)]
    sub = masks[:, rows][:, :, cols]
    ranks = _rank_batch(sub)
    inv = sub[ranks == r]
    codes = _encode(inv)
    hist = Counter(codes.tolist())
    # every invertible r x r matrix is a category, observed or not
    cats = _encode(_all_matrices(r, r)[_rank_batch(_all_matrices(r, r)) == r])
    observed = np.array([hist.get(int(k), 0) for k in cats], dtype=float)
    expected = observed.sum() / len(cats)
    stat = float(np.sum((observed - expected) ** 2 / expected)) if expected else float("inf")
    return UniformityExperiment(
        s=s, r=r, rows=rows, cols=cols, masks=len(masks), tallied=len(inv),
        zero_intersections=int(np.sum(~sub.reshape(len(sub), -1).any(axis=1))),
        histogram={int(k): int(hist.get(int(k), 0)) for k in cats},
        chi_square=stat,
        critical_999=float(chi2.ppf(0.999, len(cats) - 1)),
    )


def random_wrong_candidates(pk: PublicKey, ct: Ciphertext, discard, true_data: BitVector,
                            count: int, rng: np.random.Generator,
                            key_check: KeyCheck | None = None) -> Counter:
    """Verdict tally for uniformly random candidates that differ from the truth."""
    tally: Counter = Counter()
    k = true_data.length
    for _ in range(count):
        x = BitVector.random(k, rng)
        if x == true_data:
            continue
        tally[verify_candidate(pk, ct, x, discard, key_check)] += 1
    return tally


def discard_inflation_oracle(d: int, p: int) -> float:
    """Exact expected ratio of iterations, unknown vs known discard set, when
    data bits are uniform: any guess lying inside the extended key's zero set
    recovers the same key.  E over the number of zeros Z of C(d,p)/C(Z,p)."""
    k = d - p
    total = 0.0
    for x in range(k + 1):
        total += math.comb(k, x) / 2**k * math.comb(d, p) / math.comb(p + x, p)
    return total


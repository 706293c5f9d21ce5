"""Security level, key entropy, mask counting and complexity figures.

Two attack-cost curves are traced over the error-model parameter ``mu``:

* curve A: discard-set entropy plus the information-set-decoding cost of
  finding enough error-free equations when the error weight is its mean;
* curve B: discard-set entropy plus the entropy of the whole error vector.

The security level is the largest value of ``min(A, B)`` over ``mu``.

Two published conventions are ambiguous and both are computable:

``binomial``
    ``"table"`` counts discard sets as C(d, p); ``"printed"`` as C(3d, p).
``isd_rows``
    ``"attack"`` asks for d - p - m noisy equations (the m tail rows are free);
    ``"table"`` asks for d - p - 2m, which is what the published security
    table corresponds to.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .kem import ParamSet
from .markov import entropy_per_bit, entropy_per_bit_array, expected_weight, prob_one

LOG2E = math.log2(math.e)

BINOMIAL_VARIANTS = ("table", "printed")
ISD_ROW_VARIANTS = ("table", "attack")


class InfeasibleParams(ValueError):
    pass


def _check_variant(value, allowed, name):
    if value not in allowed:
        raise ValueError(f"{name} must be one of {allowed}, got {value!r}")


def log2_comb(n: int, k: int) -> float:
    """log2 of the exact binomial coefficient."""
    c = math.comb(n, k)
    if c == 0:
        raise InfeasibleParams(f"C({n}, {k}) is zero")
    return math.log2(c)


def discard_entropy(d: int, p: int, binomial: str = "table") -> float:
    _check_variant(binomial, BINOMIAL_VARIANTS, "binomial")
    if not 0 <= p < d:
        raise InfeasibleParams(f"need 0 <= p < d, got p={p}, d={d}")
    return log2_comb(d if binomial == "table" else 3 * d, p)


def isd_equations(params: ParamSet, isd_rows: str = "attack") -> int:
    _check_variant(isd_rows, ISD_ROW_VARIANTS, "isd_rows")
    k = params.d - params.p - params.m
    return k - params.m if isd_rows == "table" else k


def isd_log_cost(n: int, t, equations: int):
    """-log2 of the chance that ``equations`` rows drawn without replacement
    from ``n`` all avoid ``t`` erroneous ones.  ``t`` may be real or an array."""
    t = np.asarray(t, dtype=float)
    if equations <= 0:
        return np.zeros_like(t) if t.ndim else 0.0
    i = np.arange(equations, dtype=float)
    num = n - t[..., None] - i
    if np.any(num <= 0):
        raise InfeasibleParams(f"{equations} error-free rows impossible among {n} with t={t.max():.3f}")
    out = -np.sum(np.log2(num) - np.log2(n - i), axis=-1)
    return out if t.ndim else float(out)


def isd_entropy(params: ParamSet, t, isd_rows: str = "attack"):
    return isd_log_cost(params.n, t, isd_equations(params, isd_rows))


def curve_A(params: ParamSet, mu, *, binomial="table", isd_rows="table"):
    mu = np.asarray(mu, dtype=float)
    t = params.n * (1 - mu) / (3 - 2 * mu)
    out = discard_entropy(params.d, params.p, binomial) + isd_entropy(params, t, isd_rows)
    return out if mu.ndim else float(out)


def curve_B(params: ParamSet, mu, *, binomial="table"):
    mu = np.asarray(mu, dtype=float)
    out = discard_entropy(params.d, params.p, binomial) + params.n * entropy_per_bit_array(mu)
    return out if mu.ndim else float(out)


def key_entropy(params: ParamSet, binomial="table") -> float:
    return params.d - params.p + discard_entropy(params.d, params.p, binomial)


def extended_key_entropy(params: ParamSet, binomial="table") -> float:
    """Entropy of the zero-padded key; ``printed`` counts C(d - p, p) placements."""
    _check_variant(binomial, BINOMIAL_VARIANTS, "binomial")
    dh = params.d - params.p
    if binomial == "table":
        return dh + log2_comb(params.d, params.p)
    return dh + log2_comb(dh, params.p)


def pubkey_bits(params: ParamSet) -> int:
    return (params.n + params.m) * params.d


def encap_mac_count(params: ParamSet) -> int:
    return (params.n + params.m) * (params.d - params.p)


@dataclass
class SecurityReport:
    params: ParamSet
    binomial: str
    isd_rows: str
    mu_star: float
    sec_bits: float
    curve_A_bits: float
    curve_B_bits: float
    discard_entropy_E: float
    isd_entropy: float
    error_entropy: float
    expected_errors: float
    key_entropy_K: float
    extended_key_entropy: float
    extended_key_entropy_printed: float
    pubkey_bits: int
    encap_mac_count: int

    def to_text(self) -> str:
        prm = self.params
        lines = [f"SEC={self.sec_bits:.2f}", f"d={prm.d}", f"p={prm.p}", f"m={prm.m}", f"n={prm.n}"]
        for f in fields(self):
            if f.name == "params":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name}={v:.6g}" if isinstance(v, float) else f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"}
        out.update(d=self.params.d, p=self.params.p, m=self.params.m, n=self.params.n)
        return out


def compute_sec(params: ParamSet, *, grid_step: float = 1e-4,
                binomial: str = "table", isd_rows: str = "table") -> SecurityReport:
    """Grid search for the max-min point of the two curves, refined at the crossing."""
    if not 0 < grid_step < 0.5:
        raise ValueError("grid_step must lie in (0, 0.5)")
    grid = np.arange(grid_step, 1.0, grid_step)
    A = curve_A(params, grid, binomial=binomial, isd_rows=isd_rows)
    B = curve_B(params, grid, binomial=binomial)
    lo = np.minimum(A, B)
    k = int(np.argmax(lo))
    mu_star = float(grid[k])

    def gap(x):
        return curve_A(params, x, binomial=binomial, isd_rows=isd_rows) - curve_B(params, x, binomial=binomial)

    for a, b in ((k - 1, k), (k, k + 1)):
        if 0 <= a and b < len(grid) and np.sign(A[a] - B[a]) != np.sign(A[b] - B[b]):
            mu_star = brentq(gap, grid[a], grid[b], xtol=1e-12)
            break

    a_val = curve_A(params, mu_star, binomial=binomial, isd_rows=isd_rows)
    b_val = curve_B(params, mu_star, binomial=binomial)
    t = expected_weight(params.n, mu_star)
    return SecurityReport(
        params=params,
        binomial=binomial, isd_rows=isd_rows,
        mu_star=mu_star,
        sec_bits=min(a_val, b_val),
        curve_A_bits=a_val,
        curve_B_bits=b_val,
        discard_entropy_E=discard_entropy(params.d, params.p, binomial),
        isd_entropy=isd_entropy(params, t, isd_rows),
        error_entropy=params.n * entropy_per_bit(mu_star),
        expected_errors=t,
        key_entropy_K=key_entropy(params, binomial),
        extended_key_entropy=extended_key_entropy(params, "table"),
        extended_key_entropy_printed=extended_key_entropy(params, "printed"),
        pubkey_bits=pubkey_bits(params),
        encap_mac_count=encap_mac_count(params),
    )


# -- masks -----------------------------------------------------------------

@dataclass
class MaskEntropyReport:
    s: int
    r: int
    log_count: float
    log_count_lower: float
    log_count_upper: float
    gap: float
    ground_set_log: float
    mask_entropy_approx: float
    mask_entropy_rect: float | None = None


def full_rank_count(s: int, r: int) -> int:
    """Number of column-wise full-rank s x r binary matrices."""
    out = 1
    for i in range(r):
        out *= 2**s - 2**i
    return out


def log2_factorial(k: int) -> float:
    return math.lgamma(k + 1) / math.log(2)


def mask_count_bounds(s: int, r: int, s2: int | None = None) -> MaskEntropyReport:
    """Exact and bounded log2 counts of full-rank factors; ``s2`` adds the
    rectangular (s x r times r x s2) mask entropy estimate."""
    if not s >= r >= 1:
        raise ValueError(f"need s >= r >= 1, got s={s}, r={r}")
    exact = r * s + math.fsum(math.log1p(-2.0 ** (i - s)) for i in range(r)) / math.log(2)
    upper = r * s + LOG2E * 2.0**-s * (1 - 2.0**r)
    q = 2.0 ** (r - 1 - s)
    lower = r * s - LOG2E * (r * q / (1 - q))
    gap = LOG2E * (2.0**-s - 2.0 ** (r - s) + r * q / (1 - q))
    lf = log2_factorial(r)
    return MaskEntropyReport(
        s=s, r=r,
        log_count=exact,
        log_count_lower=lower,
        log_count_upper=upper,
        gap=gap,
        ground_set_log=2 * exact - lf,
        mask_entropy_approx=2 * r * s - lf,
        mask_entropy_rect=None if s2 is None else r * (s + s2) - lf,
    )


def stirling_log2_factorial(m: int) -> float:
    """log2 of sqrt(2 pi m) (m/e)^m exp(1/(12m+1))."""
    return (0.5 * math.log2(2 * math.pi * m) + m * math.log2(m / math.e)
            + LOG2E / (12 * m + 1))


def mask_margin_check(params: ParamSet, sec: float | None = None) -> tuple[bool, float]:
    """Masking-matrix entropy m(m+n+d) - log2 m! against the security level.

    Returns (entropy exceeds SEC, entropy - SEC).
    """
    m = params.m
    bits = m * (m + params.n + params.d) - stirling_log2_factorial(m)
    if sec is None:
        sec = compute_sec(params).sec_bits
    return bits > sec, bits - sec


def mask_entropy_bits(params: ParamSet) -> float:
    m = params.m
    return m * (m + params.n + params.d) - stirling_log2_factorial(m)


# -- comparison tables ---------------------------------------------------------

# Goppa-code rows used for comparison: (n, k, SEC, memory, McEliece, Niederreiter)
GOPPA_ROWS = [
    (1632, 1269, 80, "0.46 Mbits", "0.0215x10^10", "0.26x10^10"),
    (2960, 2288, 128, "1.53 Mbits", "0.1337x10^10", "1.55x10^10"),
    (6624, 5129, 256, "7.67 Mbits", "1.4805x10^10", "17.43x10^10"),
]

# published rows for the four presets: (d, p, m, SEC, public key, K, complexity)
PUBLISHED_ROWS = [
    (205, 80, 10, 258, "0.128 Mbits", 320, "0.0783x10^6"),
    (300, 118, 10, 388, "0.273 Mbits", 467, "0.1656x10^6"),
    (400, 155, 10, 524, "0.484 Mbits", 627, "0.2964x10^6"),
    (750, 302, 10, 1000, "1.695 Mbits", 1172, "1.0125x10^6"),
]


def parse_published(value: str) -> float:
    mant, exp = value.split("x10^")
    return float(mant) * 10 ** int(exp)


@dataclass
class ComplexityRow:
    name: str
    value: float
    published: str | None = None


def complexity_table(params: ParamSet) -> list[ComplexityRow]:
    dh = params.d - params.p
    rows = [
        ComplexityRow("proposed_mac_count", encap_mac_count(params)),
        ComplexityRow("proposed_quadratic", (params.n + params.m) * dh**2),
        ComplexityRow("proposed_pubkey_bits", pubkey_bits(params)),
    ]
    for i, (n, k, sec, mem, mce, nie) in enumerate(GOPPA_ROWS, 1):
        rows.append(ComplexityRow(f"goppa{i}_n_k2", n * k**2))
        rows.append(ComplexityRow(f"goppa{i}_n_nk2", n * (n - k) ** 2))
        rows.append(ComplexityRow(f"goppa{i}_mceliece", parse_published(mce), mce))
        rows.append(ComplexityRow(f"goppa{i}_niederreiter", parse_published(nie), nie))
        rows.append(ComplexityRow(f"goppa{i}_memory_bits", k * (n - k), mem))
    return rows


def emit_curves_csv(params: ParamSet, mu_grid, path, *, binomial="table", isd_rows="table") -> Path:
    grid = np.asarray(list(mu_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty mu grid")
    A = curve_A(params, grid, binomial=binomial, isd_rows=isd_rows)
    B = curve_B(params, grid, binomial=binomial)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu", "curve_A_bits", "curve_B_bits", "entropy_per_bit", "prob_one"])
        for mu, a, b in zip(grid, A, B):
            w.writerow([f"{mu:.6g}", f"{a:.6f}", f"{b:.6f}",
                        f"{entropy_per_bit(mu):.8f}", f"{prob_one(mu):.8f}"])
    return path

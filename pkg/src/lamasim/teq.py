"""Exponential quantization and the counting form of the dot product.

A real value v is stored as {S, int}: sign S and a signed n-bit exponent,
decoding to S * (alpha * base**int + beta). Exact zeros cannot be expressed
by that form (unless alpha * base**int == -beta), so they carry an explicit
zero flag and contribute nothing anywhere.

With both operands in this form, a dot product splits into four terms that
only need occurrence counting:

    sum A_i W_i = aA*aW * sum s_i * base**(eA_i + eW_i)
                + aW*bA * sum s_i * base**eW_i
                + aA*bW * sum s_i * base**eA_i
                + bA*bW * sum s_i                      with s_i = S_Ai * S_Wi

dot_terms_by_counting builds the three signed histograms and the sign sum;
combine_terms evaluates the expression. reference_dot computes the same
quantity directly from decoded values and exists purely as the oracle for
that identity. A single base is shared per operand pair because the first
term needs base**(eA + eW).

Encoding picks the nearest codebook point by brute scan over all 2^n
exponents (ties to the smaller exponent). beta is kept non-negative;
magnitudes at or below beta clamp to the minimum exponent.

All value semantics, no shared state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class TeqError(Exception):
    pass


class DegenerateInputError(TeqError):
    pass


@dataclass(frozen=True)
class TeqParams:
    alpha: float
    beta: float
    base: float
    n: int

    def __post_init__(self):
        if self.alpha <= 0:
            raise TeqError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0:
            raise TeqError(f"beta must be non-negative, got {self.beta}")
        if self.base <= 1:
            raise TeqError(f"base must exceed 1, got {self.base}")
        if not 3 <= self.n <= 7:
            raise TeqError(f"exponent bits must be in 3..7, got {self.n}")

    @property
    def exp_min(self) -> int:
        return -(1 << (self.n - 1))

    @property
    def exp_max(self) -> int:
        return (1 << (self.n - 1)) - 1

    def codebook(self) -> np.ndarray:
        """Decoded magnitudes for every exponent, ascending exponent order."""
        exps = np.arange(self.exp_min, self.exp_max + 1, dtype=np.float64)
        return self.alpha * self.base ** exps + self.beta


@dataclass(frozen=True)
class TeqTensor:
    signs: np.ndarray       # +-1 per element
    exponents: np.ndarray   # signed n-bit integers
    zero_flags: np.ndarray  # bool
    params: TeqParams

    def __len__(self) -> int:
        return len(self.exponents)

    def __post_init__(self):
        p = self.params
        active = ~self.zero_flags
        if np.any((self.exponents[active] < p.exp_min) |
                  (self.exponents[active] > p.exp_max)):
            raise TeqError("exponent outside the signed n-bit range")


def encode(values, params: TeqParams) -> TeqTensor:
    """Nearest-codebook-point encoding; exact zeros get the zero flag."""
    v = np.asarray(values, dtype=np.float64).ravel()
    zero = v == 0.0
    signs = np.where(v < 0, -1, 1).astype(np.int8)
    mags = np.abs(v)
    book = params.codebook()
    # |mag - book| per element; argmin returns the first (smallest exponent) tie
    idx = np.argmin(np.abs(mags[:, None] - book[None, :]), axis=1)
    exps = (idx + params.exp_min).astype(np.int16)
    exps[zero] = params.exp_min
    return TeqTensor(signs=signs, exponents=exps, zero_flags=zero, params=params)


def decode(t: TeqTensor) -> np.ndarray:
    out = t.signs * (t.params.alpha * t.params.base ** t.exponents.astype(np.float64)
                     + t.params.beta)
    out[t.zero_flags] = 0.0
    return out


def _mse(values: np.ndarray, params: TeqParams) -> float:
    return float(np.mean((decode(encode(values, params)) - values) ** 2))


def calibrate(values, n: int, base: float | None = None) -> TeqParams:
    """Deterministic coordinate search for (alpha, beta, base) minimizing the
    mean squared decode error on the tensor.

    The candidate grid is shared across every n (the union of the per-n base
    seeds 2**(2**(4-k)), refined multiplicatively), so a larger exponent
    budget can never fit worse than a smaller one. Pass base to pin it and
    search alpha/beta only.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise DegenerateInputError("empty tensor")
    mags = np.abs(v[v != 0])
    if mags.size == 0:
        raise DegenerateInputError("all-zero tensor cannot be calibrated")
    vmax = float(mags.max())

    if base is not None:
        base_grid = [float(base)]
    else:
        seeds = [2.0 ** (2.0 ** (4 - k)) for k in range(3, 8)]
        base_grid = sorted({round(b * m, 12)
                            for b in seeds
                            for m in (0.75, 0.9, 1.0, 1.1, 1.25, 1.5)
                            if b * m > 1.0})

    best: tuple[float, TeqParams] | None = None
    for b in base_grid:
        exp_max = (1 << (n - 1)) - 1
        # alpha candidates: the plain maximum plus range-matched variants
        alphas = {vmax, vmax / b ** exp_max, float(np.sqrt(np.mean(mags ** 2)))}
        alphas = sorted(a for a in alphas if a > 0)
        for a0 in alphas:
            for a_mul in (0.25, 0.5, 0.75, 1.0, 1.5, 2.0):
                alpha = a0 * a_mul
                for beta in (0.0, float(mags.min()) * 0.5):
                    try:
                        params = TeqParams(alpha=alpha, beta=beta, base=b, n=n)
                    except TeqError:
                        continue
                    err = _mse(v, params)
                    key = (err, alpha, beta, b)
                    if best is None or key < (best[0], best[1].alpha,
                                              best[1].beta, best[1].base):
                        best = (err, params)
    assert best is not None
    return best[1]


@dataclass
class TermAccumulators:
    """Signed occurrence counts for the four dot-product terms.

    t1 is indexed by eA + eW (offset by 2*exp_min), t2 by eW, t3 by eA
    (offset by exp_min), t4 is the plain sign sum. The three counters tally
    the same pairs, so t4 equals the sum of t2 and of t3.
    """

    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray
    t4: int
    n: int

    @property
    def exp_min(self) -> int:
        return -(1 << (self.n - 1))

    def nonzero_bins(self) -> int:
        return (int(np.count_nonzero(self.t1)) + int(np.count_nonzero(self.t2))
                + int(np.count_nonzero(self.t3)) + (1 if self.t4 else 0))


def empty_accumulators(n: int) -> TermAccumulators:
    size = 1 << n
    return TermAccumulators(
        t1=np.zeros(2 * size - 1, dtype=np.int64),
        t2=np.zeros(size, dtype=np.int64),
        t3=np.zeros(size, dtype=np.int64),
        t4=0,
        n=n,
    )


def dot_terms_by_counting(A: TeqTensor, W: TeqTensor) -> TermAccumulators:
    """Tally signed occurrences of eW, eA and eA + eW over all pairs.

    Zero-flagged pairs are skipped entirely."""
    if len(A) != len(W):
        raise TeqError(f"length mismatch: {len(A)} vs {len(W)}")
    if A.params.n != W.params.n:
        raise TeqError("operand tensors use different exponent widths")
    acc = empty_accumulators(A.params.n)
    live = ~(A.zero_flags | W.zero_flags)
    s = (A.signs[live] * W.signs[live]).astype(np.int64)
    ea = A.exponents[live].astype(np.int64) - acc.exp_min
    ew = W.exponents[live].astype(np.int64) - acc.exp_min
    np.add.at(acc.t1, ea + ew, s)
    np.add.at(acc.t2, ew, s)
    np.add.at(acc.t3, ea, s)
    acc.t4 = int(s.sum())
    return acc


def combine_terms(acc: TermAccumulators, pA: TeqParams, pW: TeqParams) -> float:
    """Evaluate the four-term expansion from the accumulators."""
    if pA.base != pW.base:
        raise TeqError(f"base mismatch: {pA.base} vs {pW.base}")
    b = pA.base
    lo = acc.exp_min
    pow_sum = b ** np.arange(2 * lo, -2 * lo - 1, dtype=np.float64)
    pow_one = b ** np.arange(lo, -lo, dtype=np.float64)
    term1 = pA.alpha * pW.alpha * float(acc.t1 @ pow_sum)
    term2 = pW.alpha * pA.beta * float(acc.t2 @ pow_one)
    term3 = pA.alpha * pW.beta * float(acc.t3 @ pow_one)
    term4 = pA.beta * pW.beta * acc.t4
    return term1 + term2 + term3 + term4


def reference_dot(A: TeqTensor, W: TeqTensor) -> float:
    """Direct sum of decoded products; the oracle for the counting identity."""
    if len(A) != len(W):
        raise TeqError(f"length mismatch: {len(A)} vs {len(W)}")
    return float(np.dot(decode(A), decode(W)))


# -- storage format: JSON header line + one byte per element ----------------

def to_bytes(t: TeqTensor) -> bytes:
    """Serialize: JSON header (params and zero positions) terminated by a
    newline, then one byte per element holding the sign bit above a 7-bit
    two's-complement exponent."""
    header = json.dumps({
        "alpha": t.params.alpha,
        "beta": t.params.beta,
        "base": t.params.base,
        "n": t.params.n,
        "count": len(t),
        "zeros": np.flatnonzero(t.zero_flags).tolist(),
    }).encode()
    sign_bits = (t.signs < 0).astype(np.uint8) << 7
    exp_bits = (t.exponents.astype(np.int16) & 0x7F).astype(np.uint8)
    return header + b"\n" + (sign_bits | exp_bits).tobytes()


def from_bytes(blob: bytes) -> TeqTensor:
    header_raw, payload = blob.split(b"\n", 1)
    header = json.loads(header_raw)
    params = TeqParams(alpha=header["alpha"], beta=header["beta"],
                       base=header["base"], n=header["n"])
    raw = np.frombuffer(payload[:header["count"]], dtype=np.uint8)
    signs = np.where(raw & 0x80, -1, 1).astype(np.int8)
    exps = (raw & 0x7F).astype(np.int16)
    exps[exps >= 64] -= 128  # 7-bit two's complement
    zeros = np.zeros(len(raw), dtype=bool)
    zeros[header["zeros"]] = True
    exps = exps.copy()
    exps[zeros] = params.exp_min
    return TeqTensor(signs=signs, exponents=exps, zero_flags=zeros, params=params)

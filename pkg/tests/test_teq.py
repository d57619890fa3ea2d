"""Codec round trips, the counting identity, calibration behavior."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lamasim.teq import (DegenerateInputError, TeqError, TeqParams, TeqTensor,
                         calibrate, combine_terms, decode,
                         dot_terms_by_counting, empty_accumulators, encode,
                         from_bytes, reference_dot, to_bytes, _mse)


def params(n=4, alpha=1.0, beta=0.0, base=2.0):
    return TeqParams(alpha=alpha, beta=beta, base=base, n=n)


def random_params(rng, n):
    # keep base^(2^(n-1)) in a sane float range
    base = 1.0 + float(rng.uniform(0.02, 2.0 ** (2.0 ** (3 - n) + 1) - 1.0))
    return TeqParams(alpha=float(rng.uniform(0.1, 3.0)),
                     beta=float(rng.uniform(0.0, 0.3)),
                     base=base, n=n)


class TestParams:
    def test_field_guards(self):
        with pytest.raises(TeqError):
            TeqParams(alpha=0.0, beta=0.0, base=2.0, n=4)
        with pytest.raises(TeqError):
            TeqParams(alpha=1.0, beta=0.0, base=1.0, n=4)
        with pytest.raises(TeqError):
            TeqParams(alpha=1.0, beta=0.0, base=2.0, n=8)

    def test_exponent_range(self):
        p = params(n=5)
        assert (p.exp_min, p.exp_max) == (-16, 15)
        assert len(p.codebook()) == 32


class TestEncodeDecode:
    def test_on_grid_value(self):
        p = params(alpha=0.7, beta=0.1, base=1.5)
        v = 0.7 * 1.5 ** 2 + 0.1
        t = encode([v], p)
        assert t.exponents[0] == 2
        assert t.signs[0] == 1
        assert decode(t)[0] == pytest.approx(v)

    def test_zero_flag(self):
        t = encode([0.0, 1.0], params())
        assert t.zero_flags.tolist() == [True, False]
        assert decode(t)[0] == 0.0

    def test_sign_carried(self):
        t = encode([-3.0, 3.0], params())
        assert t.signs.tolist() == [-1, 1]
        assert decode(t)[0] == -decode(t)[1]

    @given(n=st.integers(3, 7), seed=st.integers(0, 10 ** 6))
    @settings(max_examples=80, deadline=None)
    def test_nearest_codebook_point(self, n, seed):
        rng = np.random.default_rng(seed)
        p = random_params(rng, n)
        values = rng.normal(size=16) * 2.0
        t = encode(values, p)
        book = p.codebook()
        for v, e, z in zip(values, t.exponents, t.zero_flags):
            if z:
                continue
            dists = np.abs(abs(v) - book)
            best = dists.min()
            got = dists[e - p.exp_min]
            assert got == pytest.approx(best)
            # ties resolve toward the smaller exponent
            ties = np.flatnonzero(dists == best)
            assert e - p.exp_min == ties[0]

    def test_exponent_range_enforced(self):
        p = params(n=3)
        with pytest.raises(TeqError):
            TeqTensor(signs=np.array([1], dtype=np.int8),
                      exponents=np.array([9], dtype=np.int16),
                      zero_flags=np.array([False]), params=p)


class TestCalibrate:
    def test_plus_minus_one_is_exact(self):
        p = calibrate(np.array([1.0, -1.0, 1.0, -1.0]), 3)
        assert _mse(np.array([1.0, -1.0]), p) == 0.0

    def test_fixed_base_powers_of_two(self):
        p = calibrate(np.array([2.0, 4.0, 8.0]), 3, base=2.0)
        assert (p.alpha, p.beta, p.base) == (1.0, 0.0, 2.0)
        t = encode(np.array([2.0, 4.0, 8.0]), p)
        assert t.exponents.tolist() == [1, 2, 3]
        assert _mse(np.array([2.0, 4.0, 8.0]), p) == 0.0

    def test_more_bits_never_fit_worse(self):
        rng = np.random.default_rng(17)
        for _ in range(3):
            v = rng.normal(size=300)
            errs = [_mse(v, calibrate(v, n)) for n in (3, 5, 7)]
            assert errs[2] <= errs[1] <= errs[0]

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateInputError):
            calibrate(np.array([]), 4)
        with pytest.raises(DegenerateInputError):
            calibrate(np.zeros(8), 4)

    def test_deterministic(self):
        v = np.random.default_rng(5).normal(size=64)
        assert calibrate(v, 4) == calibrate(v, 4)


class TestCounting:
    def test_single_pair(self):
        p = params(n=3)
        A = TeqTensor(np.array([1], dtype=np.int8), np.array([0], dtype=np.int16),
                      np.array([False]), p)
        W = TeqTensor(np.array([1], dtype=np.int8), np.array([0], dtype=np.int16),
                      np.array([False]), p)
        acc = dot_terms_by_counting(A, W)
        mid_sum = -2 * acc.exp_min
        mid = -acc.exp_min
        assert acc.t1[mid_sum] == 1
        assert acc.t2[mid] == 1
        assert acc.t3[mid] == 1
        assert acc.t4 == 1

    def test_opposite_signs(self):
        p = params(n=3)
        A = TeqTensor(np.array([-1], dtype=np.int8), np.array([2], dtype=np.int16),
                      np.array([False]), p)
        W = TeqTensor(np.array([1], dtype=np.int8), np.array([1], dtype=np.int16),
                      np.array([False]), p)
        acc = dot_terms_by_counting(A, W)
        assert acc.t1.sum() == -1
        assert acc.t4 == -1

    def test_brute_force_tally(self):
        rng = np.random.default_rng(29)
        p = random_params(rng, 4)
        A = encode(rng.normal(size=64), p)
        W = encode(rng.normal(size=64), p)
        acc = dot_terms_by_counting(A, W)
        size = 1 << 4
        t1 = np.zeros(2 * size - 1, dtype=np.int64)
        t2 = np.zeros(size, dtype=np.int64)
        t3 = np.zeros(size, dtype=np.int64)
        t4 = 0
        for i in range(64):
            if A.zero_flags[i] or W.zero_flags[i]:
                continue
            s = int(A.signs[i]) * int(W.signs[i])
            t1[int(A.exponents[i]) + int(W.exponents[i]) - 2 * acc.exp_min] += s
            t2[int(W.exponents[i]) - acc.exp_min] += s
            t3[int(A.exponents[i]) - acc.exp_min] += s
            t4 += s
        np.testing.assert_array_equal(acc.t1, t1)
        np.testing.assert_array_equal(acc.t2, t2)
        np.testing.assert_array_equal(acc.t3, t3)
        assert acc.t4 == t4

    def test_accumulator_consistency(self):
        rng = np.random.default_rng(31)
        p = random_params(rng, 5)
        A = encode(rng.normal(size=128), p)
        W = encode(rng.normal(size=128), p)
        acc = dot_terms_by_counting(A, W)
        assert acc.t4 == acc.t2.sum() == acc.t3.sum()

    def test_zero_pairs_skipped(self):
        p = params(n=3)
        A = encode([0.0, 1.0], p)
        W = encode([1.0, 0.0], p)
        acc = dot_terms_by_counting(A, W)
        assert not acc.t1.any() and acc.t4 == 0

    def test_length_mismatch(self):
        p = params()
        with pytest.raises(TeqError):
            dot_terms_by_counting(encode([1.0], p), encode([1.0, 2.0], p))


class TestCombine:
    def test_single_term_case(self):
        pA = params(n=3, alpha=0.5)
        pW = params(n=3, alpha=3.0)
        A = encode([0.5], pA)
        W = encode([3.0], pW)
        acc = dot_terms_by_counting(A, W)
        assert combine_terms(acc, pA, pW) == pytest.approx(0.5 * 3.0)

    def test_empty(self):
        assert combine_terms(empty_accumulators(4), params(), params()) == 0.0

    def test_base_mismatch(self):
        with pytest.raises(TeqError):
            combine_terms(empty_accumulators(4), params(base=2.0),
                          params(base=3.0))

    @given(n=st.integers(3, 7), seed=st.integers(0, 10 ** 6))
    @settings(max_examples=100, deadline=None)
    def test_counting_identity(self, n, seed):
        """The core identity: counting then combining equals the direct dot."""
        rng = np.random.default_rng(seed)
        shared_base = random_params(rng, n).base
        pA = TeqParams(alpha=float(rng.uniform(0.1, 2.0)),
                       beta=float(rng.uniform(0.0, 0.2)), base=shared_base, n=n)
        pW = TeqParams(alpha=float(rng.uniform(0.1, 2.0)),
                       beta=float(rng.uniform(0.0, 0.2)), base=shared_base, n=n)
        m = int(rng.integers(1, 512))
        A = encode(rng.normal(size=m), pA)
        W = encode(rng.normal(size=m), pW)
        lhs = combine_terms(dot_terms_by_counting(A, W), pA, pW)
        rhs = reference_dot(A, W)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)

    def test_bin_economy(self):
        # occupied bins stay far below the m partial products they replace
        rng = np.random.default_rng(41)
        for n in range(3, 8):
            p = random_params(rng, n)
            m = 4096
            A = encode(rng.normal(size=m), p)
            W = encode(rng.normal(size=m), p)
            acc = dot_terms_by_counting(A, W)
            assert acc.nonzero_bins() <= 3 * (1 << n) + 1 < m


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(47)
        p = random_params(rng, 6)
        values = rng.normal(size=40)
        values[[3, 17]] = 0.0
        t = encode(values, p)
        back = from_bytes(to_bytes(t))
        assert back.params == t.params
        np.testing.assert_array_equal(back.signs, t.signs)
        np.testing.assert_array_equal(back.exponents, t.exponents)
        np.testing.assert_array_equal(back.zero_flags, t.zero_flags)

    def test_one_byte_per_element(self):
        p = params(n=7)
        t = encode(np.linspace(-4, 4, 33), p)
        blob = to_bytes(t)
        header, payload = blob.split(b"\n", 1)
        assert len(payload) == 33

    def test_negative_exponents_survive(self):
        p = params(n=7, alpha=2.0)
        t = encode([2.0 * 2.0 ** -50], p)
        assert t.exponents[0] == -50
        back = from_bytes(to_bytes(t))
        assert back.exponents[0] == -50

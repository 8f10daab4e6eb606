"""Digit-by-digit index decoding from bucket ratio measurements.

A single tone makes every measurement ratio an exact root of unity, so
location must return the tone's index and nothing else; that pins the whole
shift ladder arithmetic, including multi-axis grids. Probe balance rules are
checked at their integer boundaries, and noisy-tail recall is measured
against the supermajority voting threshold.
"""
import numpy as np
import pytest

from sparsefft import (
    DenseSignal,
    GridIndex,
    ParameterError,
    ProbePair,
    RecoveryParams,
    SparseApprox,
)
from sparsefft.dense_dft import fft_grid
from sparsefft.hashing_measurements import (
    acquire_measurements,
    update_residual_measurements,
)
from sparsefft.location import LocationResult, check_balanced, locate_signal
from sparsefft.permutation import bucket_of

from oracles import dense_time, random_sparse_time


def lib_freq(values_time: np.ndarray, n: int, d: int) -> DenseSignal:
    """Frequency view via the library transform (oracle-checked elsewhere)."""
    vals = fft_grid(np.asarray(values_time, dtype=np.complex128).reshape((n,) * d))
    return DenseSignal(n=n, d=d, values=vals, domain="frequency")


def pair(n: int, beta: int) -> ProbePair:
    return ProbePair(GridIndex(n, (0,)), GridIndex(n, (beta,)))


class TestCheckBalanced:
    def test_empty_set_is_unbalanced(self):
        assert not check_balanced([], 0, 2)

    def test_zero_betas_are_unbalanced(self):
        probes = [pair(64, 0) for _ in range(10)]
        assert not check_balanced(probes, 0, 2)

    def test_threshold_boundary_at_base_two(self):
        # digit 1 hits exactly on the odd betas; 49 of 100 is the floor.
        almost = [pair(64, 1)] * 48 + [pair(64, 2)] * 52
        enough = [pair(64, 1)] * 49 + [pair(64, 2)] * 51
        assert not check_balanced(almost, 0, 2)
        assert check_balanced(enough, 0, 2)

    def test_odd_betas_always_balance_bases_two_and_four(self, rng):
        n = 1024
        for delta in (2, 4):
            for _ in range(50):
                betas = 2 * rng.integers(0, n // 2, size=8) + 1
                probes = [pair(n, int(b)) for b in betas]
                assert check_balanced(probes, 0, delta)

    def test_even_betas_fail_base_four_on_digit_two(self):
        # 2 * beta = 0 mod 4 for even beta, so digit 2 gets no hits.
        probes = [pair(64, 2)] * 10
        assert not check_balanced(probes, 0, 4)

    def test_uniform_draws_balance_at_moderate_rate(self, rng):
        # P[Binomial(12, 1/2) >= 6] is about 0.61; the resampling loop in
        # acquisition leans on this rate being far from zero.
        n, c, trials = 1024, 12, 2000
        hits = 0
        for _ in range(trials):
            probes = [pair(n, int(b)) for b in rng.integers(0, n, size=c)]
            hits += check_balanced(probes, 0, 2)
        assert 0.35 < hits / trials < 0.85

    def test_multi_axis_reads_requested_axis(self):
        n = 64
        probes = [
            ProbePair(GridIndex.zero(n, 2), GridIndex(n, (1, 2))) for _ in range(10)
        ]
        assert check_balanced(probes, 0, 2)
        assert not check_balanced(probes, 1, 2)


class TestSingleTone:
    def test_exact_recovery_from_every_live_bucket(self, rng):
        n, d = 1024, 1
        params = RecoveryParams.derive(n, d, 1)
        empty = SparseApprox(n, d, {})
        for _ in range(6):
            x = random_sparse_time(n, d, 1, rng)
            i0 = next(iter(x))
            mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
            result = locate_signal(mset, 0, empty)
            assert i0 in result.found
            # Every bucket sees the same tone, so nothing else can decode.
            assert result.found == [i0]
            own = bucket_of(mset.hashings[0], i0).coords[0]
            assert not result.failed[own]

    def test_two_dimensional_tone(self, rng):
        n, d = 64, 2
        params = RecoveryParams.derive(n, d, 1)
        x = random_sparse_time(n, d, 1, rng)
        i0 = next(iter(x))
        mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
        for r in range(min(3, params.r_max)):
            result = locate_signal(mset, r, SparseApprox(n, d, {}))
            assert result.found == [i0]

    def test_decoding_reads_no_new_samples(self, rng):
        n, d = 1024, 1
        params = RecoveryParams.derive(n, d, 1)
        x = random_sparse_time(n, d, 1, rng)
        mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
        counter = mset.sample_counter
        locate_signal(mset, 0, SparseApprox(n, d, {}))
        assert mset.sample_counter == counter

    def test_decoding_is_deterministic(self, rng):
        n, d = 1024, 1
        params = RecoveryParams.derive(n, d, 3)
        x = random_sparse_time(n, d, 3, rng)
        mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
        first = locate_signal(mset, 1, SparseApprox(n, d, {}))
        second = locate_signal(mset, 1, SparseApprox(n, d, {}))
        assert first.found == second.found
        assert np.array_equal(first.failed, second.failed)


class TestResidualAwareness:
    def test_zero_signal_decodes_nothing(self, rng):
        n, d = 256, 1
        params = RecoveryParams.derive(n, d, 2)
        zero = DenseSignal.zeros(n, d, "frequency")
        mset = acquire_measurements(zero, params, rng)
        result = locate_signal(mset, 0, SparseApprox(n, d, {}))
        assert result.found == []
        assert result.failed.all()

    def test_subtracted_tone_disappears(self, rng):
        n, d = 1024, 1
        params = RecoveryParams.derive(n, d, 2)
        x = random_sparse_time(n, d, 2, rng)
        mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
        tones = sorted(x.items(), key=lambda kv: -abs(kv[1]))
        loud = SparseApprox(n, d, {tones[0][0]: tones[0][1]})
        update_residual_measurements(mset, loud)
        result = locate_signal(mset, 0, loud)
        assert tones[1][0] in result.found
        assert tones[0][0] not in result.found

    def test_fully_subtracted_signal_goes_silent(self, rng):
        n, d = 1024, 1
        params = RecoveryParams.derive(n, d, 2)
        x = random_sparse_time(n, d, 2, rng)
        mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
        update_residual_measurements(mset, x)
        result = locate_signal(mset, 0, x)
        assert result.found == []


class TestNoisyRecall:
    def test_small_tail_keeps_supermajorities(self, rng):
        # Spikes of unit order against a tail at one percent of the weakest
        # spike; each hashing should still locate every spike almost always.
        n, d, k = 1024, 1, 5
        params = RecoveryParams.derive(n, d, k)
        empty = SparseApprox(n, d, {})
        full, pairs = 0, 0
        for _ in range(10):
            x = random_sparse_time(n, d, k, rng)
            spikes = set(x)
            floor = min(abs(v) for v in x.entries.values())
            tail = rng.normal(size=n) + 1j * rng.normal(size=n)
            tail *= 0.01 * floor / np.linalg.norm(tail)
            xt = dense_time(x).values + tail
            mset = acquire_measurements(lib_freq(xt, n, d), params, rng)
            for r in range(params.r_max):
                found = set(locate_signal(mset, r, empty).found)
                pairs += 1
                full += spikes <= found
        assert full >= 0.8 * pairs

    def test_validation_errors(self, rng):
        n, d = 256, 1
        params = RecoveryParams.derive(n, d, 2)
        x = random_sparse_time(n, d, 2, rng)
        mset = acquire_measurements(lib_freq(dense_time(x).values, n, d), params, rng)
        with pytest.raises(ParameterError):
            locate_signal(mset, params.r_max, SparseApprox(n, d, {}))
        with pytest.raises(ParameterError):
            locate_signal(mset, 0, SparseApprox(2 * n, d, {}))

"""Bucketed measurements against the brute-force double sum.

hash_to_bins is checked three ways: a single tone lands in its bucket with
the predicted gain and phase, a perfectly subtracted signal leaves only
transform error, and random residuals match the literal double sum over
every grid point. Acquisition bookkeeping (shift ladder, probe balance,
sample counting) and in-place residual updates are pinned separately.
"""
import numpy as np
import pytest

from sparsefft import (
    DenseSignal,
    GridIndex,
    ParameterError,
    RecoveryParams,
    SparseApprox,
    digit_base,
)
from sparsefft.filters import cached_bucket_filter
from sparsefft.hashing_measurements import (
    acquire_measurements,
    hash_to_bins,
    load_measurement_set,
    save_measurement_set,
    update_residual_measurements,
)
from sparsefft.location import check_balanced
from sparsefft.permutation import Hashing, bucket_of, offset, sample_permutation

from oracles import (
    brute_bucket_sums,
    dense_time,
    direct_transform,
    random_sparse_time,
    root_table,
)


def make_hashing(n, d, B, F, rng):
    filt = cached_bucket_filter(n, d, B, F)
    return Hashing(perm=sample_permutation(n, d, rng), B=B, F=F, filter=filt)


def freq_signal(values_time, n, d):
    """Frequency-domain view of a dense time array, via the direct oracle."""
    if isinstance(values_time, DenseSignal):
        values_time = values_time.values
    xhat = direct_transform(np.asarray(values_time, dtype=np.complex128), n, d)
    return DenseSignal(n=n, d=d, values=xhat.reshape((n,) * d), domain="frequency")


class TestSingleTone:
    def test_tone_bucket_value_and_leakage(self, rng):
        n, d, B, F = 64, 1, 8, 4
        table = root_table(n)
        for _ in range(10):
            hashing = make_hashing(n, d, B, F, rng)
            i0 = GridIndex(n, (int(rng.integers(n)),))
            v = complex(rng.normal(), rng.normal())
            x = SparseApprox(n, d, {i0: v})
            a = GridIndex(n, (int(rng.integers(n)),))
            u = hash_to_bins(freq_signal(dense_time(x), n, d), SparseApprox(n, d, {}), hashing, a)

            gain = hashing.filter.g_value(offset(hashing, i0, i0))
            expo = int((a.to_array() @ hashing.perm.sigma @ i0.to_array()) % n)
            expected = gain * v * table[expo]
            assert abs(u[bucket_of(hashing, i0).coords] - expected) < 1e-8

            pi = hashing.perm.forward(i0).coords[0]
            for j in range(B):
                delta = (pi - (n // B) * j) % n
                dist = min(delta, n - delta)
                envelope = (2.0 / (1.0 + dist * B / n)) ** F
                assert abs(u[j]) <= envelope * abs(v) + 1e-8

    def test_perfect_subtraction_leaves_transform_error(self, rng):
        n, d = 64, 1
        x = random_sparse_time(n, d, 6, rng)
        xhat = freq_signal(dense_time(x), n, d)
        hashing = make_hashing(n, d, 8, 4, rng)
        u = hash_to_bins(xhat, x, hashing, GridIndex.zero(n, d))
        assert np.max(np.abs(u)) <= 1e-6 * x.norm2()


class TestBruteForceIdentity:
    @pytest.mark.parametrize(
        "n,d,B,F,k_chi", [(64, 1, 8, 4, 4), (64, 1, 16, 4, 6), (16, 2, 16, 4, 3)]
    )
    def test_buckets_match_double_sum(self, n, d, B, F, k_chi, rng):
        for _ in range(8):
            hashing = make_hashing(n, d, B, F, rng)
            x_time = rng.normal(size=(n,) * d) + 1j * rng.normal(size=(n,) * d)
            chi = random_sparse_time(n, d, k_chi, rng)
            a = GridIndex.from_array(n, rng.integers(0, n, size=d))
            u = hash_to_bins(freq_signal(x_time, n, d), chi, hashing, a)
            residual = x_time - dense_time(chi).values
            expected = brute_bucket_sums(residual, hashing, a)
            assert np.max(np.abs(u - expected)) < 1e-7

    def test_linearity_of_bucketing(self, rng):
        n, d, B, F = 64, 1, 8, 4
        hashing = make_hashing(n, d, B, F, rng)
        a = GridIndex(n, (3,))
        x1 = rng.normal(size=n) + 1j * rng.normal(size=n)
        x2 = rng.normal(size=n) + 1j * rng.normal(size=n)
        chi1 = random_sparse_time(n, d, 3, rng)
        chi2 = random_sparse_time(n, d, 3, rng)
        u_sum = hash_to_bins(freq_signal(x1 + x2, n, d), chi1 + chi2, hashing, a)
        u1 = hash_to_bins(freq_signal(x1, n, d), chi1, hashing, a)
        u2 = hash_to_bins(freq_signal(x2, n, d), chi2, hashing, a)
        scale = np.abs(u1).max() + np.abs(u2).max()
        assert np.max(np.abs(u_sum - (u1 + u2))) < 1e-9 * max(scale, 1.0)

    def test_heavy_chi_warns_but_computes(self, rng):
        # 300 entries against B=8 exceeds the 4*max(B, 64) advisory line.
        n, d = 512, 1
        hashing = make_hashing(n, d, 8, 4, rng)
        chi_big = SparseApprox(
            n, d, {GridIndex(n, (t,)): 1.0 + 0j for t in range(300)}
        )
        xhat = freq_signal(dense_time(chi_big), n, d)
        with pytest.warns(RuntimeWarning):
            hash_to_bins(xhat, chi_big, hashing, GridIndex.zero(n, d))


class TestMeanBucketNoise:
    def test_tail_leakage_scales_inversely_with_buckets(self, rng):
        # E_H sum_{j != i} G(o_i(j))^2 |x_j|^2 <= C ||x||^2 / B. The filter's
        # squared mass per axis is a few times n/b, so C stays single-digit.
        n, d, B, F = 256, 1, 8, 4
        x_time = rng.normal(size=n) + 1j * rng.normal(size=n)
        i0 = GridIndex(n, (17,))
        energy = float(np.sum(np.abs(x_time) ** 2))
        x_tail = x_time.copy()
        x_tail[17] = 0.0
        total = 0.0
        trials = 200
        for _ in range(trials):
            hashing = make_hashing(n, d, B, F, rng)
            pi_all = hashing.perm.forward_array(np.arange(n)[:, None])
            center = hashing.center_of_array(i0.to_array()[None, :])[0]
            gains = hashing.filter.g_axis[(pi_all[:, 0] - center[0]) % n]
            total += float((gains**2 * np.abs(x_tail) ** 2).sum())
        assert total / trials <= 4.0 * energy / B


class TestAcquisition:
    def test_shift_ladder_and_counter(self, rng):
        params = RecoveryParams.derive(1024, 1, 5)
        xhat = freq_signal(rng.normal(size=1024), 1024, 1)
        mset = acquire_measurements(xhat, params, rng)
        assert params.delta == 2
        assert len(mset.shifts) == 1 + 1 * 10
        assert mset.shifts[0] == GridIndex.zero(1024, 1)
        support = mset.hashings[0].filter.support_size
        expected = params.r_max * params.c_max * len(mset.shifts) * support
        assert mset.sample_counter == expected

    def test_digit_base_for_large_grid(self):
        assert digit_base(2**16) == 4
        params = RecoveryParams.derive(2**16, 1, 8)
        assert params.delta == 4

    def test_every_probe_set_is_balanced(self, rng):
        params = RecoveryParams.derive(256, 1, 4)
        xhat = freq_signal(rng.normal(size=256), 256, 1)
        mset = acquire_measurements(xhat, params, rng)
        for probes in mset.probes:
            assert len(probes) == params.c_max
            for s in range(params.d):
                assert check_balanced(probes, s, params.delta)

    def test_shift_vectors_cover_every_digit_group(self, rng):
        params = RecoveryParams.derive(64, 2, 3)
        xhat = freq_signal(rng.normal(size=(64, 64)), 64, 2)
        mset = acquire_measurements(xhat, params, rng)
        n, d = 64, 2
        delta = params.delta
        groups = len(mset.group_bases)
        assert len(mset.shifts) == 1 + d * groups
        reach = 1
        for base in mset.group_bases:
            reach *= base
        assert reach == n

    def test_bucket_tables_match_direct_bucketing(self, rng):
        # Acquisition fills m[r, t, w] with hash_to_bins of the modulation
        # a*(1, w_shift) for probe t; spot-check a few cells.
        from sparsefft.core import ProbePair, star

        params = RecoveryParams.derive(256, 1, 4)
        x_time = rng.normal(size=256) + 1j * rng.normal(size=256)
        xhat = freq_signal(x_time, 256, 1)
        mset = acquire_measurements(xhat, params, rng)
        ones = GridIndex.ones(256, 1)
        empty = SparseApprox(256, 1, {})
        for r, t, w in [(0, 0, 0), (1, 2, 1), (2, 1, 3)]:
            a = star(mset.probes[r][t], ProbePair(ones, mset.shifts[w]))
            direct = hash_to_bins(xhat, empty, mset.hashings[r], a)
            assert np.allclose(mset.buckets[r, t, w], direct.reshape(-1), atol=1e-10)


class TestResidualUpdates:
    def _setup(self, rng, n=256, k=5):
        params = RecoveryParams.derive(n, 1, k)
        x = random_sparse_time(n, 1, k, rng)
        xhat = freq_signal(dense_time(x), n, 1)
        mset = acquire_measurements(xhat, params, rng)
        return params, x, xhat, mset

    def test_empty_delta_is_identity(self, rng):
        _, _, _, mset = self._setup(rng)
        before = mset.buckets.copy()
        counter = mset.sample_counter
        update_residual_measurements(mset, SparseApprox(256, 1, {}))
        assert np.array_equal(mset.buckets, before)
        assert mset.sample_counter == counter

    def test_add_then_remove_restores(self, rng):
        _, x, _, mset = self._setup(rng)
        before = mset.buckets.copy()
        counter = mset.sample_counter
        chi = x.largest(3)
        update_residual_measurements(mset, chi)
        update_residual_measurements(mset, -chi)
        scale = max(float(np.abs(before).max()), 1.0)
        assert np.max(np.abs(mset.buckets - before)) < 1e-9 * scale
        assert mset.sample_counter == counter

    def test_update_matches_fresh_bucketing(self, rng):
        from sparsefft.core import ProbePair, star

        params, x, xhat, mset = self._setup(rng)
        chi = x.largest(2)
        update_residual_measurements(mset, chi)
        ones = GridIndex.ones(256, 1)
        scale = float(np.abs(mset.buckets).max())
        for r, t, w in [(0, 0, 0), (1, 3, 2)]:
            a = star(mset.probes[r][t], ProbePair(ones, mset.shifts[w]))
            fresh = hash_to_bins(xhat, chi, mset.hashings[r], a)
            assert np.max(np.abs(mset.buckets[r, t, w] - fresh.reshape(-1))) < 1e-6 * max(
                scale, 1.0
            )

    def test_update_consumes_no_samples(self, rng):
        _, x, _, mset = self._setup(rng)
        counter = mset.sample_counter
        update_residual_measurements(mset, x.largest(2))
        assert mset.sample_counter == counter

    def test_grid_mismatch_rejected(self, rng):
        _, _, _, mset = self._setup(rng)
        with pytest.raises(ParameterError):
            update_residual_measurements(mset, SparseApprox(128, 1, {}))


class TestDumpRoundTrip:
    def test_header_and_tables_survive(self, rng, tmp_path):
        params = RecoveryParams.derive(64, 1, 3)
        xhat = freq_signal(rng.normal(size=64), 64, 1)
        mset = acquire_measurements(xhat, params, rng)
        path = str(tmp_path / "buckets.bin")
        save_measurement_set(mset, path)
        header, tables = load_measurement_set(path)
        assert header["n"] == 64
        assert header["B"] == params.B
        assert header["r_max"] == params.r_max
        assert tables.shape == mset.buckets.shape
        scale = max(float(np.abs(mset.buckets).max()), 1.0)
        assert np.max(np.abs(tables - mset.buckets)) < 1e-5 * scale

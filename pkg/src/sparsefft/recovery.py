"""Outer recovery loops: from bucket measurements to a sparse spectrum.

The full pipeline runs three stages. An l1-norm reduction loop shrinks the
residual head mass geometrically while reusing one fixed measurement set, an
optional inf-norm reduction knocks down stray large coefficients with fresh
measurements, and a final constant-SNR pass re-estimates everything once the
residual is flat. `sparse_fft` wires the stages together; each stage is also
callable on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DenseSignal,
    DivergenceError,
    ParameterError,
    RecoveryParams,
    SparseApprox,
    Tunables,
    _loglog2,
)
from .estimation import _estimation_buckets, estimate_values
from .hashing_measurements import (
    MeasurementSet,
    acquire_measurements,
    update_residual_measurements,
)
from .location import locate_signal

__all__ = [
    "RunStats",
    "SnrLoopState",
    "reduce_l1_norm",
    "reduce_inf_norm",
    "recover_at_constant_snr",
    "sparse_fft",
    "sparse_fft_with_stats",
]


@dataclass
class RunStats:
    """Spectrum accesses split by pipeline stage.

    `samples_location` counts the one-off acquisition reads; they do not grow
    with later iterations. The other three grow with their stage's estimation
    calls (which draw fresh hashings and so read the spectrum again).
    """

    samples_location: int = 0
    samples_estimation: int = 0
    samples_infnorm: int = 0
    samples_constsnr: int = 0

    @property
    def total_samples(self) -> int:
        return (
            self.samples_location
            + self.samples_estimation
            + self.samples_infnorm
            + self.samples_constsnr
        )


@dataclass
class SnrLoopState:
    """Mutable state threaded through the outer SNR-reduction loop."""

    chi: SparseApprox
    t: int
    nu: float
    stats: RunStats = field(default_factory=RunStats)


def _log4(N: int) -> float:
    """Fourth power of log2(N); the per-round SNR shrink factor."""
    return math.log2(max(4, N)) ** 4


def _union_locations(mset: MeasurementSet, chi: SparseApprox) -> list:
    """Candidate indices from every hashing, deduped in first-seen order."""
    seen: dict = {}
    for r in range(len(mset.hashings)):
        for f in locate_signal(mset, r, chi).found:
            seen.setdefault(f, None)
    return list(seen)


def _l1_estimate_reps(
    n: int, d: int, k_est: int, epsilon: float, alpha: float, tun: Tunables
) -> int:
    """Median repetitions for one l1-stage estimation call.

    Grows like loglog N + d^2 + log(B/k) so that a union bound over the
    O(k log N) estimates of a full run still leaves every one accurate.
    """
    B_est = _estimation_buckets(n, d, k_est, epsilon, alpha, tun.bucket_scale)
    ratio = max(1.0, B_est / max(1, k_est))
    return max(
        1,
        math.ceil(
            tun.est_reps_coeff * (_loglog2(n**d) + d * d + math.log2(ratio))
        ),
    )


def reduce_l1_norm(
    mset: MeasurementSet,
    chi: SparseApprox,
    params: RecoveryParams,
    nu: float,
    mu: float,
    *,
    rng: np.random.Generator | None = None,
    stats: RunStats | None = None,
) -> SparseApprox:
    """Shrink the residual head l1 mass from nu * k toward mu * k.

    Precondition: mset's buckets already reflect the residual against chi.
    Runs ~log2(log^4 N) inner rounds; each unions location candidates over
    all hashings, estimates the residual there with a geometrically falling
    acceptance threshold, and folds the kept values into both chi and the
    bucket tables. Returns the updated total approximation (chi plus every
    accepted increment); mset is updated in place to match it.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if mset.source is None:
        raise ParameterError("measurement set lost its source spectrum")
    tun = params.tunables
    n, d, N = params.n, params.d, params.N
    mu_eff = max(mu, tun.mu_floor_rel * mset.initial_scale)
    k_est = 4 * params.k
    reps = _l1_estimate_reps(n, d, k_est, 1.0, params.alpha, tun)
    inner = max(1, math.ceil(tun.inner_iters_coeff * _loglog2(N)))

    total = chi
    for t in range(inner):
        head_term = tun.l1_threshold_frac * nu * 0.5**t
        threshold = head_term + tun.head_bias * mu_eff
        locations = _union_locations(mset, total)
        increment = SparseApprox.empty(n, d)
        if locations:
            batch = estimate_values(
                mset.source,
                total,
                locations,
                k_est,
                1.0,
                threshold,
                reps,
                rng=rng,
                alpha=params.alpha,
                tunables=tun,
            )
            mset.sample_counter += batch.samples
            if stats is not None:
                stats.samples_estimation += batch.samples
            increment = batch.kept_sparse()
        if len(increment) > 0:
            update_residual_measurements(mset, increment)
            total = total + increment
        elif head_term <= tun.head_bias * mu_eff:
            # The threshold has bottomed out at the noise floor; later
            # rounds would re-test the same empty candidate set.
            break
    return total


def reduce_inf_norm(
    xhat: DenseSignal,
    chi: SparseApprox,
    k_tilde: int,
    nu: float,
    r_star: float,
    mu: float,
    rng: np.random.Generator,
    *,
    alpha: float = 0.25,
    tunables: Tunables | None = None,
    stats: RunStats | None = None,
) -> SparseApprox:
    """Chase the few coefficients still above the target sup-norm bound.

    Self-contained: draws its own ~log N hashings (more than the l1 loop
    uses, because at most k_tilde survivors must all be caught), then halves
    the threshold for ceil(log2 r_star) rounds. Returns only the increment
    found here, not chi plus the increment.
    """
    tun = tunables or Tunables()
    if k_tilde < 1:
        raise ParameterError(f"need k_tilde >= 1, got {k_tilde}")
    n, d = xhat.n, xhat.d
    N = n**d
    r_max = max(3, math.ceil(tun.inf_hashings_coeff * math.log2(N) / math.sqrt(alpha)))
    T = max(1, math.ceil(math.log2(max(r_star, 2.0))))
    params = RecoveryParams.derive(
        n,
        d,
        k_tilde,
        epsilon=1.0,
        mu=mu,
        r_star=max(r_star, 2.0),
        alpha=alpha,
        r_max=r_max,
        T=T,
        tunables=tun,
    )
    mset = acquire_measurements(xhat, params, rng)
    if stats is not None:
        stats.samples_infnorm += mset.sample_counter
    update_residual_measurements(mset, chi)
    reps = max(1, math.ceil(tun.inf_est_reps_coeff * math.log2(N)))

    increment = SparseApprox.empty(n, d)
    for t in range(T):
        threshold = tun.inf_threshold_scale * (nu * 2.0 ** (T - (t + 1)) + mu)
        locations = _union_locations(mset, chi + increment)
        if not locations:
            continue
        batch = estimate_values(
            xhat,
            chi + increment,
            locations,
            k_tilde,
            1.0,
            threshold,
            reps,
            rng=rng,
            alpha=alpha,
            tunables=tun,
        )
        if stats is not None:
            stats.samples_infnorm += batch.samples
        kept = batch.kept_sparse()
        if len(kept) > 0:
            update_residual_measurements(mset, kept)
            increment = increment + kept
    return increment


def recover_at_constant_snr(
    xhat: DenseSignal,
    chi: SparseApprox,
    k: int,
    epsilon: float,
    rng: np.random.Generator,
    *,
    alpha: float = 0.25,
    tunables: Tunables | None = None,
    stats: RunStats | None = None,
) -> SparseApprox:
    """One locate-and-estimate sweep for a residual with O(1) SNR.

    Uses a single hashing with B = Theta(k / (epsilon alpha^d)) buckets, so
    the tail noise per bucket is already at the target accuracy; a median
    over O(log N) estimation repetitions then suffices. Keeps the largest
    4k estimates above a scale-relative zero floor and returns them as an
    increment over chi.
    """
    tun = tunables or Tunables()
    if k < 1:
        raise ParameterError(f"need k >= 1, got {k}")
    n, d = xhat.n, xhat.d
    N = n**d
    B = RecoveryParams.bucket_count(n, d, k, alpha, tun.bucket_scale / epsilon)
    params = RecoveryParams.derive(
        n,
        d,
        k,
        epsilon=epsilon,
        alpha=alpha,
        B=B,
        r_max=1,
        T=1,
        tunables=tun,
    )
    mset = acquire_measurements(xhat, params, rng)
    if stats is not None:
        stats.samples_constsnr += mset.sample_counter
    floor = tun.zero_floor_rel * mset.initial_scale
    update_residual_measurements(mset, chi)
    locations = locate_signal(mset, 0, chi).found
    if not locations:
        return SparseApprox.empty(n, d)
    reps = max(1, math.ceil(tun.inf_est_reps_coeff * math.log2(N)))
    batch = estimate_values(
        xhat,
        chi,
        locations,
        k,
        epsilon,
        floor,
        reps,
        rng=rng,
        alpha=alpha,
        tunables=tun,
    )
    if stats is not None:
        stats.samples_constsnr += batch.samples
    return batch.kept_sparse().largest(tun.snr_keep_factor * k)


def sparse_fft_with_stats(
    xhat: DenseSignal,
    k: int,
    epsilon: float = 0.1,
    r_star: float = 2.0,
    mu: float = 0.0,
    seed: int = 0,
    *,
    alpha: float = 0.25,
    tunables: Tunables | None = None,
    params: RecoveryParams | None = None,
) -> tuple[SparseApprox, RunStats]:
    """Full recovery pipeline, returning the approximation and a sample ledger.

    mu is the caller's noise floor (mu = 0 means exactly sparse) and r_star
    bounds the initial SNR; together they set the outer round count and the
    per-round thresholds. The returned stats split spectrum reads by stage,
    with acquisition (`samples_location`) fixed after startup. Passing
    params overrides the derived geometry (bucket counts, repetitions); its
    grid must match xhat.
    """
    if xhat.domain != "frequency":
        raise ParameterError("recovery expects a frequency-domain signal")
    n, d = xhat.n, xhat.d
    N = n**d
    if params is None:
        params = RecoveryParams.derive(
            n,
            d,
            k,
            epsilon=epsilon,
            mu=mu,
            r_star=r_star,
            seed=seed,
            alpha=alpha,
            tunables=tunables,
        )
    elif params.n != n or params.d != d:
        raise ParameterError("params grid does not match the signal grid")
    tun = params.tunables
    alpha = params.alpha
    rng = np.random.default_rng(seed)
    stats = RunStats()
    mset = acquire_measurements(xhat, params, rng)
    stats.samples_location = mset.sample_counter
    mu_eff = max(mu, tun.mu_floor_rel * mset.initial_scale)
    L4 = _log4(N)
    k_tilde = max(1, math.ceil(tun.snr_keep_factor * k / L4))

    state = SnrLoopState(chi=SparseApprox.empty(n, d), t=0, nu=0.0, stats=stats)
    norm_baseline = 0.0
    for t in range(params.T):
        state.t = t
        state.nu = 4.0 * mu_eff * L4 ** (params.T - t)
        state.chi = reduce_l1_norm(
            mset, state.chi, params, state.nu, mu_eff, rng=rng, stats=stats
        )
        nu_prime = L4 * (4.0 * mu_eff * L4 ** (params.T - (t + 1)) + 20.0 * mu_eff)
        if nu_prime > 0.0:
            r_star_inf = max(2.0, state.nu / nu_prime)
            increment = reduce_inf_norm(
                xhat,
                state.chi,
                k_tilde,
                nu_prime,
                r_star_inf,
                nu_prime,
                rng,
                alpha=alpha,
                tunables=tun,
                stats=stats,
            )
            if len(increment) > 0:
                update_residual_measurements(mset, increment)
                state.chi = state.chi + increment
        norm_now = state.chi.norm1()
        if norm_baseline == 0.0:
            norm_baseline = norm_now
        elif norm_now > tun.divergence_factor * norm_baseline:
            raise DivergenceError(
                f"approximation l1 mass grew from {norm_baseline:.3g} to "
                f"{norm_now:.3g} after round {t}; the residual is not shrinking"
            )

    final = recover_at_constant_snr(
        xhat,
        state.chi,
        2 * k,
        epsilon,
        rng,
        alpha=alpha,
        tunables=tun,
        stats=stats,
    )
    result = (state.chi + final).drop_below(tun.zero_floor_rel * mset.initial_scale)
    return result, stats


def sparse_fft(
    xhat: DenseSignal,
    k: int,
    epsilon: float = 0.1,
    r_star: float = 2.0,
    mu: float = 0.0,
    seed: int = 0,
    *,
    alpha: float = 0.25,
    tunables: Tunables | None = None,
    params: RecoveryParams | None = None,
) -> SparseApprox:
    """Recover a k-sparse approximation of the spectrum's inverse transform.

    Reads only O(k log N) positions of xhat (see `sparse_fft_with_stats` for
    the exact ledger). The output lives on the time side: it approximates the
    signal x whose transform is xhat, keeping the head coefficients and
    discarding everything at the mu noise floor.
    """
    result, _ = sparse_fft_with_stats(
        xhat,
        k,
        epsilon,
        r_star,
        mu,
        seed,
        alpha=alpha,
        tunables=tunables,
        params=params,
    )
    return result

"""Bucketed measurements of a sparse residual from spectrum samples.

hash_to_bins reduces the grid to B buckets: weight the sampled spectrum by
the bucket filter on its compact support, fold onto the [b]^d ring, and take
one B-point inverse FFT. Bucket h(i) then holds
sum_j G_{o_i(j)} (x - chi)_j omega^(a . Sigma j) up to filter leakage and a
N^{-Omega(c)} subtraction error; the chi term never touches new samples.

acquire_measurements fills the full table the recovery loop consumes: r_max
hashings, c_max probe pairs each (redrawn until digit-balanced), and one
measurement per shift vector in the location ladder. All later subtraction
of recovered mass goes through update_residual_measurements, which adjusts
the stored tables exactly and keeps the sample counter frozen.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .core import (
    DenseSignal,
    GridIndex,
    ParameterError,
    ProbePair,
    RecoveryParams,
    SparseApprox,
    next_power_of_two,
    star,
)
from .dense_dft import fft_axes
from .filters import cached_bucket_filter
from .location import check_balanced
from .permutation import Hashing, SpectrumPermutation, sample_permutation
from .semi_equispaced import shifted_semi_equispaced

__all__ = [
    "MeasurementSet",
    "hash_to_bins",
    "acquire_measurements",
    "update_residual_measurements",
    "save_measurement_set",
    "load_measurement_set",
]

_GATHER_CHUNK = 4_000_000  # complex entries per batched spectrum gather


def _subtraction_precision(N: int) -> int:
    """Exponent c for the chi subtraction; raised on tiny grids so the
    absolute error stays below every downstream tolerance."""
    return max(3, math.ceil(9.0 / math.log10(max(N, 2))))


def _support_grid(hashing: Hashing) -> np.ndarray:
    """All filter-support offsets as one (P, d) signed integer array."""
    supp = hashing.filter.support
    if hashing.d == 1:
        return supp[:, None].copy()
    mesh = np.meshgrid(*([supp] * hashing.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _support_row(hashing: Hashing, grid: np.ndarray) -> np.ndarray:
    """Filter value times the omega^(i . Sigma q) modulation, per offset."""
    n = hashing.n
    sv = hashing.filter.support_values()
    axes = [sv] * hashing.d
    gv = axes[0] if hashing.d == 1 else reduce(np.multiply.outer, axes).ravel()
    sq = (hashing.perm.sigma @ hashing.perm.q.to_array()) % n
    expo = (grid @ sq) % n
    return gv * np.exp(2j * np.pi * expo / n)


def _fold_axis(arr: np.ndarray, axis: int, b: int, first: int) -> np.ndarray:
    """Collapse one support axis onto residues mod b (first = leading offset)."""
    a = np.moveaxis(arr, axis, -1)
    width = a.shape[-1]
    chunks = -(-width // b)
    pad = chunks * b - width
    if pad:
        a = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(0, pad)])
    s = a.reshape(a.shape[:-1] + (chunks, b)).sum(axis=-2)
    s = np.roll(s, first, axis=-1)
    return np.moveaxis(s, -1, axis)


def _fold_and_invert(y: np.ndarray, hashing: Hashing) -> np.ndarray:
    """(M, support-grid) weighted samples -> (M, B) bucket values."""
    d, b = hashing.d, hashing.b
    first = int(hashing.filter.support[0])
    width = len(hashing.filter.support)
    y = y.reshape((y.shape[0],) + (width,) * d)
    for axis in range(1, d + 1):
        y = _fold_axis(y, axis, b, first)
    u = fft_axes(y, tuple(range(1, d + 1)), inverse=True)
    return (u * float(b) ** (d / 2.0)).reshape(y.shape[0], b**d)


def _gather_spectrum(
    xhat: DenseSignal, hashing: Hashing, grid: np.ndarray, mods: np.ndarray
) -> np.ndarray:
    """Spectrum samples x-hat[Sigma^T (i - a)] for every offset i and
    modulation a, gathered in one fancy index per chunk of modulations."""
    n, d = xhat.n, xhat.d
    sigma = hashing.perm.sigma
    base = (grid @ sigma) % n
    shift = (np.asarray(mods, dtype=np.int64) @ sigma) % n
    strides = np.array([n ** (d - 1 - ax) for ax in range(d)], dtype=np.int64)
    xflat = xhat.values.reshape(-1)
    P = base.shape[0]
    out = np.empty((shift.shape[0], P), dtype=np.complex128)
    step = max(1, _GATHER_CHUNK // max(P, 1))
    for lo in range(0, shift.shape[0], step):
        hi = min(lo + step, shift.shape[0])
        flat = np.zeros((hi - lo, P), dtype=np.int64)
        for ax in range(d):
            flat += ((base[None, :, ax] - shift[lo:hi, ax, None]) % n) * strides[ax]
        out[lo:hi] = xflat[flat]
    return out


def _chi_on_support(
    chi: SparseApprox, hashing: Hashing, grid: np.ndarray, a: GridIndex
) -> np.ndarray:
    """chi-hat at Sigma^T (i - a) on the support grid, via the permuted-box
    transform (semi-equispaced; exact dense fallback on coarse grids)."""
    n, d = chi.n, chi.d
    b_eff = next_power_of_two(hashing.F * hashing.b)
    perm_t = SpectrumPermutation(n, hashing.perm.sigma.T % n, a)
    box = shifted_semi_equispaced(
        chi, perm_t, b_eff**d, _subtraction_precision(n**d)
    )
    side = 2 * b_eff
    idx = grid % side
    flat = np.zeros(grid.shape[0], dtype=np.int64)
    for ax in range(d):
        flat = flat * side + idx[:, ax]
    return box.reshape(-1)[flat]


def hash_to_bins(
    xhat: DenseSignal, chi: SparseApprox, hashing: Hashing, a: GridIndex
) -> np.ndarray:
    """One bucketing pass over the residual, returning a (b,)*d array.

    Reads |supp(G-hat)| spectrum samples; the caller accounts for them.
    """
    if xhat.domain != "frequency":
        raise ParameterError("hash_to_bins expects a frequency-domain signal")
    if xhat.n != hashing.n or xhat.d != hashing.d:
        raise ParameterError("hashing grid does not match the signal grid")
    if chi.n != xhat.n or chi.d != xhat.d:
        raise ParameterError("chi does not live on the signal grid")
    if len(chi) > 4 * max(hashing.B, 64):
        warnings.warn(
            f"chi has {len(chi)} entries against B={hashing.B} buckets; "
            "subtraction will dominate the running time",
            RuntimeWarning,
            stacklevel=2,
        )
    grid = _support_grid(hashing)
    row = _support_row(hashing, grid)
    samples = _gather_spectrum(xhat, hashing, grid, a.to_array()[None, :])[0]
    if len(chi):
        samples = samples - _chi_on_support(chi, hashing, grid, a)
    u = _fold_and_invert((samples * row)[None, :], hashing)[0]
    return u.reshape((hashing.b,) * hashing.d)


@dataclass(eq=False)
class MeasurementSet:
    """Every bucket value the recovery loop is allowed to look at.

    buckets[r, t, w] is the [b]^d table (flattened row-major) for hashing r,
    probe pair t, and shift slot w; slot 0 is the unshifted reference. The
    sample counter tracks spectrum reads and is immune to residual updates.
    """

    params: RecoveryParams
    hashings: list[Hashing]
    probes: list[list[ProbePair]]
    shifts: list[GridIndex]
    group_bases: tuple[int, ...]
    buckets: np.ndarray
    sample_counter: int = 0
    # Largest bucket magnitude right after acquisition; relative floors for
    # mu = 0 inputs and zero pruning are anchored to it.
    initial_scale: float = 0.0
    # The spectrum measurements were taken from; estimation stages read it
    # when they draw fresh hashings.
    source: DenseSignal | None = None

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def delta(self) -> int:
        return self.params.delta

    def shift_slot(self, g: int, s: int) -> int:
        """Flat index of the shift for digit group g (1-based) and axis s."""
        return 1 + (g - 1) * self.d + s

    def reference(self, r: int) -> np.ndarray:
        """Unshifted measurements m[r, :, 0] as a (c_max, B) view."""
        return self.buckets[r, :, 0]


def _digit_ladder(n: int, d: int, delta: int) -> tuple[tuple[int, ...], list[GridIndex]]:
    """Shift vectors 0, then n/(Delta^(g-1) * base_g) e_s per digit group.

    The last group uses the leftover base n / Delta^(G-1), which keeps every
    shift integral and covers all log2(n) bits.
    """
    groups = 0
    reach = 1
    while reach < n:
        reach *= delta
        groups += 1
    groups = max(groups, 1)
    bases = []
    shifts = [GridIndex.zero(n, d)]
    for g in range(1, groups + 1):
        base = delta if g < groups else n // delta ** (groups - 1)
        bases.append(base)
        step = n // (delta ** (g - 1) * base)
        for s in range(d):
            shifts.append(GridIndex.unit(n, d, s).scaled(step))
    return tuple(bases), shifts


def _sample_balanced_probes(
    n: int, d: int, c_max: int, delta: int, rng: np.random.Generator
) -> list[ProbePair]:
    """Uniform probe pairs, redrawn until every axis is digit-balanced."""
    for _ in range(1000):
        probes = [
            ProbePair(
                GridIndex.from_array(n, rng.integers(0, n, size=d)),
                GridIndex.from_array(n, rng.integers(0, n, size=d)),
            )
            for _ in range(c_max)
        ]
        if all(check_balanced(probes, s, delta) for s in range(d)):
            return probes
    raise RuntimeError(
        f"no digit-balanced probe set of size {c_max} found for delta={delta}"
    )


def _modulations(
    probes: list[ProbePair], shifts: list[GridIndex], n: int, d: int
) -> np.ndarray:
    """Modulation vectors a*(1, w) for every (probe, shift), probe-major."""
    ones = GridIndex.ones(n, d)
    rows = [
        star(p, ProbePair(ones, w)).to_array() for p in probes for w in shifts
    ]
    return np.stack(rows).astype(np.int64)


def acquire_measurements(
    xhat: DenseSignal, params: RecoveryParams, rng: np.random.Generator
) -> MeasurementSet:
    """Sample hashings and probes, then fill every bucket table from x-hat."""
    if xhat.domain != "frequency":
        raise ParameterError("acquisition expects a frequency-domain signal")
    if xhat.n != params.n or xhat.d != params.d:
        raise ParameterError("parameter grid does not match the signal grid")
    n, d = params.n, params.d
    delta = params.delta
    if delta >= n:
        raise ParameterError(f"digit base {delta} needs a grid side above {delta}")
    bases, shifts = _digit_ladder(n, d, delta)
    filt = cached_bucket_filter(n, d, params.B, params.F)

    hashings = []
    probe_sets = []
    for _ in range(params.r_max):
        hashings.append(
            Hashing(perm=sample_permutation(n, d, rng), B=params.B, F=params.F, filter=filt)
        )
        probe_sets.append(_sample_balanced_probes(n, d, params.c_max, delta, rng))

    S = len(shifts)
    buckets = np.empty((params.r_max, params.c_max, S, params.B), dtype=np.complex128)
    counter = 0
    for r, (hashing, probes) in enumerate(zip(hashings, probe_sets)):
        grid = _support_grid(hashing)
        row = _support_row(hashing, grid)
        mods = _modulations(probes, shifts, n, d)
        samples = _gather_spectrum(xhat, hashing, grid, mods)
        buckets[r] = _fold_and_invert(samples * row, hashing).reshape(
            params.c_max, S, params.B
        )
        counter += mods.shape[0] * filt.support_size
    return MeasurementSet(
        params=params,
        hashings=hashings,
        probes=probe_sets,
        shifts=shifts,
        group_bases=bases,
        buckets=buckets,
        sample_counter=counter,
        initial_scale=float(np.abs(buckets).max()) if buckets.size else 0.0,
        source=xhat,
    )


def update_residual_measurements(
    mset: MeasurementSet, chi_delta: SparseApprox
) -> MeasurementSet:
    """Subtract chi_delta's bucket contributions from every stored table.

    The contribution of entry t to bucket j under (hashing, modulation a) is
    G(pi(t) - (n/b) j) * chi_t * omega^(a . Sigma t); it is computed exactly
    from the filter tables, so no spectrum reads happen and repeated updates
    stay consistent with refreshing from scratch.
    """
    if chi_delta.n != mset.n or chi_delta.d != mset.d:
        raise ParameterError("chi_delta does not live on the measurement grid")
    if len(chi_delta) == 0:
        return mset
    n, d = mset.n, mset.d
    coords = chi_delta.coords_array()
    vals = chi_delta.values_array()
    for r, (hashing, probes) in enumerate(zip(mset.hashings, mset.probes)):
        b = hashing.b
        g_axis = hashing.filter.g_axis
        pi = hashing.perm.forward_array(coords)
        centers = (n // b) * np.arange(b, dtype=np.int64)
        gax = [g_axis[(pi[:, ax, None] - centers[None, :]) % n] for ax in range(d)]
        weights = gax[0]
        for extra in gax[1:]:
            weights = weights[..., :, None] * extra[:, None, ...].reshape(
                (coords.shape[0],) + (1,) * (weights.ndim - 1) + (b,)
            )
        weights = weights.reshape(coords.shape[0], b**d)
        sig_t = (coords @ hashing.perm.sigma.T) % n
        mods = _modulations(probes, mset.shifts, n, d)
        expo = (mods @ sig_t.T) % n
        phases = np.exp(2j * np.pi * expo / n) * vals[None, :]
        increment = phases @ weights
        mset.buckets[r] -= increment.reshape(mset.buckets[r].shape)
    return mset


_DUMP_MAGIC = b"BKTS"
_DUMP_VERSION = 1


def save_measurement_set(mset: MeasurementSet, path: str) -> None:
    """Binary dump: versioned header, then the complex64 bucket tables."""
    p = mset.params
    header = struct.pack(
        "<4sIIIIIIIq",
        _DUMP_MAGIC,
        _DUMP_VERSION,
        p.n,
        p.d,
        p.B,
        p.F,
        p.r_max,
        p.c_max,
        p.seed,
    )
    tables = mset.buckets.astype(np.complex64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", len(mset.shifts)))
        fh.write(struct.pack("<q", mset.sample_counter))
        fh.write(tables.tobytes())


def load_measurement_set(path: str) -> tuple[dict, np.ndarray]:
    """Read a dump back as (header fields, complex64 bucket tables)."""
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIIIIIIq"))
        magic, version, n, d, B, F, r_max, c_max, seed = struct.unpack(
            "<4sIIIIIIIq", head
        )
        if magic != _DUMP_MAGIC:
            raise ParameterError(f"not a measurement dump: magic {magic!r}")
        if version != _DUMP_VERSION:
            raise ParameterError(f"unsupported dump version {version}")
        (n_shifts,) = struct.unpack("<I", fh.read(4))
        (counter,) = struct.unpack("<q", fh.read(8))
        raw = fh.read()
    tables = np.frombuffer(raw, dtype=np.complex64).reshape(
        r_max, c_max, n_shifts, B
    )
    meta = {
        "n": n,
        "d": d,
        "B": B,
        "F": F,
        "r_max": r_max,
        "c_max": c_max,
        "seed": seed,
        "n_shifts": n_shifts,
        "sample_counter": counter,
    }
    return meta, tables

"""Per-bucket recovery of dominant indices, digit by digit.

Each bucket of a hashing concentrates (ideally) one dominant residual
element i0. Writing f = Sigma i0 mod n, the ratio of a shifted measurement
to its unshifted reference is approximately omega^(step * beta_s * f_s), so
each digit of each coordinate of f can be read off by testing which root of
unity makes the ratio land near 1 for most probe pairs. A probe pair votes
for a digit when the corrected ratio sits within 1/3 of 1; a digit needs a
3/5 supermajority, and a bucket that produces zero or several winning
digits is dropped.

Digits run through base Delta groups, with a final group of base
n / Delta^(G-1) so every bit of f is covered. Decoding is deterministic
given the measurement tables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .core import GridIndex, ParameterError, ProbePair, SparseApprox

if TYPE_CHECKING:
    from .hashing_measurements import MeasurementSet

__all__ = ["LocationResult", "locate_signal", "check_balanced"]


def check_balanced(probes: list[ProbePair], s: int, delta: int) -> bool:
    """Whether the probe set spreads digit phases on axis s.

    For every digit r = 1..delta-1, at least 49/100 of the roots
    omega_delta^(r * beta_s) must lie in the closed left half-plane;
    integer form: 4 * (r * beta_s mod delta) in [delta, 3*delta].
    """
    if not probes:
        return False
    betas = [p.beta.coords[s] for p in probes]
    need = 49 * len(betas)
    for digit in range(1, delta):
        hits = sum(
            1 for b_s in betas if delta <= 4 * ((digit * b_s) % delta) <= 3 * delta
        )
        if hits * 100 < need:
            return False
    return True


@dataclass
class LocationResult:
    """Indices recovered from one hashing, plus which buckets gave up."""

    found: list[GridIndex]
    failed: np.ndarray  # (B,) bool; True where no unique digit path survived


def locate_signal(mset: "MeasurementSet", r: int, chi: SparseApprox) -> LocationResult:
    """Decode every bucket of hashing r into a candidate index.

    The bucket tables must already reflect the residual against chi (the
    argument names the subtracted approximation and pins its grid). Output
    order follows bucket order; duplicates across buckets are merged.
    """
    params = mset.params
    tun = params.tunables
    n, d = mset.n, mset.d
    if chi.n != n or chi.d != d:
        raise ParameterError("chi does not live on the measurement grid")
    if not 0 <= r < len(mset.hashings):
        raise ParameterError(f"hashing index {r} out of range")
    hashing = mset.hashings[r]
    probes = mset.probes[r]
    c_max = len(probes)
    B = params.B

    ref = mset.buckets[r, :, 0, :]  # (c_max, B)
    invalid = np.abs(ref) < tun.near_zero
    safe_ref = np.where(invalid, 1.0, ref)

    alive = np.ones(B, dtype=bool)
    fvec = np.zeros((B, d), dtype=np.int64)
    min_votes = tun.vote_fraction * c_max - 1e-9

    for s in range(d):
        betas = np.array([p.beta.coords[s] for p in probes], dtype=np.int64)
        scale = 1
        for g, base in enumerate(mset.group_bases, start=1):
            step = n // (scale * base)
            meas = mset.buckets[r, :, mset.shift_slot(g, s), :]
            xi = meas / safe_ref
            corr_expo = (step * betas[:, None] * fvec[None, :, s]) % n
            corrected = xi * np.exp(-2j * np.pi * corr_expo / n)
            votes = np.empty((base, B), dtype=np.int64)
            for digit in range(base):
                root = np.exp(-2j * np.pi * ((digit * betas) % base) / base)
                eta = root[:, None] * corrected
                ok = (np.abs(eta - 1.0) < tun.ratio_tolerance) & ~invalid
                votes[digit] = ok.sum(axis=0)
            passed = votes >= min_votes
            n_pass = passed.sum(axis=0)
            alive &= n_pass == 1
            chosen = passed.argmax(axis=0)
            fvec[:, s] += scale * np.where(n_pass == 1, chosen, 0)
            scale *= base

    found: dict[GridIndex, None] = {}
    if alive.any():
        idx = (fvec[alive] @ hashing.perm.sigma_inv.T) % n
        for row in idx:
            found.setdefault(GridIndex.from_array(n, row))
    return LocationResult(found=list(found), failed=~alive)

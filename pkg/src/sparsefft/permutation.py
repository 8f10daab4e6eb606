"""Random spectrum permutations and the hashing of frequencies into buckets.

A permutation is a pair (Sigma, q) with Sigma an odd-determinant d x d
integer matrix mod n, acting on indices as pi(i) = Sigma(i - q) mod n. Odd
determinant makes Sigma invertible on the ring, so pi is a bijection.

A hashing combines a permutation with a bucket count B = b^d and a bucket
filter of sharpness F: frequency i lands in bucket h(i), the nearest-bucket
rounding of pi(i) * b/n, and o_i(j) = pi(j) - (n/b) h(i) is the offset of j
relative to i's bucket center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import DenseSignal, GridIndex, ParameterError
from .filters import BucketFilter

__all__ = [
    "SpectrumPermutation",
    "Hashing",
    "sample_permutation",
    "permute_index",
    "apply_P",
    "bucket_of",
    "offset",
    "is_isolated",
]


def _int_det(m: list[list[int]]) -> int:
    """Exact determinant by Laplace expansion (d is tiny)."""
    size = len(m)
    if size == 1:
        return m[0][0]
    total = 0
    for col in range(size):
        minor = [row[:col] + row[col + 1 :] for row in m[1:]]
        term = m[0][col] * _int_det(minor)
        total += term if col % 2 == 0 else -term
    return total


def _adjugate(m: list[list[int]]) -> list[list[int]]:
    """Exact adjugate (transpose of cofactors), so m @ adj = det * I."""
    size = len(m)
    if size == 1:
        return [[1]]
    adj = [[0] * size for _ in range(size)]
    for r in range(size):
        for c in range(size):
            minor = [
                [m[i][j] for j in range(size) if j != c]
                for i in range(size)
                if i != r
            ]
            sign = -1 if (r + c) % 2 else 1
            adj[c][r] = sign * _int_det(minor)
    return adj


@dataclass(frozen=True, eq=False)
class SpectrumPermutation:
    """pi(i) = Sigma(i - q) mod n with Sigma invertible mod n."""

    n: int
    sigma: np.ndarray  # (d, d) int64, entries reduced mod n
    q: GridIndex
    sigma_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=np.int64) % self.n
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ParameterError(f"sigma must be square, got shape {sigma.shape}")
        if self.q.n != self.n or self.q.d != sigma.shape[0]:
            raise ParameterError("shift q does not match the sigma matrix")
        rows = sigma.tolist()
        det = _int_det(rows)
        if det % 2 == 0:
            raise ParameterError("sigma must have odd determinant mod n")
        det_inv = pow(det, -1, self.n)
        adj = _adjugate(rows)
        inv = [[(det_inv * entry) % self.n for entry in row] for row in adj]
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "sigma_inv", np.array(inv, dtype=np.int64))

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def forward(self, i: GridIndex) -> GridIndex:
        """pi(i) = Sigma(i - q) mod n."""
        v = (i - self.q).to_array()
        return GridIndex.from_array(self.n, (self.sigma @ v) % self.n)

    def forward_array(self, coords: np.ndarray) -> np.ndarray:
        """pi over an (m, d) array of indices, returning residues in [0, n)."""
        shifted = (np.asarray(coords, dtype=np.int64) - self.q.to_array()) % self.n
        return (shifted @ self.sigma.T) % self.n

    def inverse_index(self, y: GridIndex) -> GridIndex:
        """pi^{-1}(y) = Sigma^{-1} y + q mod n."""
        v = (self.sigma_inv @ y.to_array()) % self.n
        return GridIndex.from_array(self.n, v) + self.q

    def solve_sigma(self, f: GridIndex) -> GridIndex:
        """The index i with Sigma i = f mod n (no q shift)."""
        return GridIndex.from_array(self.n, (self.sigma_inv @ f.to_array()) % self.n)


def sample_permutation(n: int, d: int, rng: np.random.Generator) -> SpectrumPermutation:
    """Uniform odd-determinant Sigma (by rejection) and uniform shift q."""
    while True:
        sigma = rng.integers(0, n, size=(d, d), dtype=np.int64)
        if _int_det(sigma.tolist()) % 2 == 1:
            break
    q = GridIndex.from_array(n, rng.integers(0, n, size=d, dtype=np.int64))
    return SpectrumPermutation(n=n, sigma=sigma, q=q)


def permute_index(perm: SpectrumPermutation, i: GridIndex) -> GridIndex:
    return perm.forward(i)


def apply_P(perm: SpectrumPermutation, a: GridIndex, xhat: DenseSignal) -> DenseSignal:
    """Permute and modulate a dense spectrum.

    Entry i of the result is xhat[Sigma^T (i - a)] * omega^(i . Sigma q),
    which in time domain shuffles samples to pi(i) and modulates them by
    omega^(a . Sigma i).
    """
    if xhat.domain != "frequency":
        raise ParameterError("apply_P expects a frequency-domain signal")
    n, d = xhat.n, xhat.d
    coords = np.indices((n,) * d).reshape(d, -1).T
    src = ((coords - a.to_array()) @ perm.sigma) % n
    flat_src = np.ravel_multi_index(src.T, (n,) * d)
    sq = (perm.sigma @ perm.q.to_array()) % n
    expo = (coords @ sq) % n
    phase = np.exp(2j * np.pi * expo / n)
    values = xhat.values.reshape(-1)[flat_src] * phase
    return DenseSignal(n=n, d=d, values=values.reshape((n,) * d), domain="frequency")


@dataclass(frozen=True, eq=False)
class Hashing:
    """A permutation plus bucket geometry: H = (pi, B, F) with its filter."""

    perm: SpectrumPermutation
    B: int
    F: int
    filter: BucketFilter

    def __post_init__(self) -> None:
        if self.filter.B != self.B or self.filter.F != self.F:
            raise ParameterError("filter does not match the hashing's (B, F)")
        if self.filter.n != self.perm.n or self.filter.d != self.perm.d:
            raise ParameterError("filter grid does not match the permutation grid")

    @property
    def n(self) -> int:
        return self.perm.n

    @property
    def d(self) -> int:
        return self.perm.d

    @property
    def b(self) -> int:
        return self.filter.b

    def bucket_of_array(self, coords: np.ndarray) -> np.ndarray:
        """Nearest-bucket rounding of pi(i) * b/n, componentwise mod b."""
        pi = self.perm.forward_array(coords)
        return ((2 * pi * self.b + self.n) // (2 * self.n)) % self.b

    def center_of_array(self, coords: np.ndarray) -> np.ndarray:
        """(n/b) * h(i): the frequency each index's bucket is centered on."""
        return (self.n // self.b) * self.bucket_of_array(coords)


def bucket_of(hashing: Hashing, i: GridIndex) -> GridIndex:
    h = hashing.bucket_of_array(i.to_array()[None, :])[0]
    return GridIndex.from_array(hashing.b, h)


def offset(hashing: Hashing, i: GridIndex, j: GridIndex) -> GridIndex:
    """o_i(j) = pi(j) - (n/b) h(i) mod n."""
    pi_j = hashing.perm.forward_array(j.to_array()[None, :])[0]
    center = hashing.center_of_array(i.to_array()[None, :])[0]
    return GridIndex.from_array(hashing.n, (pi_j - center) % hashing.n)


def is_isolated(
    i: GridIndex,
    S: Iterable[GridIndex],
    hashing: Hashing,
    scale: int | None = None,
    alpha: float = 0.25,
) -> bool:
    """Whether i's bucket neighborhood is sparse enough in pi(S - {i}).

    At scale t, at most (2 pi)^(-dF) * alpha^(d/2) * 2^((t+1)d) * 2^t elements
    of pi(S - {i}) may fall in the ell_inf ball of radius (n/b) 2^t around
    i's bucket center. scale=None checks every scale.
    """
    n, d, b = hashing.n, hashing.d, hashing.b
    others = [j for j in S if j != i]
    if not others:
        return True
    coords = np.stack([j.to_array() for j in others])
    pi = hashing.perm.forward_array(coords)
    center = hashing.center_of_array(i.to_array()[None, :])[0]
    delta = (pi - center) % n
    dist = np.minimum(delta, n - delta).max(axis=1)

    def ok(t: int) -> bool:
        radius = (n // b) << t
        count = int((dist <= radius).sum())
        threshold = (2 * np.pi) ** (-d * hashing.F) * alpha ** (d / 2) * 2.0 ** ((t + 1) * d + t)
        return count <= threshold

    if scale is not None:
        return ok(scale)
    t = 0
    while True:
        if not ok(t):
            return False
        radius = (n // b) << t
        threshold = (2 * np.pi) ** (-d * hashing.F) * alpha ** (d / 2) * 2.0 ** ((t + 1) * d + t)
        if radius >= n // 2 and threshold >= len(others):
            return True
        t += 1

"""Orthonormal d-dimensional radix-2 FFT, the ground truth for every other module.

Row-column decomposition: one iterative radix-2 pass per axis, vectorized over
the remaining axes, with a single 1/sqrt(N) normalization. The forward kernel
is exp(-2*pi*i * <i,j>/n); the inverse flips the sign.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import DenseSignal, ParameterError, is_power_of_two

__all__ = ["fft_grid", "fft_axes", "forward_dft", "inverse_dft"]


@lru_cache(maxsize=32)
def _bit_reversal(m: int) -> np.ndarray:
    bits = m.bit_length() - 1
    rev = np.zeros(m, dtype=np.int64)
    for i in range(m):
        r = 0
        v = i
        for _ in range(bits):
            r = (r << 1) | (v & 1)
            v >>= 1
        rev[i] = r
    return rev


@lru_cache(maxsize=64)
def _twiddles(half: int, sign: int) -> np.ndarray:
    return np.exp(sign * 2j * np.pi * np.arange(half) / (2 * half))


def _fft_axis(values: np.ndarray, axis: int, sign: int) -> np.ndarray:
    """Unnormalized radix-2 transform along one axis; sign -1 forward, +1 inverse."""
    a = np.moveaxis(values, axis, -1)
    m = a.shape[-1]
    if m == 1:
        return values.copy()
    a = np.ascontiguousarray(a[..., _bit_reversal(m)])
    L = 2
    while L <= m:
        half = L // 2
        tw = _twiddles(half, sign)
        v = a.reshape(-1, m // L, L)
        f = v[:, :, :half]
        t = v[:, :, half:] * tw
        v[:, :, half:] = f - t
        v[:, :, :half] += t
        L *= 2
    return np.moveaxis(a, -1, axis)


def fft_grid(values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Orthonormal transform of a (n,)*d complex array along every axis."""
    arr = np.asarray(values, dtype=np.complex128)
    for axis, m in enumerate(arr.shape):
        if not is_power_of_two(m):
            raise ParameterError(f"axis {axis} has non power-of-two length {m}")
    sign = 1 if inverse else -1
    for axis in range(arr.ndim):
        arr = _fft_axis(arr, axis, sign)
    return arr / np.sqrt(float(arr.size))


def fft_axes(values: np.ndarray, axes: tuple[int, ...], inverse: bool = False) -> np.ndarray:
    """Orthonormal transform along the listed axes, batched over the rest."""
    arr = np.asarray(values, dtype=np.complex128)
    sign = 1 if inverse else -1
    size = 1
    for axis in axes:
        m = arr.shape[axis]
        if not is_power_of_two(m):
            raise ParameterError(f"axis {axis} has non power-of-two length {m}")
        size *= m
        arr = _fft_axis(arr, axis, sign)
    return arr / np.sqrt(float(size))


def forward_dft(x: DenseSignal) -> DenseSignal:
    """Time domain to frequency domain, 1/sqrt(N) normalization."""
    if x.domain != "time":
        raise ParameterError(f"forward transform expects a time signal, got {x.domain!r}")
    return DenseSignal(x.n, x.d, fft_grid(x.values, inverse=False), "frequency")


def inverse_dft(xhat: DenseSignal) -> DenseSignal:
    """Frequency domain back to time domain; exact inverse of forward_dft."""
    if xhat.domain != "frequency":
        raise ParameterError(
            f"inverse transform expects a frequency signal, got {xhat.domain!r}"
        )
    return DenseSignal(xhat.n, xhat.d, fft_grid(xhat.values, inverse=True), "time")

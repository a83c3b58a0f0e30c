"""Measurement model: exit waves and oversampled Fourier magnitudes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Canvas, GridGeometry, restrict
from .scan import ScanPattern

DEFAULT_OS = 2


@dataclass
class DiffractionSet:
    """Fourier magnitudes ``b^t`` of every exit wave, shape (T, os*m, os*m).

    Row ``i`` of ``magnitudes`` belongs to ``pattern.shifts[i]``.
    """

    magnitudes: np.ndarray
    os: int
    pattern: ScanPattern

    def __post_init__(self):
        b = np.asarray(self.magnitudes, dtype=float)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"magnitudes must be (T, M, M), got {b.shape}")
        if len(b) != len(self.pattern):
            raise ValueError(f"{len(b)} patterns for {len(self.pattern)} shifts")
        if not np.all(np.isfinite(b)) or np.any(b < 0):
            raise ValueError("magnitudes must be finite and nonnegative")
        if b.shape[1] % self.os:
            raise ValueError(f"pattern size {b.shape[1]} not a multiple of os={self.os}")
        self.magnitudes = b

    @property
    def m(self) -> int:
        return self.magnitudes.shape[1] // self.os

    def __len__(self):
        return len(self.magnitudes)


def exit_wave(f: np.ndarray, probe: np.ndarray, geom: GridGeometry, t) -> np.ndarray:
    probe = np.asarray(probe)
    if probe.shape != (geom.m, geom.m):
        raise ValueError(f"probe must be {geom.m}x{geom.m}, got {probe.shape}")
    return probe * restrict(f, geom, t)


def dft_magnitude(psi: np.ndarray, os: int = DEFAULT_OS) -> np.ndarray:
    """Modulus of the unnormalized DFT of ``psi`` zero-padded by ``os``.

    Works on a single m x m array or a stack (..., m, m).
    """
    psi = np.asarray(psi)
    size = (os * psi.shape[-2], os * psi.shape[-1])
    return np.abs(np.fft.fft2(psi, s=size))


def dft_magnitude_oracle(psi: np.ndarray, os: int = DEFAULT_OS) -> np.ndarray:
    """Direct O(M^4) summation of the padded DFT modulus (test oracle)."""
    psi = np.asarray(psi, dtype=complex)
    r, c = psi.shape
    M1, M2 = os * r, os * c
    u = np.arange(M1)[:, None, None, None]
    v = np.arange(M2)[None, :, None, None]
    j = np.arange(r)[None, None, :, None]
    k = np.arange(c)[None, None, None, :]
    # exponent reduced mod M before scaling keeps the phases exact
    phase = ((u * j) % M1) / M1 + ((v * k) % M2) / M2
    kernel = np.exp(-2j * np.pi * phase)
    return np.abs((kernel * psi).sum(axis=(2, 3)))


def exit_waves(f: np.ndarray, probe: np.ndarray, geom: GridGeometry, pattern: ScanPattern) -> np.ndarray:
    """All exit waves of a scan, shape (T, m, m)."""
    canvas = Canvas(geom, pattern.shifts)
    return np.asarray(probe)[None] * canvas.gather(canvas.embed(f))


def measure(
    f: np.ndarray, probe: np.ndarray, geom: GridGeometry, pattern: ScanPattern, os: int = DEFAULT_OS
) -> DiffractionSet:
    f = np.asarray(f)
    if f.shape != (geom.n, geom.n):
        raise ValueError(f"object must be {geom.n}x{geom.n}, got {f.shape}")
    if np.shape(probe) != (geom.m, geom.m):
        raise ValueError(f"probe must be {geom.m}x{geom.m}, got {np.shape(probe)}")
    if pattern.n != geom.n:
        raise ValueError(f"pattern built for n={pattern.n}, geometry has n={geom.n}")
    return DiffractionSet(dft_magnitude(exit_waves(f, probe, geom, pattern), os), os, pattern)

"""Synthetic objects and probes for simulations."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

OBJECTS = ("constant", "ramp", "random_complex", "cib_like")


def _smooth_field(n: int, rng: np.random.Generator, sigma: float, lo: float) -> np.ndarray:
    x = gaussian_filter(rng.standard_normal((n, n)), sigma=sigma, mode="wrap")
    x -= x.min()
    x /= x.max() or 1.0
    return lo + (1 - lo) * x


def make_object(kind: str, n: int, seed: int = 0) -> np.ndarray:
    """n x n complex test object; every kind is nonvanishing."""
    rng = np.random.default_rng(seed)
    if kind == "constant":
        return np.ones((n, n), dtype=complex)
    if kind == "ramp":
        rows, cols = np.indices((n, n))
        return 1.0 + cols / n + 1j * rows / n
    if kind == "random_complex":
        amp = rng.uniform(0.5, 1.5, size=(n, n))
        return amp * np.exp(2j * np.pi * rng.uniform(size=(n, n)))
    if kind == "cib_like":
        # two independent smooth fields as real and imaginary parts
        sigma = max(n / 32, 1.0)
        return _smooth_field(n, rng, sigma, 0.1) + 1j * _smooth_field(n, rng, sigma, 0.1)
    raise ValueError(f"unknown object kind {kind!r}; choose from {OBJECTS}")


def random_phase_probe(m: int, seed: int = 0) -> np.ndarray:
    """exp(i phi) with phi i.i.d. uniform on [0, 2 pi)."""
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.uniform(size=(m, m)))

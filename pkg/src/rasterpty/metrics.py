"""Error metrics that discount the inherent ambiguities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .forward import DiffractionSet, dft_magnitude, exit_waves
from .grid import GridGeometry
from .scan import ScanPattern


@dataclass(frozen=True)
class REResult:
    value: float
    alpha: complex
    slope: Tuple[float, float]
    window: Optional[int]


def _ramp(shape, slope, period):
    rows, cols = np.indices(shape)
    return np.exp(-2j * np.pi * (cols * slope[0] + rows * slope[1]) / period)


def _fit_at(truth, est, slope, period, norm_truth):
    mod = _ramp(truth.shape, slope, period) * est
    denom = np.vdot(mod, mod).real
    if denom == 0:
        return 1.0, 0j
    alpha = np.vdot(mod, truth) / denom
    return float(np.linalg.norm(truth - alpha * mod) / norm_truth), complex(alpha)


def relative_error(
    truth: np.ndarray,
    est: np.ndarray,
    window: Optional[int] = None,
    period: Optional[int] = None,
    refine: bool = False,
) -> REResult:
    """min over alpha and slope r of ||truth - alpha e^{-2 pi i n.r/N} est|| / ||truth||.

    Integer slopes with |r_i| <= ``window`` are scanned (all of them when
    ``window`` is None); ``period`` N defaults to the side of ``truth``.
    With ``refine`` the best integer slope is polished continuously.
    """
    truth = np.asarray(truth, dtype=complex)
    est = np.asarray(est, dtype=complex)
    if truth.shape != est.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {est.shape}")
    norm_truth = np.linalg.norm(truth)
    if norm_truth == 0:
        raise ValueError("truth is identically zero")
    N = period or max(truth.shape)
    if N < max(truth.shape):
        raise ValueError("period shorter than the array")

    # correlation with every integer ramp at once
    corr = np.abs(np.fft.ifft2(np.conj(est) * truth, s=(N, N))) * N * N
    r = np.arange(N)
    r = np.where(r > N // 2, r - N, r)  # signed slope of each FFT bin
    r1, r2 = np.meshgrid(r, r, indexing="xy")  # corr[row=r2, col=r1]
    allowed = np.ones_like(corr, dtype=bool)
    if window is not None:
        allowed = (np.abs(r1) <= window) & (np.abs(r2) <= window)
    score = np.where(allowed, corr, -np.inf)
    top = score.max()
    cand = np.argwhere(score >= top * (1 - 1e-9) - 1e-300)
    best = None
    for row, col in sorted(cand, key=lambda rc: (r1[tuple(rc)], r2[tuple(rc)])):
        s = (float(r1[row, col]), float(r2[row, col]))
        val, alpha = _fit_at(truth, est, s, N, norm_truth)
        if best is None or val < best[0]:
            best = (val, alpha, s)

    if refine:
        res = minimize(
            lambda s: _fit_at(truth, est, s, N, norm_truth)[0],
            np.array(best[2]),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 400},
        )
        if res.fun < best[0]:
            val, alpha = _fit_at(truth, est, tuple(res.x), N, norm_truth)
            best = (val, alpha, (float(res.x[0]), float(res.x[1])))
    return REResult(best[0], best[1], best[2], window)


def probe_relative_error(
    truth: np.ndarray,
    est: np.ndarray,
    window: Optional[int] = None,
    period: Optional[int] = None,
    refine: bool = False,
) -> REResult:
    """Probe error with slopes on the object lattice.

    ``period`` should be the object side n so that probe and object
    slopes are comparable; a probe carrying the conjugate ramp of the
    object then reports ``slope`` equal to minus the object's.
    """
    return relative_error(truth, est, window=window, period=period, refine=refine)


def data_residual(
    data: DiffractionSet,
    f_est: np.ndarray,
    probe_est: np.ndarray,
    geom: GridGeometry,
    pattern: Optional[ScanPattern] = None,
    os: Optional[int] = None,
) -> float:
    """||(|F(probe, f)| - b)|| / ||b|| over all shifts."""
    pattern = pattern or data.pattern
    os = os or data.os
    b = data.magnitudes
    model = dft_magnitude(exit_waves(f_est, probe_est, geom, pattern), os)
    if model.shape != b.shape:
        raise ValueError(f"model {model.shape} does not match data {b.shape}")
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(model - b) / (nb if nb > 0 else 1.0))

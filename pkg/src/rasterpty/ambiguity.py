"""Constructors and detectors for the ambiguities of blind ptychography.

Constructors return ``(g, nu)``: an object and probe estimate producing
the same diffraction data as ``(f, mu)``.  Phases are applied to the
probe on its own m x m domain and to the object on the n x n domain.
Block indices follow the array convention of :mod:`rasterpty.grid`:
block (k, l) is the k-th along columns and the l-th along rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .forward import dft_magnitude, exit_waves
from .grid import BlockPartition, GridGeometry, partition, reassemble
from .scan import ScanPattern

TWO_PI = 2 * np.pi


def _wrap(x):
    """Map angles to (-pi, pi]."""
    return -(np.mod(-np.asarray(x) + np.pi, TWO_PI) - np.pi)


@dataclass(frozen=True)
class AmbiguityParams:
    c: float = 1.0
    a: float = 0.0
    b: float = 0.0
    w: Tuple[float, float] = (0.0, 0.0)
    theta00: float = 0.0
    r: Tuple[float, float] = (0.0, 0.0)
    psi: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("scaling c must be positive")


class BlockPhaseViolation(ValueError):
    """Exit waves of a pair are not related by one constant phase per shift."""


# ---------------------------------------------------------------------------
# inherent ambiguities


def scaling_pair(f, mu, c: float):
    if not c > 0:
        raise ValueError(f"scaling factor must be positive, got {c}")
    return c * np.asarray(f, dtype=complex), np.asarray(mu, dtype=complex) / c


def _linear_phase(shape, w):
    rows, cols = np.indices(shape)
    return w[0] * cols + w[1] * rows


def affine_phase_pair(f, mu, a: float, b: float, w):
    """nu = mu exp(-ia - i w.n),  g = f exp(ib + i w.n)."""
    f = np.asarray(f, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    g = f * np.exp(1j * (b + _linear_phase(f.shape, w)))
    nu = mu * np.exp(-1j * (a + _linear_phase(mu.shape, w)))
    return g, nu


# ---------------------------------------------------------------------------
# raster ambiguities


def _raster_checks(pattern: ScanPattern, r) -> np.ndarray:
    if pattern.kind != "raster":
        raise ValueError(f"raster pattern required, got {pattern.kind}")
    r = np.asarray(r, dtype=float)
    steps = r * pattern.q / TWO_PI
    if np.any(np.abs(steps - np.round(steps)) > 1e-9):
        raise ValueError(f"block-phase slope {tuple(r)} is not a multiple of 2pi/q (q={pattern.q})")
    return r


def _object_tiles(f, tau, theta00, r, psi_phase):
    """g_kl = e^{i theta00} e^{i r.(k,l)} e^{-i psi} f_kl on the tau x tau tiles."""
    n = f.shape[0]
    tiles = BlockPartition.under_shift(n, n // tau)
    blocks = partition(f, tiles)
    out = {}
    for (k, l), blk in blocks.items():
        out[(k, l)] = np.exp(1j * (theta00 + r[0] * k + r[1] * l)) * psi_phase * blk
    return reassemble(out, tiles)


def progression_pair(f, mu, pattern: ScanPattern, theta00: float, r):
    """Arithmetically progressing block phases, without the periodic part."""
    mu = np.asarray(mu)
    tau = pattern.tau
    m = mu.shape[0]
    if 2 * tau > m or m % tau:
        raise ValueError(f"progression pair needs tau <= m/2 with tau | m (tau={tau}, m={m})")
    return pathology_pair(f, mu, pattern, np.zeros((tau, tau)), theta00, r)


def pathology_pair(f, mu, pattern: ScanPattern, psi, theta00: float = 0.0, r=(0.0, 0.0)):
    """tau-periodic raster grid pathology on top of the block-phase progression.

    Over-shifted rasters (m/2 < tau < m) are handed to
    :func:`pathology_pair_overshift`.  ``psi`` may be complex; its
    imaginary part then changes amplitudes as well as phases.
    """
    f = np.asarray(f, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    tau, m = pattern.tau, mu.shape[0]
    r = _raster_checks(pattern, r)
    psi = np.asarray(psi)
    if psi.shape != (tau, tau):
        raise ValueError(f"psi must be {tau}x{tau}, got {psi.shape}")
    if f.shape != (pattern.n, pattern.n) or mu.shape != (m, m):
        raise ValueError("object/probe sizes do not match the pattern")
    if tau >= m:
        raise ValueError(f"no overlap: tau={tau} >= m={m}")
    if 2 * tau > m:
        return pathology_pair_overshift(f, mu, pattern, psi, theta00, r)
    if m % tau:
        raise ValueError(f"under-shift pathology needs tau | m (tau={tau}, m={m})")

    p = m // tau
    part = BlockPartition.under_shift(m, p)
    nu = {}
    for (k, l), blk in partition(mu, part).items():
        nu[(k, l)] = np.exp(-1j * (r[0] * k + r[1] * l)) * np.exp(1j * psi) * blk
    g = _object_tiles(f, tau, theta00, r, np.exp(-1j * psi))
    return g, reassemble(nu, part)


def pathology_pair_overshift(f, mu, pattern: ScanPattern, psi, theta00: float = 0.0, r=(0.0, 0.0)):
    """Pathology for m/2 < tau < m on the 3 x 3 unequal probe partition."""
    f = np.asarray(f, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    tau, m = pattern.tau, mu.shape[0]
    if not (m < 2 * tau < 2 * m):
        raise ValueError(f"over-shift case needs m/2 < tau < m (tau={tau}, m={m})")
    r = _raster_checks(pattern, r)
    psi = np.asarray(psi)
    if psi.shape != (tau, tau):
        raise ValueError(f"psi must be {tau}x{tau}, got {psi.shape}")

    part = BlockPartition.over_shift(m, tau)
    # psi_ij: sub-blocks of psi cut like the upper-left 2 x 2 probe blocks
    psi_part = {}
    cuts = (0, m - tau, tau)
    for i in range(2):
        for j in range(2):
            psi_part[(i, j)] = psi[cuts[j]:cuts[j + 1], cuts[i]:cuts[i + 1]]

    e = np.exp
    nu = {}
    for (i, j), blk in partition(mu, part).items():
        if i < 2 and j < 2:
            factor = e(1j * psi_part[(i, j)])
        elif i == 2 and j < 2:
            factor = e(-1j * r[0]) * e(1j * psi_part[(0, j)])
        elif j == 2 and i < 2:
            factor = e(-1j * r[1]) * e(1j * psi_part[(i, 0)])
        else:
            factor = e(-1j * (r[0] + r[1])) * e(1j * psi_part[(0, 0)])
        nu[(i, j)] = factor * blk
    # the upper-left tau x tau parts of all windows tile the object
    g = _object_tiles(f, tau, theta00, r, np.exp(-1j * psi))
    return g, reassemble(nu, part)


# ---------------------------------------------------------------------------
# detection


def verify_same_data(f, mu, g, nu, geom: GridGeometry, pattern: ScanPattern, os: int = 2) -> float:
    """max | |B_g| - |B_f| | / max |B_f| over all shifts and frequencies."""
    bf = dft_magnitude(exit_waves(f, mu, geom, pattern), os)
    bg = dft_magnitude(exit_waves(g, nu, geom, pattern), os)
    return float(np.max(np.abs(bg - bf)) / (bf.max() + 1e-300))


@dataclass
class BlockPhaseProfile:
    """Constant phase per shift relating two exit-wave sets, indexed [k, l]."""

    theta: np.ndarray
    spread: np.ndarray
    pattern: ScanPattern

    @property
    def residual(self) -> float:
        return float(self.spread.max())

    def increments(self, axis: int) -> np.ndarray:
        """theta_{k+1,l} - theta_kl (axis 1) or theta_{k,l+1} - theta_kl (axis 2), wrapped."""
        return _wrap(np.diff(self.theta, axis=axis - 1))

    def second_differences(self, axis: int) -> np.ndarray:
        """2 theta_{k+1} - theta_{k+2} - theta_k along ``axis``, wrapped."""
        th = self.theta if axis == 1 else self.theta.T
        d = 2 * th[1:-1] - th[2:] - th[:-2]
        return _wrap(d if axis == 1 else d.T)


def extract_block_phases(
    f, mu, g, nu, geom: GridGeometry, pattern: ScanPattern, tol_phase: float = 1e-8, floor: float = 1e-12
) -> BlockPhaseProfile:
    psi_f = exit_waves(f, mu, geom, pattern)
    psi_g = exit_waves(g, nu, geom, pattern)
    mag = np.abs(psi_f)
    keep = mag >= floor * mag.max()
    z = psi_g * np.conj(psi_f)
    unit = np.where(keep, z / np.where(np.abs(z) > 0, np.abs(z), 1.0), 0)
    mean = unit.sum(axis=(1, 2))
    theta = np.angle(mean)
    dev = np.abs(np.angle(unit * np.exp(-1j * theta)[:, None, None]))
    spread = np.where(keep & (np.abs(z) > 0), dev, 0).max(axis=(1, 2))
    # pixels where psi_g vanishes but psi_f does not carry no phase at all
    spread = np.where((keep & (np.abs(z) == 0)).any(axis=(1, 2)), np.pi, spread)
    q = pattern.q
    prof = BlockPhaseProfile(_wrap(theta).reshape(q, q), spread.reshape(q, q), pattern)
    if prof.residual > tol_phase:
        k, l = np.unravel_index(np.argmax(prof.spread), (q, q))
        raise BlockPhaseViolation(
            f"exit-wave phase spread {prof.residual:.3g} rad at shift ({k},{l}) exceeds {tol_phase:g}"
        )
    return prof


@dataclass(frozen=True)
class AffineFit:
    theta00: float
    r: Tuple[float, float]
    residual: float


def _circ_fit(theta, coords, r):
    phasor = np.exp(1j * (theta - coords @ r)).sum()
    th0 = float(np.angle(phasor))
    res = float(np.max(np.abs(_wrap(theta - th0 - coords @ r))))
    return th0, res


def fit_affine_profile(profile: BlockPhaseProfile, pattern: ScanPattern, periodic: bool = True) -> AffineFit:
    """Fit theta = theta00 + r.x with x = (k, l) for rasters and x = t_kl otherwise.

    Slopes are searched on their periodic lattice (2pi/q for (k, l),
    2pi/n for shifts); with ``periodic=False`` the best lattice point is
    then refined continuously.
    """
    theta = np.asarray(profile.theta, dtype=float).ravel()
    if pattern.kind == "raster":
        coords = pattern.indices.astype(float)
        period = pattern.q
    else:
        coords = pattern.shifts.astype(float)
        period = pattern.n
    centered = coords - coords.mean(axis=0)
    if len(coords) < 3 or np.linalg.matrix_rank(centered) < 2:
        raise ValueError("degenerate geometry: need three non-collinear scan positions")

    z = np.exp(1j * theta)
    lattice = TWO_PI / period * np.arange(period)
    # |sum z e^{-i x.r}| over the whole slope lattice
    ph = np.exp(-1j * coords[:, 0:1] * lattice[None, :])  # (T, P)
    pl = np.exp(-1j * coords[:, 1:2] * lattice[None, :])
    score = np.abs(np.einsum("t,ti,tj->ij", z, ph, pl))
    i, j = np.unravel_index(np.argmax(score), score.shape)
    r = np.array([lattice[i], lattice[j]])
    th0, res = _circ_fit(theta, coords, r)

    if not periodic:
        def cost(s):
            return float(np.sum(1 - np.cos(theta - _circ_fit(theta, coords, s)[0] - coords @ s)))

        opt = minimize(cost, r, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-18})
        th_opt, res_opt = _circ_fit(theta, coords, opt.x)
        if res_opt < res:
            r, th0, res = opt.x, th_opt, res_opt
    r = _wrap(r)
    return AffineFit(th0, (float(r[0]) + 0.0, float(r[1]) + 0.0), res)


# ---------------------------------------------------------------------------
# log-ratio field


def log_ratio_field(f, g) -> np.ndarray:
    """h = ln g - ln f with the imaginary part in (-pi, pi]."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    if f.shape != g.shape:
        raise ValueError("shape mismatch")
    if np.any(f == 0) or np.any(g == 0):
        raise ValueError("log-ratio undefined: zeros in f or g")
    return np.log(g / f)


@dataclass(frozen=True)
class RampFit:
    h0: complex
    slope: Tuple[float, float]  # radians per pixel along (n1, n2)
    residual: float
    phase_residual: float
    modulus_residual: float


def ramp_fit(h, periodic: bool = True) -> RampFit:
    """Fit Im h by an affine phase mod 2pi and test Re h for constancy."""
    h = np.asarray(h, dtype=complex)
    rows, cols = np.indices(h.shape)
    coords = np.stack([cols.ravel(), rows.ravel()], axis=1).astype(float)
    phase = h.imag.ravel()
    N1, N2 = h.shape[1], h.shape[0]
    spectrum = np.abs(np.fft.fft2(np.exp(1j * h.imag)))  # index [row-freq, col-freq]
    a, b = np.unravel_index(np.argmax(spectrum), spectrum.shape)
    r = np.array([TWO_PI * b / N1, TWO_PI * a / N2])
    th0, res = _circ_fit(phase, coords, r)
    if not periodic:
        def cost(s):
            return float(np.sum(1 - np.cos(phase - _circ_fit(phase, coords, s)[0] - coords @ s)))

        opt = minimize(cost, r, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-18})
        th_opt, res_opt = _circ_fit(phase, coords, opt.x)
        if res_opt < res:
            r, th0, res = opt.x, th_opt, res_opt
    re_mean = float(h.real.mean())
    mod_res = float(np.max(np.abs(h.real - re_mean)))
    r = _wrap(r)
    return RampFit(
        complex(re_mean, th0), (float(r[0]) + 0.0, float(r[1]) + 0.0), max(res, mod_res), res, mod_res
    )

"""Blind reconstruction by alternating minimization with Douglas-Rachford inner loops.

Both subproblems share one data space: the stack of padded Fourier
fields, shape (T, os*m, os*m).  For a fixed probe the object map
``A g = F(pad(probe * g^t))`` has a diagonal normal operator (the
illumination weight), so its pseudoinverse is closed form; the probe map
``B`` for a fixed object is handled the same way.

Non-periodic boundaries reconstruct on the canvas covering every window.
Pixels outside the object domain are unknowns unless boundary
enforcement fixes them to the known exterior value, which turns the
object range into an affine set projected onto in closed form.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .forward import DiffractionSet
from .grid import Canvas, GridGeometry
from .metrics import probe_relative_error, relative_error
from .scan import ScanPattern

log = logging.getLogger(__name__)


@dataclass
class ReconConfig:
    max_epochs: int = 200
    inner_iters: int = 30
    os: int = 2
    tol_data: float = 1e-12
    enforce_boundary: bool = True
    seed: int = 0
    pinv_guard: float = 1e-8
    stagnation_window: int = 5
    stagnation_tol: float = 1e-10
    re_window: Optional[int] = None
    warm_start: str = "ones"

    def __post_init__(self):
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if self.pinv_guard <= 0:
            raise ValueError("pinv_guard must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.warm_start not in ("pinv", "ones"):
            raise ValueError(f"unknown warm_start {self.warm_start!r}")


@dataclass
class EpochRecord:
    epoch: int
    data_residual: float
    re_object: float = float("nan")
    re_probe: float = float("nan")
    wall_ms: float = 0.0


@dataclass
class ReconState:
    f_est: np.ndarray  # n x n object estimate
    probe_est: np.ndarray
    canvas_est: np.ndarray  # object estimate on the full canvas
    u: np.ndarray
    v: np.ndarray
    history: List[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def converged(self) -> bool:
        return self.stop_reason == "tolerance"


# ---------------------------------------------------------------------------
# operators


def _pad(stack: np.ndarray, os: int) -> np.ndarray:
    m = stack.shape[-1]
    return np.fft.fft2(stack, s=(os * m, os * m))


def _unpad(fields: np.ndarray, m: int) -> np.ndarray:
    # adjoint of fft2-with-padding up to the factor M^2, which the
    # diagonal normal operator absorbs
    return np.fft.ifft2(fields)[..., :m, :m]


def canvas_for(geom: GridGeometry, pattern: ScanPattern) -> Canvas:
    return Canvas(geom, pattern.shifts)


def apply_A(probe, g, geom: GridGeometry, pattern: ScanPattern, os: int = 2, canvas: Canvas = None):
    """Fourier fields (with phase) of every exit wave, linear in ``g``.

    ``g`` lives on the scan canvas; under the periodic boundary that is
    just the n x n object.
    """
    canvas = canvas or canvas_for(geom, pattern)
    g = np.asarray(g)
    if g.shape != canvas.shape:
        raise ValueError(f"object estimate must be {canvas.shape}, got {g.shape}")
    return _pad(np.asarray(probe)[None] * canvas.gather(g), os)


def illumination_weight(probe, canvas: Canvas) -> np.ndarray:
    """sum_t |probe^t|^2 on the canvas."""
    w = np.abs(np.asarray(probe)) ** 2
    return canvas.scatter_add(np.broadcast_to(w, canvas.flat.shape))


def apply_A_pinv(
    probe, u, geom: GridGeometry, pattern: ScanPattern, os: int = 2, guard: float = 1e-8,
    canvas: Canvas = None,
):
    """Least-squares object from Fourier fields: (A*A)^{-1} A* u."""
    canvas = canvas or canvas_for(geom, pattern)
    probe = np.asarray(probe)
    weight = illumination_weight(probe, canvas)
    wmax = weight.max()
    if wmax == 0:
        raise ValueError("probe estimate is identically zero")
    back = canvas.scatter_add(np.conj(probe)[None] * _unpad(u, geom.m))
    dim = weight < guard * wmax
    out = back / np.where(dim, 1.0, weight)
    out[dim] = 0.0 if geom.periodic else geom.exterior_value
    return out


def apply_B(g, probe, canvas: Canvas, os: int = 2):
    """Same fields as :func:`apply_A`, viewed as linear in the probe."""
    return _pad(canvas.gather(g) * np.asarray(probe)[None], os)


def apply_B_pinv(g, v, canvas: Canvas, guard: float = 1e-8):
    parts = canvas.gather(g)
    weight = (np.abs(parts) ** 2).sum(axis=0)
    wmax = weight.max()
    if wmax == 0:
        raise ValueError("object estimate is identically zero")
    m = parts.shape[-1]
    back = (np.conj(parts) * _unpad(v, m)).sum(axis=0)
    dim = weight < guard * wmax
    out = back / np.where(dim, 1.0, weight)
    out[dim] = 0.0
    return out


def _sgn(z):
    mag = np.abs(z)
    return np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0)


def objective(y, b) -> float:
    """0.5 * || |y| - b ||^2"""
    return 0.5 * float(np.sum((np.abs(y) - b) ** 2))


def dr_inner(
    b: np.ndarray,
    forward: Callable[[np.ndarray], np.ndarray],
    pinv: Callable[[np.ndarray], np.ndarray],
    u_init: np.ndarray,
    iters: int,
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """Douglas-Rachford iteration u <- u/2 + b sgn((2P - I) u) / 2 with P = A A^+.

    Returns the terminal iterate, the pulled-back estimate ``A^+ u`` and
    the objective at ``P u`` before each step and after the last one.
    """
    u = np.array(u_init, dtype=complex, copy=True)
    if u.shape != b.shape:
        raise ValueError(f"u_init {u.shape} does not match data {b.shape}")
    trace = []
    for _ in range(iters):
        x = pinv(u)
        pu = forward(x)
        trace.append(objective(pu, b))
        u = 0.5 * u + 0.5 * b * _sgn(2 * pu - u)
    x = pinv(u)
    trace.append(objective(forward(x), b))
    return u, x, trace


def init_probe(truth: np.ndarray, seed: int, mode: str = "aligned_random", margin: float = 0.05):
    """Initial probe guess with Re[conj(guess) * truth] > 0 at every pixel.

    ``aligned_random`` rotates every pixel of the true probe by an i.i.d.
    phase uniform on (-pi/2 + margin, pi/2 - margin).
    """
    truth = np.asarray(truth, dtype=complex)
    if mode == "given":
        return truth.copy()
    if mode != "aligned_random":
        raise ValueError(f"unknown init mode {mode!r}")
    rng = np.random.default_rng(seed)
    half = np.pi / 2 - margin
    phi = rng.uniform(-half, half, size=truth.shape)
    out = truth * np.exp(1j * phi)
    zero = truth == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero probe pixels: alignment undefined, using random phase")
        out[zero] = np.exp(2j * np.pi * rng.uniform(size=int(zero.sum())))
    return out


# ---------------------------------------------------------------------------
# alternating minimization


def am_reconstruct(
    data: DiffractionSet,
    geom: GridGeometry,
    probe_init: np.ndarray,
    cfg: ReconConfig = None,
    f_truth: Optional[np.ndarray] = None,
    probe_truth: Optional[np.ndarray] = None,
    callback: Optional[Callable[[EpochRecord], None]] = None,
    f_init: Optional[np.ndarray] = None,
) -> ReconState:
    """Alternate object and probe Douglas-Rachford loops until the data fit.

    ``f_init`` (n x n) replaces the all-ones object that seeds the first
    inner loop; it is ignored by the ``pinv`` warm start.
    """
    cfg = cfg or ReconConfig()
    pattern = data.pattern
    os = data.os
    b = data.magnitudes
    if pattern.n != geom.n or data.m != geom.m:
        raise ValueError("data do not match the geometry")
    probe = np.array(probe_init, dtype=complex)
    if probe.shape != (geom.m, geom.m):
        raise ValueError(f"probe_init must be {geom.m}x{geom.m}")
    if not np.any(probe):
        raise ValueError("probe_init is identically zero")

    canvas = canvas_for(geom, pattern)
    exterior = ~canvas.interior
    enforce = cfg.enforce_boundary and not geom.periodic
    bnorm = np.linalg.norm(b) or 1.0
    guard = cfg.pinv_guard

    def fwd(p, g):
        return _pad(p[None] * canvas.gather(g), os)

    if cfg.warm_start == "ones":
        # all-ones object (known exterior kept) supplies the data phases
        if f_init is not None:
            if np.shape(f_init) != (geom.n, geom.n):
                raise ValueError(f"f_init must be {geom.n}x{geom.n}")
            g = canvas.embed(np.asarray(f_init, dtype=complex))
        else:
            g = np.ones(canvas.shape, dtype=complex)
        if not geom.periodic:
            g[exterior] = geom.exterior_value
        u = b * _sgn(fwd(probe, g))
    else:
        # zero-phase data pushed through the range projection
        g = apply_A_pinv(probe, b.astype(complex), geom, pattern, os, guard, canvas)
        u = fwd(probe, g)
    v = None
    history: List[EpochRecord] = []
    stop = "max_epochs"
    t0 = time.perf_counter()

    if enforce:
        known = np.where(exterior, geom.exterior_value, 0.0).astype(complex)

    for epoch in range(1, cfg.max_epochs + 1):
        p_k = probe
        if enforce:
            # the known exterior makes the object range affine; with a
            # diagonal normal operator its projection stays closed form
            offset = fwd(p_k, known)

            def obj_pinv(y, p_k=p_k, offset=offset):
                x = apply_A_pinv(p_k, y - offset, geom, pattern, os, guard, canvas)
                x[exterior] = geom.exterior_value
                return x
        else:
            def obj_pinv(y, p_k=p_k):
                return apply_A_pinv(p_k, y, geom, pattern, os, guard, canvas)

        u, g, _ = dr_inner(b, lambda x: fwd(p_k, x), obj_pinv, u, cfg.inner_iters)
        if v is None:
            v = u
        g_k = g
        v, probe, _ = dr_inner(
            b,
            lambda x: _pad(canvas.gather(g_k) * x[None], os),
            lambda y: apply_B_pinv(g_k, y, canvas, guard),
            v,
            cfg.inner_iters,
        )
        res = float(np.linalg.norm(np.abs(fwd(probe, g)) - b) / bnorm)
        rec = EpochRecord(epoch, res, wall_ms=(time.perf_counter() - t0) * 1e3)
        if f_truth is not None:
            rec.re_object = relative_error(f_truth, canvas.crop(g), window=cfg.re_window, period=geom.n).value
        if probe_truth is not None:
            rec.re_probe = probe_relative_error(probe_truth, probe, window=cfg.re_window, period=geom.n).value
        history.append(rec)
        if callback is not None:
            callback(rec)
        log.debug("epoch %d residual %.3e RE %.3e", epoch, res, rec.re_object)

        if res < cfg.tol_data:
            stop = "tolerance"
            break
        w = cfg.stagnation_window
        if len(history) > w:
            prev = history[-1 - w].data_residual
            if prev > 0 and abs(prev - res) / prev < cfg.stagnation_tol:
                stop = "stagnation"
                break

    return ReconState(
        f_est=canvas.crop(g), probe_est=probe, canvas_est=g, u=u, v=v, history=history, stop_reason=stop
    )

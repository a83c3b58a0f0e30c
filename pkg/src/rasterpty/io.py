"""Binary file formats for complex images (PTYC) and diffraction data (PTYD).

PTYC: ASCII line ``PTYC rows cols`` then rows*cols (re, im) pairs of
little-endian float64, row-major.

PTYD: ASCII line ``PTYD os m count`` then, per shift, an ASCII line
``k l t1 t2`` followed by (os*m)^2 little-endian float64 magnitudes.
"""

from __future__ import annotations

import numpy as np

from .forward import DiffractionSet
from .scan import ScanPattern, perturbed_full, perturbed_separable, raster

_F8 = np.dtype("<f8")


def _readline(fh) -> str:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise ValueError("truncated header")
    try:
        return line.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise ValueError("header is not ASCII") from exc


def _read_floats(fh, count: int) -> np.ndarray:
    raw = fh.read(count * 8)
    if len(raw) != count * 8:
        raise ValueError(f"expected {count} float64 values, file truncated")
    return np.frombuffer(raw, dtype=_F8).astype(float)


def write_ptyc(path, x: np.ndarray) -> None:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2:
        raise ValueError("PTYC holds 2-D arrays")
    pairs = np.stack([x.real, x.imag], axis=-1).astype(_F8)
    with open(path, "wb") as fh:
        fh.write(f"PTYC {x.shape[0]} {x.shape[1]}\n".encode("ascii"))
        fh.write(pairs.tobytes())


def read_ptyc(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = _readline(fh).split()
        if len(head) != 3 or head[0] != "PTYC":
            raise ValueError(f"not a PTYC file: {path}")
        rows, cols = int(head[1]), int(head[2])
        if rows <= 0 or cols <= 0:
            raise ValueError(f"bad PTYC dimensions {rows}x{cols}")
        v = _read_floats(fh, 2 * rows * cols).reshape(rows, cols, 2)
        if fh.read(1):
            raise ValueError("trailing bytes after PTYC payload")
    out = v[..., 0] + 1j * v[..., 1]
    if not np.all(np.isfinite(out)):
        raise ValueError("PTYC contains non-finite values")
    return out


def write_ptyd(path, data: DiffractionSet) -> None:
    pat = data.pattern
    M = data.magnitudes.shape[1]
    with open(path, "wb") as fh:
        fh.write(f"PTYD {data.os} {data.m} {len(data)}\n".encode("ascii"))
        for (k, l), (t1, t2), b in zip(pat.indices, pat.shifts, data.magnitudes):
            fh.write(f"{k} {l} {t1} {t2}\n".encode("ascii"))
            fh.write(np.ascontiguousarray(b, dtype=_F8).reshape(M * M).tobytes())


def read_ptyd(path, n: int, tau: int, kind: str | None = None) -> DiffractionSet:
    """Read a PTYD file; ``n`` and ``tau`` rebuild the scan from the shift lines."""
    with open(path, "rb") as fh:
        head = _readline(fh).split()
        if len(head) != 4 or head[0] != "PTYD":
            raise ValueError(f"not a PTYD file: {path}")
        try:
            os_, m, count = (int(v) for v in head[1:])
        except ValueError as exc:
            raise ValueError(f"bad PTYD header {head!r}") from exc
        if os_ < 1 or m < 1 or count < 1:
            raise ValueError(f"bad PTYD header {head!r}")
        M = os_ * m
        idx = np.zeros((count, 4), dtype=int)
        mags = np.empty((count, M, M))
        for i in range(count):
            parts = _readline(fh).split()
            if len(parts) != 4:
                raise ValueError(f"bad shift line {parts!r}")
            idx[i] = [int(p) for p in parts]
            mags[i] = _read_floats(fh, M * M).reshape(M, M)
        if fh.read(1):
            raise ValueError("trailing bytes after PTYD payload")
    pattern = _pattern_from_shifts(n, tau, idx, kind)
    order = {tuple(kl): i for i, kl in enumerate(idx[:, :2])}
    perm = [order[tuple(kl)] for kl in pattern.indices]
    return DiffractionSet(mags[perm], os_, pattern)


def _pattern_from_shifts(n: int, tau: int, idx: np.ndarray, kind: str | None) -> ScanPattern:
    q = n // tau
    if len(idx) != q * q:
        raise ValueError(f"{len(idx)} shifts do not form a {q}x{q} scan")
    t = np.zeros((q, q, 2), dtype=int)
    t[idx[:, 0], idx[:, 1]] = idx[:, 2:]
    k, l = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
    d1, d2 = t[..., 0] - tau * k, t[..., 1] - tau * l
    separable = np.all(d1 == d1[:, :1]) and np.all(d2 == d2[:1, :]) and d1[0, 0] == 0 and d2[0, 0] == 0
    if kind == "perturbed_full" or not separable:
        return perturbed_full(n, tau, d1, d2)
    if kind != "perturbed_separable" and not (d1.any() or d2.any()):
        return raster(n, tau)
    return perturbed_separable(n, tau, d1[:, 0], d2[0, :])

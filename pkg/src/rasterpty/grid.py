"""Index geometry of the object and probe domains.

Arrays are stored row-major as ``x[row, col]``.  A pixel ``n = (n1, n2)``
lives at ``x[n2, n1]``: the first component (and the first lattice index
``k`` of a shift) moves along columns, the second along rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

BOUNDARIES = ("periodic", "dark", "bright")


@dataclass(frozen=True)
class GridGeometry:
    """Object side ``n``, probe side ``m`` and the boundary regime.

    ``bright_value`` is the constant assumed outside the object domain
    for the bright-field boundary; it is ignored otherwise.
    """

    n: int
    m: int
    boundary: str = "periodic"
    bright_value: complex = 100.0

    def __post_init__(self):
        if not (0 < self.m <= self.n):
            raise ValueError(f"need 0 < m <= n, got n={self.n}, m={self.m}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.boundary == "bright":
            v = complex(self.bright_value)
            if v == 0 or not np.isfinite(v):
                raise ValueError("bright value must be finite and nonzero")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def exterior_value(self) -> complex:
        """Value materialized at pixels outside the object domain."""
        return complex(self.bright_value) if self.boundary == "bright" else 0.0


@dataclass(frozen=True)
class Window:
    """Pixel coordinates covered by a shifted probe.

    ``cols[j]`` and ``rows[i]`` give the first and second coordinate of
    window pixel ``(i, j)``.  Under the periodic boundary they are reduced
    mod n; otherwise they are left as-is and ``exterior`` flags the
    pixels outside ``[0, n-1]^2``.
    """

    rows: np.ndarray
    cols: np.ndarray
    exterior: np.ndarray

    def coordinates(self) -> np.ndarray:
        """All m*m coordinates as ``(n1, n2)`` pairs, row-major."""
        n2, n1 = np.meshgrid(self.rows, self.cols, indexing="ij")
        return np.stack([n1.ravel(), n2.ravel()], axis=1)


def shifted_window(geom: GridGeometry, t) -> Window:
    t1, t2 = int(t[0]), int(t[1])
    cols = t1 + np.arange(geom.m)
    rows = t2 + np.arange(geom.m)
    if geom.periodic:
        cols %= geom.n
        rows %= geom.n
        exterior = np.zeros((geom.m, geom.m), dtype=bool)
    else:
        out_c = (cols < 0) | (cols >= geom.n)
        out_r = (rows < 0) | (rows >= geom.n)
        exterior = out_r[:, None] | out_c[None, :]
    return Window(rows=rows, cols=cols, exterior=exterior)


def restrict(x: np.ndarray, geom: GridGeometry, t) -> np.ndarray:
    """The m x m part of ``x`` seen by the probe shifted by ``t``."""
    x = np.asarray(x)
    if x.shape != (geom.n, geom.n):
        raise ValueError(f"expected {geom.n}x{geom.n} object, got {x.shape}")
    win = shifted_window(geom, t)
    if geom.periodic:
        return x[np.ix_(win.rows, win.cols)].astype(complex)
    rows = np.clip(win.rows, 0, geom.n - 1)
    cols = np.clip(win.cols, 0, geom.n - 1)
    out = x[np.ix_(rows, cols)].astype(complex)
    out[win.exterior] = geom.exterior_value
    return out


# ---------------------------------------------------------------------------
# block partitions


@dataclass(frozen=True)
class BlockPartition:
    """Split of an m x m probe into blocks.

    ``under_shift`` cuts it into ``p x p`` equal blocks of side m/p.
    ``over_shift`` (m/2 < tau < m) cuts each axis at m - tau and tau,
    giving 3 x 3 blocks with corners (m-tau)^2 and center (2tau-m)^2.
    """

    scheme: str
    m: int
    param: int

    def __post_init__(self):
        if self.scheme == "under_shift":
            p = self.param
            if p < 1 or self.m % p:
                raise ValueError(f"p={p} does not divide m={self.m}")
        elif self.scheme == "over_shift":
            tau = self.param
            if not (self.m < 2 * tau < 2 * self.m):
                raise ValueError(f"over-shift needs m/2 < tau < m, got tau={tau}, m={self.m}")
        else:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def under_shift(cls, m: int, p: int) -> "BlockPartition":
        return cls("under_shift", m, p)

    @classmethod
    def over_shift(cls, m: int, tau: int) -> "BlockPartition":
        return cls("over_shift", m, tau)

    @property
    def cuts(self) -> Tuple[int, ...]:
        """Segment boundaries along either axis, including 0 and m."""
        if self.scheme == "under_shift":
            side = self.m // self.param
            return tuple(range(0, self.m + 1, side))
        tau = self.param
        return (0, self.m - tau, tau, self.m)

    @property
    def nblocks(self) -> int:
        return len(self.cuts) - 1

    def block_slices(self, i: int, j: int) -> Tuple[slice, slice]:
        """Array slices ``(rows, cols)`` of block ``(i, j)``; i runs along columns."""
        c = self.cuts
        return slice(c[j], c[j + 1]), slice(c[i], c[i + 1])

    def block_shape(self, i: int, j: int) -> Tuple[int, int]:
        r, c = self.block_slices(i, j)
        return r.stop - r.start, c.stop - c.start


def partition(x: np.ndarray, part: BlockPartition) -> Dict[Tuple[int, int], np.ndarray]:
    x = np.asarray(x)
    if x.shape != (part.m, part.m):
        raise ValueError(f"partition built for m={part.m}, got array {x.shape}")
    nb = part.nblocks
    return {(i, j): x[part.block_slices(i, j)].copy() for i in range(nb) for j in range(nb)}


def reassemble(blocks: Dict[Tuple[int, int], np.ndarray], part: BlockPartition) -> np.ndarray:
    dtype = np.result_type(*[b.dtype for b in blocks.values()])
    out = np.empty((part.m, part.m), dtype=dtype)
    for (i, j), b in blocks.items():
        out[part.block_slices(i, j)] = b
    return out


# ---------------------------------------------------------------------------
# canvas: the pixel set actually touched by a scan


class Canvas:
    """Pixel grid covering every window of a scan.

    Under the periodic boundary the canvas is the n x n torus.  Otherwise
    it is the bounding box of all windows; the object occupies the block
    at ``origin`` and the remaining pixels are exterior.  Gather/scatter
    index arrays for all shifts are precomputed.
    """

    def __init__(self, geom: GridGeometry, shifts):
        shifts = np.asarray(shifts, dtype=int).reshape(-1, 2)
        self.geom = geom
        self.shifts = shifts
        n, m = geom.n, geom.m
        ar = np.arange(m)
        if geom.periodic:
            self.origin = (0, 0)
            self.shape = (n, n)
            cols = (shifts[:, 0, None] + ar) % n
            rows = (shifts[:, 1, None] + ar) % n
        else:
            lo1 = min(0, int(shifts[:, 0].min()))
            lo2 = min(0, int(shifts[:, 1].min()))
            hi1 = max(n, int(shifts[:, 0].max()) + m)
            hi2 = max(n, int(shifts[:, 1].max()) + m)
            self.origin = (-lo2, -lo1)
            self.shape = (hi2 - lo2, hi1 - lo1)
            cols = shifts[:, 0, None] + ar - lo1
            rows = shifts[:, 1, None] + ar - lo2
        self.rows = rows
        self.cols = cols
        # flat canvas index of every window pixel, shape (T, m, m)
        self.flat = rows[:, :, None] * self.shape[1] + cols[:, None, :]
        self.interior = np.zeros(self.shape, dtype=bool)
        self.interior[self._inner] = True

    @property
    def _inner(self):
        r0, c0 = self.origin
        n = self.geom.n
        return slice(r0, r0 + n), slice(c0, c0 + n)

    def embed(self, f: np.ndarray) -> np.ndarray:
        """Place an n x n object on the canvas, exterior per the boundary rule."""
        out = np.full(self.shape, self.geom.exterior_value, dtype=complex)
        out[self._inner] = f
        return out

    def crop(self, canvas: np.ndarray) -> np.ndarray:
        return np.asarray(canvas)[self._inner].copy()

    def gather(self, canvas: np.ndarray) -> np.ndarray:
        """Stack of all windows, shape (T, m, m)."""
        return np.asarray(canvas).ravel()[self.flat]

    def scatter_add(self, stack: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`gather`: sum window stacks back onto the canvas."""
        size = self.shape[0] * self.shape[1]
        idx = self.flat.ravel()
        stack = np.asarray(stack).ravel()
        if np.iscomplexobj(stack):
            out = np.bincount(idx, weights=stack.real, minlength=size) + 1j * np.bincount(
                idx, weights=stack.imag, minlength=size
            )
        else:
            out = np.bincount(idx, weights=stack, minlength=size)
        return out.reshape(self.shape)

    def coverage(self) -> np.ndarray:
        """Number of windows covering each canvas pixel."""
        return self.scatter_add(np.ones(self.flat.shape)).astype(int)

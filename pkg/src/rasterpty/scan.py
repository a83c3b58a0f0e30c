"""Raster and perturbed-raster scan patterns, and their uniqueness audit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

KINDS = ("raster", "perturbed_separable", "perturbed_full")


@dataclass(frozen=True)
class ScanPattern:
    """Shifts ``t_kl = tau*(k, l) + (delta1, delta2)`` on a q x q lattice.

    ``delta1``/``delta2`` are length-q vectors for the separable kind and
    q x q tables (indexed ``[k, l]``) for the full kind; both are zero for
    a plain raster.
    """

    n: int
    tau: int
    kind: str
    delta1: np.ndarray
    delta2: np.ndarray

    @property
    def q(self) -> int:
        return self.n // self.tau

    @property
    def grid(self) -> np.ndarray:
        """Shifts as an integer array of shape (q, q, 2) indexed [k, l]."""
        q, tau = self.q, self.tau
        k, l = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
        if self.kind == "perturbed_full":
            d1, d2 = self.delta1, self.delta2
        else:
            d1 = np.broadcast_to(self.delta1[:, None], (q, q))
            d2 = np.broadcast_to(self.delta2[None, :], (q, q))
        return np.stack([tau * k + d1, tau * l + d2], axis=-1).astype(int)

    @property
    def shifts(self) -> np.ndarray:
        """Shifts in (k, l) lexicographic order, shape (q*q, 2)."""
        return self.grid.reshape(-1, 2)

    @property
    def indices(self) -> np.ndarray:
        q = self.q
        k, l = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
        return np.stack([k.ravel(), l.ravel()], axis=1)

    def __len__(self) -> int:
        return self.q * self.q

    def __eq__(self, other):
        if not isinstance(other, ScanPattern):
            return NotImplemented
        return (self.n, self.tau, self.q) == (other.n, other.tau, other.q) and np.array_equal(
            self.shifts, other.shifts
        )

    def __hash__(self):
        return hash((self.n, self.tau, self.shifts.tobytes()))


def _check_step(n: int, tau: int) -> int:
    if tau < 1 or n % tau:
        raise ValueError(f"step tau={tau} does not divide n={n}")
    return n // tau


def raster(n: int, tau: int) -> ScanPattern:
    q = _check_step(n, tau)
    z = np.zeros(q, dtype=int)
    return ScanPattern(n, tau, "raster", z, z.copy())


def perturbed_separable(n: int, tau: int, delta1, delta2) -> ScanPattern:
    q = _check_step(n, tau)
    d1 = np.asarray(delta1, dtype=int).reshape(-1)
    d2 = np.asarray(delta2, dtype=int).reshape(-1)
    if d1.shape != (q,) or d2.shape != (q,):
        raise ValueError(f"perturbation vectors must have length q={q}")
    if d1[0] != 0 or d2[0] != 0:
        raise ValueError("first perturbation must be zero (t_00 = 0)")
    return ScanPattern(n, tau, "perturbed_separable", d1, d2)


def perturbed_full(n: int, tau: int, delta1, delta2) -> ScanPattern:
    q = _check_step(n, tau)
    d1 = np.asarray(delta1, dtype=int)
    d2 = np.asarray(delta2, dtype=int)
    if d1.shape != (q, q) or d2.shape != (q, q):
        raise ValueError(f"perturbation tables must be {q}x{q}")
    return ScanPattern(n, tau, "perturbed_full", d1, d2)


def random_perturbation(n: int, tau: int, bound: int, seed: int, full: bool = False) -> ScanPattern:
    """Perturbations i.i.d. uniform on the integers of [-bound, bound]."""
    q = _check_step(n, tau)
    rng = np.random.default_rng(seed)
    if full:
        d = rng.integers(-bound, bound + 1, size=(2, q, q))
        return perturbed_full(n, tau, d[0], d[1])
    d = rng.integers(-bound, bound + 1, size=(2, q))
    d[:, 0] = 0
    return perturbed_separable(n, tau, d[0], d[1])


def second_differences(delta) -> np.ndarray:
    """``a_k = 2 delta_{k+1} - delta_k - delta_{k+2}`` for k = 0..q-3."""
    d = np.asarray(delta, dtype=int).reshape(-1)
    if d.size < 3:
        raise ValueError("need at least three perturbations")
    return 2 * d[1:-1] - d[:-2] - d[2:]


def _gcd(values) -> int:
    vals = [abs(int(v)) for v in values]
    return reduce(math.gcd, vals, 0)


# ---------------------------------------------------------------------------
# audit


@dataclass
class UniquenessReport:
    tau: int
    m: int
    a1: np.ndarray
    a2: np.ndarray
    passes_small1: np.ndarray
    passes_cover2: np.ndarray
    passes_small2: np.ndarray
    gcd1: int
    gcd2: int
    coprime_ok: bool
    overlap_ratio: float
    min_overlap_ratio: float
    gaps_ok: bool
    audited: bool = True
    notes: list = field(default_factory=list)

    @property
    def qualifying(self) -> np.ndarray:
        return np.flatnonzero(self.passes_small1 & self.passes_cover2 & self.passes_small2)

    def lines(self):
        def fmt(v):
            if isinstance(v, np.ndarray):
                return ",".join(str(int(x)) for x in v)
            if isinstance(v, (bool, np.bool_)):
                return "true" if v else "false"
            if isinstance(v, float):
                return f"{v:.6g}"
            return str(v)

        yield f"tau={self.tau}"
        yield f"m={self.m}"
        yield f"audited={fmt(self.audited)}"
        yield f"a1={fmt(self.a1)}"
        yield f"a2={fmt(self.a2)}"
        yield f"passes_small1={fmt(self.passes_small1.astype(int))}"
        yield f"passes_cover2={fmt(self.passes_cover2.astype(int))}"
        yield f"passes_small2={fmt(self.passes_small2.astype(int))}"
        yield f"qualifying={fmt(self.qualifying)}"
        yield f"gcd1={self.gcd1}"
        yield f"gcd2={self.gcd2}"
        yield f"coprime_ok={fmt(self.coprime_ok)}"
        yield f"overlap_ratio={fmt(self.overlap_ratio)}"
        yield f"min_overlap_ratio={fmt(self.min_overlap_ratio)}"
        yield f"gaps_ok={fmt(self.gaps_ok)}"


def _axis_gaps(pattern: ScanPattern) -> np.ndarray:
    """Distances between consecutive windows along both axes (periodic wrap included)."""
    g = pattern.grid
    n = pattern.n
    nxt1 = np.roll(g[..., 0], -1, axis=0)
    nxt1[-1] += n
    nxt2 = np.roll(g[..., 1], -1, axis=1)
    nxt2[:, -1] += n
    return np.concatenate([(nxt1 - g[..., 0]).ravel(), (nxt2 - g[..., 1]).ravel()])


def audit(pattern: ScanPattern, m: int) -> UniquenessReport:
    """Evaluate the perturbation smallness, coverage and co-primality conditions.

    For each triplet index j (0 <= j <= q-3) the three inequalities are
    checked with the max taken over both axes; the gcd is taken over the
    |a| of all indices passing all three.
    """
    tau, q = pattern.tau, pattern.q
    gaps = _axis_gaps(pattern)
    min_overlap = float((m - gaps.max()) / m)
    gaps_ok = bool(gaps.min() > 0 and gaps.max() < m)
    overlap = 1.0 - tau / m

    empty = np.zeros(0, dtype=int)
    if pattern.kind == "perturbed_full" or q < 3:
        note = "full-grid pattern: overlap statistics only" if q >= 3 else "q < 3: no triplets"
        none = np.zeros(0, dtype=bool)
        return UniquenessReport(
            tau, m, empty, empty, none, none, none, 0, 0, False, overlap, min_overlap, gaps_ok,
            audited=False, notes=[note],
        )

    d = np.stack([pattern.delta1, pattern.delta2]).astype(int)  # (2, q)
    a = np.stack([second_differences(d[0]), second_differences(d[1])])  # (2, q-2)
    # consecutive steps including the wrap from k = q-1 back to k = 0
    step = np.concatenate([np.diff(d, axis=1), (d[:, :1] - d[:, -1:])], axis=1)  # (2, q)
    absa = np.abs(a)

    small1 = tau >= (absa + step[:, : q - 2]).max(axis=0)
    cover2 = 2 * tau <= m - (d[:, 2:] - d[:, :-2]).max(axis=0)
    small2 = m - tau >= 1 + (absa + step.max(axis=1, keepdims=True)).max(axis=0)
    notes = []
    if m <= tau:
        small1 = np.zeros(q - 2, dtype=bool)
        cover2 = small1.copy()
        small2 = small1.copy()
        notes.append("no overlap between adjacent windows")

    ok = small1 & cover2 & small2
    g1 = _gcd(a[0][ok])
    g2 = _gcd(a[1][ok])
    return UniquenessReport(
        tau, m, a[0], a[1], small1, cover2, small2, g1, g2,
        bool(g1 == 1 and g2 == 1), overlap, min_overlap, gaps_ok, notes=notes,
    )


def coverage_union(pattern: ScanPattern, m: int, k: int, l: int, axis: int) -> bool:
    """Brute-force check that the triplet relation at (k, l) propagates to all of Z_n^2.

    Builds the validity set of the triplet along ``axis`` (1 or 2) from
    intersections and unions of shifted windows, trims it to the pixels
    where the unit-step relation is defined, translates it by every
    shift and tests whether the union covers the n x n torus.
    """
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    q, n = pattern.q, pattern.n
    if axis == 1 and not (0 <= k <= q - 3 and 0 <= l < q):
        raise ValueError(f"triplet ({k},{l}) along axis 1 out of range for q={q}")
    if axis == 2 and not (0 <= l <= q - 3 and 0 <= k < q):
        raise ValueError(f"triplet ({k},{l}) along axis 2 out of range for q={q}")
    g = pattern.grid
    t0 = g[k, l]
    t1 = g[k + 1, l] if axis == 1 else g[k, l + 1]
    t2 = g[k + 2, l] if axis == 1 else g[k, l + 2]
    d1 = 2 * t1 - t2 - t0
    d2 = t1 - t0
    d3 = t2 - t1

    # all sets live inside M^kl; work in window-relative coordinates u in [0, m)^2
    u1, u2 = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")

    def in_window(s):  # u in M^kl - s  <=>  u + s in [0, m)^2
        return (u1 + s[0] >= 0) & (u1 + s[0] < m) & (u2 + s[1] >= 0) & (u2 + s[1] < m)

    dset = (in_window(d1) & in_window(d2)) | in_window(-d3)
    valid = dset & in_window(d1)
    pts = np.stack([u1[valid], u2[valid]], axis=1) + t0

    covered = np.zeros((n, n), dtype=bool)
    for t in pattern.shifts:
        p = (pts + t) % n
        covered[p[:, 0], p[:, 1]] = True
    return bool(covered.all())


# ---------------------------------------------------------------------------
# text serialization: "tau q kind" then one "k l t1 t2" line per shift


def to_text(pattern: ScanPattern) -> str:
    lines = [f"{pattern.tau} {pattern.q} {pattern.kind}"]
    for (k, l), (t1, t2) in zip(pattern.indices, pattern.shifts):
        lines.append(f"{k} {l} {t1} {t2}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> ScanPattern:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise ValueError("scan header must read 'tau q kind'")
    try:
        tau, q = int(rows[0][0]), int(rows[0][1])
    except ValueError as exc:
        raise ValueError(f"bad scan header {rows[0]!r}") from exc
    kind = rows[0][2]
    if kind not in KINDS:
        raise ValueError(f"unknown scan kind {kind!r}")
    body = np.array([[int(v) for v in r] for r in rows[1:]], dtype=int).reshape(-1, 4)
    if len(body) != q * q:
        raise ValueError(f"expected {q*q} shifts, found {len(body)}")
    n = tau * q
    t = np.zeros((q, q, 2), dtype=int)
    t[body[:, 0], body[:, 1]] = body[:, 2:]
    kk, ll = np.meshgrid(np.arange(q), np.arange(q), indexing="ij")
    d1 = t[..., 0] - tau * kk
    d2 = t[..., 1] - tau * ll
    if kind == "perturbed_full":
        return perturbed_full(n, tau, d1, d2)
    if not (np.all(d1 == d1[:, :1]) and np.all(d2 == d2[:1, :])):
        raise ValueError("shifts are not separable")
    if kind == "raster":
        if d1.any() or d2.any():
            raise ValueError("raster pattern with nonzero perturbations")
        return raster(n, tau)
    return perturbed_separable(n, tau, d1[:, 0], d2[0, :])


def load(path) -> ScanPattern:
    with open(path) as fh:
        return from_text(fh.read())


def save(pattern: ScanPattern, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_text(pattern))

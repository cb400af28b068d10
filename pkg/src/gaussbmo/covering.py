"""Greedy construction of the disjoint-ball covering family.

Candidate centers live on a lattice whose spacing is proportional to the local
inner radius kappa*m(x)/4, so the candidate count stays manageable far from the
origin in two dimensions. Candidates are processed in order of increasing |x|
(ties broken lexicographically); the order is realized shell by shell so the
full candidate set never has to be held in memory.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import m_func

KAPPA = 1.0 / 20.0
CELL = 0.5
SHELL = 0.25
MAX_HASH_CELLS = 60_000_000


@dataclass
class CoveringFamily:
    centers: np.ndarray
    kappa: float
    region: tuple  # (lo, hi) arrays
    n_candidates: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def inner_radii(self):
        return self.kappa * m_func(self.centers) / 4

    @property
    def cover_radii(self):
        return self.kappa * m_func(self.centers)

    def __len__(self):
        return len(self.centers)


class _Hash:
    """Uniform bucket grid over the region padded to three dimensions."""

    def __init__(self, lo, hi, cell):
        n = len(lo)
        self.lo = np.zeros(3)
        self.lo[:n] = lo - cell
        span = np.zeros(3)
        span[:n] = (hi - lo) + 2 * cell
        self.shape = np.maximum(1, np.ceil(span / cell).astype(np.int64))
        if np.prod(self.shape) > MAX_HASH_CELLS:
            raise ValueError("region too large for the covering hash grid")
        self.cell = cell
        self.heads = np.full(int(np.prod(self.shape)), -1, dtype=np.int64)
        self.nxt = np.full(1024, -1, dtype=np.int64)
        self.pts = np.zeros((1024, 3))
        self.m = np.zeros(1024)
        self.count = 0

    def reserve(self, extra):
        need = self.count + extra
        if need > len(self.m):
            size = max(need, 2 * len(self.m))
            self.nxt = np.resize(self.nxt, size)
            pts = np.zeros((size, 3))
            pts[: self.count] = self.pts[: self.count]
            self.pts = pts
            self.m = np.resize(self.m, size)


@njit(cache=True)
def _cell_range(x, rad, lo, cell, shape, out):
    for k in range(3):
        a = int(math.floor((x[k] - rad - lo[k]) / cell))
        b = int(math.floor((x[k] + rad - lo[k]) / cell))
        out[k, 0] = max(a, 0)
        out[k, 1] = min(b, shape[k] - 1)


@njit(cache=True)
def _insert(j, x, lo, cell, shape, heads, nxt):
    i0 = int(math.floor((x[0] - lo[0]) / cell))
    i1 = int(math.floor((x[1] - lo[1]) / cell))
    i2 = int(math.floor((x[2] - lo[2]) / cell))
    key = (i0 * shape[1] + i1) * shape[2] + i2
    nxt[j] = heads[key]
    heads[key] = j


@njit(cache=True)
def _m(x):
    r = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    return 1.0 if r <= 1.0 else 1.0 / r


@njit(cache=True)
def _m_near(x, dist):
    # upper bound for m over the ball B(x, dist)
    r = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) - dist
    return 1.0 if r <= 1.0 else 1.0 / r


@njit(cache=True)
def _greedy(cand, kappa, lo, cell, shape, heads, nxt, pts, ms, count):
    rng = np.zeros((3, 2), dtype=np.int64)
    for i in range(cand.shape[0]):
        x = cand[i]
        mx = _m(x)
        rad = kappa * (mx + _m_near(x, kappa / 2)) / 4
        _cell_range(x, rad, lo, cell, shape, rng)
        ok = True
        for i0 in range(rng[0, 0], rng[0, 1] + 1):
            for i1 in range(rng[1, 0], rng[1, 1] + 1):
                for i2 in range(rng[2, 0], rng[2, 1] + 1):
                    j = heads[(i0 * shape[1] + i1) * shape[2] + i2]
                    while j >= 0:
                        d0 = x[0] - pts[j, 0]
                        d1 = x[1] - pts[j, 1]
                        d2 = x[2] - pts[j, 2]
                        lim = kappa * (mx + ms[j]) / 4
                        if d0 * d0 + d1 * d1 + d2 * d2 < lim * lim:
                            ok = False
                            break
                        j = nxt[j]
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            pts[count] = x
            ms[count] = mx
            _insert(count, x, lo, cell, shape, heads, nxt)
            count += 1
    return count


@njit(cache=True)
def _count_in(test, scale, stop_at_one, lo, cell, shape, heads, nxt, pts, ms):
    """For each test point count centers x_j with |z - x_j| < scale * m(x_j)."""
    out = np.zeros(test.shape[0], dtype=np.int64)
    rng = np.zeros((3, 2), dtype=np.int64)
    for i in range(test.shape[0]):
        z = test[i]
        rad = scale * _m_near(z, scale)
        _cell_range(z, rad, lo, cell, shape, rng)
        c = 0
        done = False
        for i0 in range(rng[0, 0], rng[0, 1] + 1):
            for i1 in range(rng[1, 0], rng[1, 1] + 1):
                for i2 in range(rng[2, 0], rng[2, 1] + 1):
                    j = heads[(i0 * shape[1] + i1) * shape[2] + i2]
                    while j >= 0:
                        d0 = z[0] - pts[j, 0]
                        d1 = z[1] - pts[j, 1]
                        d2 = z[2] - pts[j, 2]
                        lim = scale * ms[j]
                        if d0 * d0 + d1 * d1 + d2 * d2 < lim * lim:
                            c += 1
                            if stop_at_one:
                                done = True
                                break
                        j = nxt[j]
                    if done:
                        break
                if done:
                    break
            if done:
                break
        out[i] = c
    return out


@njit(cache=True)
def _min_gap(kappa, lo, cell, shape, heads, nxt, pts, ms, count):
    """Smallest value of |x_i - x_j| - kappa (m_i + m_j)/4 over neighbouring pairs."""
    worst = np.inf
    rng = np.zeros((3, 2), dtype=np.int64)
    for i in range(count):
        x = pts[i]
        rad = kappa * (ms[i] + _m_near(x, kappa / 2)) / 4
        _cell_range(x, rad, lo, cell, shape, rng)
        for i0 in range(rng[0, 0], rng[0, 1] + 1):
            for i1 in range(rng[1, 0], rng[1, 1] + 1):
                for i2 in range(rng[2, 0], rng[2, 1] + 1):
                    j = heads[(i0 * shape[1] + i1) * shape[2] + i2]
                    while j >= 0:
                        if j != i:
                            d0 = x[0] - pts[j, 0]
                            d1 = x[1] - pts[j, 1]
                            d2 = x[2] - pts[j, 2]
                            gap = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2) - kappa * (ms[i] + ms[j]) / 4
                            if gap < worst:
                                worst = gap
                        j = nxt[j]
    return worst


def _pad3(x):
    out = np.zeros((len(x), 3))
    out[:, : x.shape[1]] = x
    return out


def _cells(lo, hi):
    n = len(lo)
    edges = [np.unique(np.append(np.arange(lo[k], hi[k], CELL), hi[k])) for k in range(n)]
    grids = np.meshgrid(*[np.arange(len(e) - 1) for e in edges], indexing="ij")
    idx = np.stack([g.reshape(-1) for g in grids], axis=1)
    clo = np.stack([edges[k][idx[:, k]] for k in range(n)], axis=1)
    chi = np.stack([edges[k][idx[:, k] + 1] for k in range(n)], axis=1)
    return clo, chi


def _cell_lattice(clo, chi, spacing_rel, kappa):
    n = len(clo)
    far = np.maximum(np.abs(clo), np.abs(chi))
    h = spacing_rel * kappa * float(m_func(far)) / 4
    if n == 2:
        # triangular lattice: greedy selection then lands on a hexagonal packing at
        # every refinement level instead of switching between square and hex patterns
        w0, w1 = chi - clo
        nx = max(1, int(math.ceil(w0 / h)))
        ny = max(1, int(math.ceil(w1 / (h * math.sqrt(3) / 2))))
        dx, dy = w0 / nx, w1 / ny
        j = np.arange(ny)
        xs = clo[0] + (np.arange(nx)[None, :] + 0.25 + 0.5 * (j[:, None] % 2)) * dx
        ys = np.broadcast_to(clo[1] + (j[:, None] + 0.5) * dy, xs.shape)
        return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)
    axes = []
    for k in range(n):
        w = chi[k] - clo[k]
        cnt = max(1, int(math.ceil(w / h)))
        axes.append(clo[k] + (np.arange(cnt) + 0.5) * (w / cnt))
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.reshape(-1) for a in g], axis=1)


def _candidate_shells(lo, hi, spacing_rel, kappa):
    """Yield candidate blocks sorted by (|x|, x_0, x_1, ...) shell by shell."""
    clo, chi = _cells(lo, hi)
    near = np.sqrt(np.sum(np.maximum(0, np.maximum(clo, -chi)) ** 2, axis=1))
    far = np.sqrt(np.sum(np.maximum(np.abs(clo), np.abs(chi)) ** 2, axis=1))
    rmax = float(far.max())
    nshell = int(math.ceil(rmax / SHELL)) + 1
    cache = {}
    for k in range(nshell):
        r0, r1 = k * SHELL, (k + 1) * SHELL
        sel = np.nonzero((near < r1) & (far >= r0))[0]
        blocks = []
        for c in sel:
            if c not in cache:
                cache[c] = _cell_lattice(clo[c], chi[c], spacing_rel, kappa)
            p = cache[c]
            r = np.sqrt(np.sum(p * p, axis=1))
            blocks.append(p[(r >= r0) & (r < r1)])
            if far[c] < r1:
                del cache[c]
        if not blocks:
            continue
        pts = np.concatenate(blocks)
        if len(pts) == 0:
            continue
        r2 = np.sum(pts * pts, axis=1)
        keys = [pts[:, j] for j in range(pts.shape[1] - 1, -1, -1)] + [r2]
        order = np.lexsort(keys)
        yield pts[order]


def build_covering(ctx, region, candidate_spacing=1.0, kappa=KAPPA, test_spacing=None):
    """Greedy maximal family of disjoint balls B(x_j, kappa m(x_j)/4) over a box.

    ``candidate_spacing`` is the candidate lattice spacing in units of the local
    inner radius kappa*m/4 (values <= 1 make the lattice finer than every inner
    ball). Raises if a lattice test point is left uncovered.
    """
    lo = np.atleast_1d(np.asarray(region[0], dtype=float))
    hi = np.atleast_1d(np.asarray(region[1], dtype=float))
    n = ctx.dim
    if len(lo) != n or len(hi) != n or np.any(hi <= lo):
        raise ValueError("region must be a nonempty box of the context dimension")
    if n > 3:
        raise ValueError("covering construction supports n <= 3")
    corner = np.maximum(np.abs(lo), np.abs(hi))
    m_min = float(m_func(corner))
    h = _Hash(lo, hi, kappa * m_min / 2)
    n_cand = 0
    uncovered = []
    for block in _candidate_shells(lo, hi, candidate_spacing, kappa):
        b3 = _pad3(block)
        h.reserve(len(b3))
        h.count = _greedy(b3, kappa, h.lo, h.cell, h.shape, h.heads, h.nxt, h.pts, h.m, h.count)
        hit = _count_in(b3, kappa, True, h.lo, h.cell, h.shape, h.heads, h.nxt, h.pts, h.m)
        if np.any(hit == 0):
            uncovered.append(block[hit == 0])
        n_cand += len(block)
    fam = CoveringFamily(h.pts[: h.count, :n].copy(), kappa, (lo, hi), n_cand)
    fam._hash = h
    # recheck any point missed during the sweep against the complete family
    miss = np.concatenate(uncovered) if uncovered else np.empty((0, n))
    if len(miss):
        hit = _count_in(_pad3(miss), kappa, True, h.lo, h.cell, h.shape, h.heads, h.nxt, h.pts, h.m)
        miss = miss[hit == 0]
    test = _test_lattice(lo, hi, test_spacing)
    hit = _count_in(_pad3(test), kappa, True, h.lo, h.cell, h.shape, h.heads, h.nxt, h.pts, h.m)
    gap = _min_gap(kappa, h.lo, h.cell, h.shape, h.heads, h.nxt, h.pts, h.m, h.count)
    fam.stats = {
        "n_centers": int(h.count),
        "n_candidates": int(n_cand),
        "uncovered_candidates": int(len(miss)),
        "uncovered_test_points": int(np.sum(hit == 0)),
        "min_gap": float(gap),
        "disjoint": bool(gap >= 0),
    }
    if len(miss) or np.any(hit == 0):
        raise RuntimeError("covering check failed: uncovered test point (candidate spacing too coarse)")
    return fam


def _test_lattice(lo, hi, spacing=None):
    n = len(lo)
    per_axis = {1: 4001, 2: 401, 3: 61}[n]
    if spacing is not None:
        per_axis = int(math.ceil(float(np.max(hi - lo)) / spacing)) + 1
    axes = [np.linspace(lo[k], hi[k], per_axis + 2)[1:-1] for k in range(n)]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.reshape(-1) for a in g], axis=1)


def overlap_count(family, tau, test_points=None):
    """Max over test points of the number of dilated balls tau*B_j containing the point."""
    h = family._hash
    lo, hi = family.region
    test = _test_lattice(lo, hi) if test_points is None else np.atleast_2d(test_points)
    # the hash cell may be smaller than the query radius; _count_in scans the full range
    cnt = _count_in(_pad3(test), tau * family.kappa, False, h.lo, h.cell, h.shape, h.heads, h.nxt, h.pts, h.m)
    return int(cnt.max())

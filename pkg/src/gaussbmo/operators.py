"""Local fractional integrals, their duals, and local maximal operators.

All evaluators accept a single point or an (m, n) array of points and
return a float or an (m,) array. Integral operators use polar coordinates
centred at the singularity; maximal operators scan a deterministic family
of admissible candidate balls (see ``BallSearchGrid``).
"""

import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .geometry import Ball, log_gauss_ball_arrays, m_func
from .quadrature import FlatNodes, collect_breaks, polar_nodes, polar_nodes_flat, sphere_rule

# element budget for one vectorized block of quadrature nodes
NODE_BUDGET = 2_000_000
CHEB_NODES = 64
TANGENT_OFFSET = 1.0 - 1e-9  # x sits just inside the boundary of the candidate


@dataclass(frozen=True)
class BallSearchGrid:
    directions: int = 8
    radii: int = 24
    offsets: int = 8
    explicit_candidates: Tuple[Ball, ...] = ()
    min_fraction: float = 1e-3

    def __post_init__(self):
        if self.directions < 1 or self.radii < 1 or self.offsets < 1:
            raise ValueError("grid counts must be positive")
        object.__setattr__(self, "explicit_candidates", tuple(self.explicit_candidates))

    def refined(self):
        # 2R - 1 log-spaced radii contain the original R, so refined maxima never decrease
        # (directions nest for n <= 2, the clustered offsets always nest)
        return replace(self, directions=2 * self.directions, radii=2 * self.radii - 1, offsets=2 * self.offsets)

    def with_candidates(self, balls):
        return replace(self, explicit_candidates=tuple(self.explicit_candidates) + tuple(balls))


@dataclass(frozen=True)
class OperatorParams:
    a: float
    beta: float
    ball_grid: BallSearchGrid = field(default_factory=BallSearchGrid)

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")

    def refined(self):
        return replace(self, ball_grid=self.ball_grid.refined())


def _as_points(ctx, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != ctx.dim:
        raise ValueError("point dimension does not match context")
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation points must be finite")
    return pts, single


def _finish(out, single):
    if not np.all(np.isfinite(out)):
        raise ValueError("nonfinite operator value")
    return float(out[0]) if single else out


def _chunks(m, per_row):
    step = max(1, int(NODE_BUDGET // max(per_row, 1)))
    for i in range(0, m, step):
        yield slice(i, min(m, i + step))


def _values(f, y):
    shape = y.shape[:-1]
    return np.asarray(f(y.reshape(-1, y.shape[-1])), dtype=float).reshape(shape)


# radial table of log(V(x, s) / s^n) ------------------------------------------

def _cheb_matrix(k):
    j = np.arange(k)
    t = np.cos(np.pi * (j + 0.5) / k)
    T = np.cos(np.outer(np.arccos(t), j))
    return t, np.linalg.inv(T)


_CHEB = _cheb_matrix(CHEB_NODES)


def log_v_ratio(ctx, x, s, s_max):
    """log V(x, x + s w) - n log s for rows x (m, n), radii s (m, P) with s <= s_max (m,).

    n = 1 uses the closed form directly; n >= 2 interpolates a 64-node
    Chebyshev table in s per point (V depends on y only through |x - y|).
    """
    n = ctx.dim
    m, P = s.shape
    if n == 1:
        lg = log_gauss_ball_arrays(1, ctx.quad, np.repeat(x, P, axis=0), s.reshape(-1)).reshape(m, P)
        return lg - np.log(s)
    t, inv = _CHEB
    sm = np.asarray(s_max, dtype=float).reshape(m, 1)
    nodes = 0.5 * sm * (t[None, :] + 1.0)
    lg = log_gauss_ball_arrays(n, ctx.quad, np.repeat(x, len(t), axis=0), nodes.reshape(-1)).reshape(m, len(t))
    vals = lg - n * np.log(nodes)
    coef = vals @ inv.T  # (m, k)
    u = np.clip(2.0 * s / sm - 1.0, -1.0, 1.0)
    return np.polynomial.chebyshev.chebval(u, coef.T[:, :, None], tensor=False)


# local fractional integrals ---------------------------------------------------

def local_polar(ctx, x, R, alpha, sources):
    dirs = sphere_rule(ctx.dim, ctx.quad.angular_nodes)
    br = collect_breaks(sources, x, dirs[0])
    return polar_nodes(ctx.dim, ctx.quad, x, R, alpha=alpha, breaks=br, dirs=dirs)


def fractional_sum(ctx, params, x, integrand, kernel, sources):
    """Shared engine for I, tilde I and aux_T.

    ``integrand(xc, y)`` returns values at nodes y (m, P, n) for rows xc (m, n).
    ``kernel`` is "V" (exact V(x,y)), "tilde_x" (e^{-|x|^2}|x-y|^n) or
    "tilde_y" (e^{-|y|^2}|x-y|^n), each raised to beta - 1.
    """
    n, beta, a = ctx.dim, params.beta, params.a
    alpha = n * (1.0 - beta)
    out = np.zeros(len(x))
    per = 2 * len(sphere_rule(n, ctx.quad.angular_nodes)[0]) * ctx.quad.radial_nodes * 8
    for sl in _chunks(len(x), per):
        xc = x[sl]
        R = a * m_func(xc)
        ns = local_polar(ctx, xc, R, alpha, sources)
        y2 = ns.sq_norm()
        if kernel == "V":
            expo = -y2 + (beta - 1.0) * log_v_ratio(ctx, xc, np.maximum(ns.radius, 1e-300), R)
        elif kernel == "tilde_x":
            expo = -y2 + (1.0 - beta) * np.sum(xc**2, axis=1)[:, None]
        elif kernel == "tilde_y":
            expo = -beta * y2
        else:
            raise ValueError(f"unknown kernel {kernel!r}")
        vals = integrand(xc, ns.points)
        w = np.where(ns.weights > 0, ns.weights * np.exp(expo), 0.0)
        out[sl] = np.sum(w * vals, axis=1)
    return out


def frac_integral(ctx, params, f, x, sources=None):
    """I_a^beta f(x): integral over B(x, a m(x)) of f(y) V(x,y)^{beta-1} d gamma(y)."""
    pts, single = _as_points(ctx, x)
    srcs = [f] if sources is None else sources
    out = fractional_sum(ctx, params, pts, lambda xc, y: _values(f, y), "V", srcs)
    return _finish(out, single)


def frac_integral_tilde(ctx, params, f, x, sources=None):
    """tilde I_a^beta f(x), kernel [e^{-|x|^2}|x-y|^n]^{beta-1}."""
    pts, single = _as_points(ctx, x)
    srcs = [f] if sources is None else sources
    out = fractional_sum(ctx, params, pts, lambda xc, y: _values(f, y), "tilde_x", srcs)
    return _finish(out, single)


# dual operators ----------------------------------------------------------------

def predicate_breaks(x, dirs, R, a, samples=64, iters=50):
    """Ray parameters where s - a m(x + s w) changes sign (boundary of |x-y| < a m(y))."""
    m, d = len(x), len(dirs)
    R = np.broadcast_to(np.asarray(R, dtype=float), (m,))
    frac = np.arange(0, samples + 1) / samples
    s = np.broadcast_to(R[:, None, None] * frac[None, None, :], (m, d, samples + 1))
    pts = x[:, None, None, :] + s[..., None] * dirs[None, :, None, :]
    g = s - a * m_func(pts)
    sign = g < 0
    change = sign[..., 1:] != sign[..., :-1]
    idx = np.nonzero(change)
    if len(idx[0]) == 0:
        return np.full((m, d, 0), np.nan)
    lo = s[idx[0], idx[1], idx[2]]
    hi = s[idx[0], idx[1], idx[2] + 1]
    neg_lo = sign[idx[0], idx[1], idx[2]]
    xo, dv = x[idx[0]], dirs[idx[1]]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        gm = mid - a * m_func(xo + mid[:, None] * dv) < 0
        move_lo = gm == neg_lo
        lo = np.where(move_lo, mid, lo)
        hi = np.where(move_lo, hi, mid)
    root = 0.5 * (lo + hi)
    counts = change.sum(axis=-1)
    k = int(counts.max())
    out = np.full((m, d, k), np.nan)
    rank = np.cumsum(change, axis=-1)[idx] - 1
    out[idx[0], idx[1], rank] = root
    return out


class _Predicate:
    def __init__(self, a, R):
        self.a, self.R = a, R

    def ray_breaks(self, origins, dirs):
        return predicate_breaks(origins, dirs, self.R, self.a)


def _support_of(f):
    sup = getattr(f, "support", None)
    if sup is None:
        raise ValueError("dual operators need a function with declared compact support")
    return sup


def dual_sum(ctx, params, f, x, kernel, sources=None):
    n, beta, a = ctx.dim, params.beta, params.a
    alpha = n * (1.0 - beta)
    sup = _support_of(f)
    out = np.zeros(len(x))
    srcs = [f] if sources is None else list(sources)
    per = 2 * len(sphere_rule(n, ctx.quad.angular_nodes)[0]) * ctx.quad.radial_nodes * 12
    for sl in _chunks(len(x), per):
        xc = x[sl]
        R = np.linalg.norm(xc - sup.c, axis=1) + sup.radius
        ns = local_polar(ctx, xc, R, alpha, srcs + [_Predicate(a, R)])
        y = ns.points
        s = np.maximum(ns.radius, 1e-300)
        inside = s < a * m_func(y)
        y2 = ns.sq_norm()
        if kernel == "V":
            lg = log_gauss_ball_arrays(n, ctx.quad, y.reshape(-1, n), s.reshape(-1)).reshape(s.shape)
            expo = -y2 + (beta - 1.0) * (lg - n * np.log(s))
        else:
            expo = -beta * y2
        vals = _values(f, y)
        w = np.where(inside & (ns.weights > 0), ns.weights * np.exp(expo), 0.0)
        out[sl] = np.sum(w * vals, axis=1)
    return out


def frac_integral_dual(ctx, params, f, x, sources=None):
    """(I_a^beta)^* f(x): integral over {y : |x-y| < a m(y)} of f(y) V(y,x)^{beta-1} d gamma(y)."""
    pts, single = _as_points(ctx, x)
    return _finish(dual_sum(ctx, params, f, pts, "V", sources), single)


def frac_integral_tilde_dual(ctx, params, f, x, sources=None):
    """Dual of tilde I: kernel [e^{-|y|^2}|x-y|^n]^{beta-1} over {y : |x-y| < a m(y)}."""
    pts, single = _as_points(ctx, x)
    return _finish(dual_sum(ctx, params, f, pts, "tilde_y", sources), single)


# candidate balls for maximal operators ----------------------------------------

def grid_directions(n, count):
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        # Fibonacci sphere
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        ph = np.pi * (1 + 5**0.5) * k
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(ph), r * np.sin(ph), z], axis=1)
    eye = np.eye(n)
    return np.concatenate([eye, -eye])


def candidate_balls(x, a, grid, iters=50):
    """Centers (m, C, n), radii (m, C) and validity mask for the candidate family at each x.

    Radii are log-spaced over [min_fraction a m(x), a (a+1) m(x)] (the largest
    radius of a class-a ball containing x); centers are x + s r d with offset
    fractions s_j = 1 - ((O - j)/O)^2 clustered toward the tangent position,
    plus s = 1 - 1e-9 (balls with x on the boundary). Infeasible radii are
    shrunk onto the boundary r = a m(c) along the same (d, s) by bisection.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    dirs = grid_directions(n, grid.directions)
    fr = np.geomspace(grid.min_fraction * a, a * (a + 1), grid.radii)
    offs = np.append(1.0 - ((grid.offsets - np.arange(grid.offsets)) / grid.offsets) ** 2, TANGENT_OFFSET)
    D, R, O = len(dirs), len(fr), len(offs)
    mx = m_func(x)
    r = (mx[:, None] * fr[None, :])[:, :, None, None]  # (m, R, 1, 1)
    r = np.broadcast_to(r, (m, R, O, D)).copy()
    sd = offs[None, None, :, None, None] * dirs[None, None, None, :, :]  # (1,1,O,D,n)
    sd = np.broadcast_to(sd, (m, R, O, D, n))
    xb = x[:, None, None, None, :]
    bad = r > a * m_func(xb + r[..., None] * sd)
    if np.any(bad):
        hi = r[bad]
        lo = np.zeros_like(hi)
        xs, sds = np.broadcast_to(xb, sd.shape)[bad], sd[bad]
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = mid <= a * m_func(xs + mid[:, None] * sds)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        r[bad] = lo
    centers = (xb + r[..., None] * sd).reshape(m, -1, n)
    radii = r.reshape(m, -1)
    valid = radii > 0
    if grid.explicit_candidates:
        ec = np.array([b.center for b in grid.explicit_candidates], dtype=float)
        er = np.array([b.radius for b in grid.explicit_candidates], dtype=float)
        adm = (er > 0) & (er <= a * m_func(ec))
        cont = np.sum((x[:, None, :] - ec[None]) ** 2, axis=-1) < er[None] ** 2
        centers = np.concatenate([centers, np.broadcast_to(ec, (m,) + ec.shape)], axis=1)
        radii = np.concatenate([radii, np.broadcast_to(er, (m, len(er)))], axis=1)
        valid = np.concatenate([valid, cont & adm[None]], axis=1)
    return centers, radii, valid


@dataclass
class CandidateBlock:
    """Flat quadrature nodes of all candidate balls for a chunk of query points.

    ``w`` are weights scaled by e^{|c|^2}: int_B g d gamma = e^{-c2} * sum(w g).
    ``xi`` maps each node to its query point, ``sum`` reduces node values to
    an (m, C) table indexed by (query point, candidate).
    """

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    nodes: FlatNodes
    lg: np.ndarray
    c2: np.ndarray
    valid: np.ndarray

    def sum(self, vals):
        return self.nodes.sum(vals).reshape(self.valid.shape)

    def per_candidate(self, table):
        return np.repeat(table.reshape(-1)[self.nodes.seg_owner], self.nodes.q)

    def per_query(self, values):
        C = self.valid.shape[1]
        return np.repeat(np.asarray(values)[self.nodes.seg_owner // C], self.nodes.q)


def scan_candidates(ctx, a, grid, x, sources, reducer):
    """Evaluate ``reducer(block)`` on the candidate balls of every x, in memory-bounded chunks.

    The reducer returns a tuple of (m,) arrays for the chunk.
    """
    n = ctx.dim
    dirs = sphere_rule(n, ctx.quad.angular_nodes)
    C = len(grid_directions(n, grid.directions)) * grid.radii * grid.offsets + len(grid.explicit_candidates)
    per = C * len(dirs[0]) * ctx.quad.radial_nodes * 3
    results = None
    for sl in _chunks(len(x), per):
        xc = x[sl]
        centers, radii, valid = candidate_balls(xc, a, grid)
        mc, Cc = radii.shape
        flat_c = centers.reshape(-1, n)
        flat_r = np.where(valid, radii, 0.0).reshape(-1)
        br = collect_breaks(sources, flat_c, dirs[0])
        fn = polar_nodes_flat(n, ctx.quad, flat_c, flat_r, breaks=br, dirs=dirs)
        c2 = np.sum(flat_c**2, axis=1)
        # |c|^2 - |y|^2 = -(2 s <c, d> + s^2) along each segment
        cd = np.einsum("sn,sn->s", flat_c[fn.seg_owner], dirs[0][fn.seg_dir])
        rad = fn.radius.reshape(-1, fn.q)
        w = fn.weights * np.exp(-(2 * cd[:, None] * rad + rad * rad)).reshape(-1)
        lg = log_gauss_ball_arrays(n, ctx.quad, flat_c, np.where(valid.reshape(-1), flat_r, 1.0))
        block = CandidateBlock(xc, fn.points, w, fn, lg.reshape(mc, Cc),
                               c2.reshape(mc, Cc), valid)
        res = reducer(block)
        if results is None:
            results = [np.empty((len(x),) + np.shape(r)[1:], dtype=np.asarray(r).dtype) for r in res]
        for store, r in zip(results, res):
            store[sl] = r
    return results


def masked_max(vals, valid):
    return np.max(np.where(valid, vals, -np.inf), axis=1)


def frac_maximal_factor(beta, lg, c2):
    """Converts scaled sums into gamma(B)^{beta-1} int_B (...) d gamma."""
    return np.exp(-c2 - (1.0 - beta) * lg)


def frac_maximal(ctx, params, f, x, sources=None):
    """M_a^beta f(x): max over candidates of gamma(B)^{beta-1} int_B |f| d gamma (a lower bound)."""
    return _maximal(ctx, params.a, params.beta, params.ball_grid, f, x, sources)


def local_maximal(ctx, params, f, x, sources=None):
    """M_a f(x): max over candidates of the gamma-average of |f| (beta = 0)."""
    return _maximal(ctx, params.a, 0.0, params.ball_grid, f, x, sources)


def _maximal(ctx, a, beta, grid, f, x, sources):
    pts, single = _as_points(ctx, x)
    srcs = [f] if sources is None else sources

    def red(blk):
        s = blk.sum(blk.w * np.abs(f(blk.y)))
        return (masked_max(s * frac_maximal_factor(beta, blk.lg, blk.c2), blk.valid),)

    (out,) = scan_candidates(ctx, a, grid, pts, srcs, red)
    return _finish(np.maximum(out, 0.0), single)


def sharp_maximal(ctx, f, x, grid, sources=None):
    """f^sharp(x): max over class-1 candidates of the mean oscillation of f.

    Averages use the candidate's own quadrature mass, so constants give 0 exactly.
    """
    pts, single = _as_points(ctx, x)
    srcs = [f] if sources is None else sources

    def red(blk):
        v = np.asarray(f(blk.y), dtype=float)
        mass = np.where(blk.valid, blk.sum(blk.w), 1.0)
        avg = blk.sum(blk.w * v) / mass
        osc = blk.sum(blk.w * np.abs(v - blk.per_candidate(avg))) / mass
        return (masked_max(osc, blk.valid),)

    (out,) = scan_candidates(ctx, 1.0, grid, pts, srcs, red)
    return _finish(out, single)

"""Numerical integration against the Gauss measure.

Integrals over balls are computed in polar coordinates about a chosen origin.
Along every ray the radial interval is split at the discontinuities reported
by the integrand (``ray_breaks``), the first segment uses a Gauss-Jacobi rule
that absorbs the density s^(n-1-alpha), and the remaining segments use
Gauss-Legendre. This gives spectral accuracy for piecewise smooth integrands
and uniform accuracy for singular kernels as alpha approaches n.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from . import special

R_INF = 12.0
OUTER_PANEL = 0.5


@dataclass(frozen=True)
class QuadratureConfig:
    radial_nodes: int = 16
    angular_nodes: int = 16
    mc_samples: int = 20000
    seed: int = 12345
    rel_tol: float = 1e-3

    def __post_init__(self):
        if self.radial_nodes < 8 or self.angular_nodes < 8:
            raise ValueError("radial_nodes and angular_nodes must be >= 8")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be >= 1000")
        if not 0 < self.rel_tol <= 0.1:
            raise ValueError("rel_tol must lie in (0, 0.1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def refined(self):
        return replace(self, radial_nodes=2 * self.radial_nodes, angular_nodes=2 * self.angular_nodes)


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    error_estimate: float
    method: str  # closed_form | polar | tensor | monte_carlo

    def __float__(self):
        return float(self.value)


def sphere_area(n):
    """Surface area of the unit sphere S^(n-1)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@lru_cache(maxsize=None)
def legendre_unit(q):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(q)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def jacobi_unit(q, gam):
    """Nodes and weights on [0, 1] for the weight u^gam (gam > -1)."""
    if gam == 0:
        return legendre_unit(q)
    x, w = roots_jacobi(q, 0.0, gam)
    return (x + 1) / 2, w * 2.0 ** (-gam - 1)


@lru_cache(maxsize=None)
def _gegenbauer_nodes(n, q=96):
    lam = (n - 3) / 2
    return roots_jacobi(q, lam, lam)


def log_angular_scaled(n, t):
    """log(e^{-t} A_n(t)) where A_n(t) is the integral of e^{-t xi_1} over S^(n-1)."""
    t = np.asarray(t, dtype=float)
    if n == 1:
        return np.log1p(np.exp(-2 * t))
    if n == 2:
        return math.log(2 * math.pi) + np.log(special.i0e(t))
    if n == 3:
        safe = np.where(t > 0, t, 1.0)
        # 4 pi sinh(t)/t e^{-t} = 2 pi (1 - e^{-2t})/t, with the t -> 0 limit 4 pi
        small = np.log(4 * math.pi) - t + t * t / 6
        big = math.log(2 * math.pi) + np.log(-np.expm1(-2 * safe)) - np.log(safe)
        return np.where(t < 1e-4, small, big)
    x, w = _gegenbauer_nodes(n)
    vals = np.exp(-np.multiply.outer(t, 1 + x)) @ w
    return math.log(sphere_area(n - 1)) + np.log(vals)


def angular_kernel(n, t):
    """A_n(t) = integral over S^(n-1) of e^{-t xi_1} d sigma."""
    t = np.asarray(t, dtype=float)
    out = np.exp(log_angular_scaled(n, t) + t)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def sphere_rule(n, angular_nodes):
    """Quadrature directions and weights on S^(n-1); weights sum to |S^(n-1)|."""
    if n == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if n == 2:
        th = 2 * np.pi * (np.arange(angular_nodes) + 0.5) / angular_nodes
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        return dirs, np.full(angular_nodes, 2 * np.pi / angular_nodes)
    if n == 3:
        z, wz = np.polynomial.legendre.leggauss(angular_nodes)
        nphi = 2 * angular_nodes
        phi = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1 - zz**2)
        dirs = np.stack([rho * np.cos(pp), rho * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        w = np.repeat(wz, nphi) * (2 * np.pi / nphi)
        return dirs, w
    raise ValueError("deterministic polar quadrature supports n <= 3")


def sphere_hits(origins, dirs, centers, radii):
    """Ray parameters s where origin + s*dir meets the sphere |y - c| = r.

    origins (m, n), dirs (d, n), centers (m, k, n) or (k, n), radii (m, k) or (k,).
    Returns (m, d, 2k) with NaN where the ray misses.
    """
    origins = np.asarray(origins, dtype=float)
    m = origins.shape[0]
    centers = np.broadcast_to(np.asarray(centers, dtype=float), (m,) + np.shape(centers)[-2:])
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:2])
    diff = origins[:, None, :] - centers  # (m, k, n)
    b = np.einsum("dn,mkn->mdk", dirs, diff)
    c = (np.sum(diff**2, axis=-1) - radii**2)[:, None, :]
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
    root = np.where(disc >= 0, root, np.nan)
    return np.concatenate([-b - root, -b + root], axis=-1)


def collect_breaks(sources, origins, dirs):
    """Concatenate ray breaks reported by every source along the last axis."""
    m, d = len(origins), len(dirs)
    parts = [np.empty((m, d, 0))]
    for src in sources:
        fn = getattr(src, "ray_breaks", None)
        if fn is not None:
            parts.append(fn(origins, dirs))
    return np.concatenate(parts, axis=-1)


@dataclass
class NodeSet:
    """Polar quadrature nodes for a batch of m regions.

    ``weights`` include pi^{-n/2}, the angular weight and the radial density
    s^(n-1-alpha); multiply by e^{-|y|^2} (or a scaled variant) and the
    integrand, then sum over the last axis.
    """

    points: np.ndarray  # (m, P, n)
    radius: np.ndarray  # (m, P) distance from the polar origin
    weights: np.ndarray  # (m, P)

    def sq_norm(self):
        return np.sum(self.points**2, axis=-1)


def polar_nodes(dim, quad, origins, radii, alpha=0.0, breaks=None, panel=None, dirs=None):
    """Build polar nodes on B(origin_i, radius_i) for every i."""
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), origins.shape[:1])
    if dirs is None:
        dirs, dw = sphere_rule(dim, quad.angular_nodes)
    else:
        dirs, dw = dirs
    m, d = len(origins), len(dirs)
    R = radii[:, None, None]
    parts = []
    if breaks is not None and breaks.shape[-1]:
        parts.append(np.broadcast_to(breaks, (m, d, breaks.shape[-1])))
    if panel:
        k = int(math.ceil(float(np.max(radii)) / panel)) - 1
        if k > 0:
            parts.append(np.broadcast_to(panel * np.arange(1, k + 1), (m, d, k)))
    if parts:
        b = np.concatenate(parts, axis=-1)
        ok = np.isfinite(b) & (b > 1e-9 * R) & (b < R * (1 - 1e-12))
        b = np.sort(np.where(ok, b, R), axis=-1)
    else:
        b = np.empty((m, d, 0))
    edges = np.concatenate([np.zeros((m, d, 1)), b, np.broadcast_to(R, (m, d, 1))], axis=-1)
    lo, length = edges[..., :-1], np.diff(edges, axis=-1)
    q = quad.radial_nodes
    gam = dim - 1 - alpha
    uj, wj = jacobi_unit(q, float(gam))
    ul, wl = legendre_unit(q)
    s0 = length[..., :1, None] * uj
    w0 = length[..., :1, None] ** (gam + 1) * wj
    s1 = lo[..., 1:, None] + length[..., 1:, None] * ul
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = np.where(length[..., 1:, None] > 0, length[..., 1:, None] * wl * s1**gam, 0.0)
    s = np.concatenate([s0, s1], axis=2)
    w = np.concatenate([w0, w1], axis=2) * (dw[None, :, None, None] * math.pi ** (-dim / 2))
    pts = origins[:, None, None, None, :] + s[..., None] * dirs[None, :, None, None, :]
    return NodeSet(pts.reshape(m, -1, dim), s.reshape(m, -1), w.reshape(m, -1))


def _evaluate(f, pts):
    shape = pts.shape[:-1]
    vals = np.asarray(f(pts.reshape(-1, pts.shape[-1])), dtype=float).reshape(shape)
    return vals


def ball_integrals(dim, quad, f, centers, radii, sources=None, scaled=False):
    """Integrals of f over B(centers_i, radii_i) against d gamma.

    With ``scaled=True`` returns e^{|c_i|^2} times the integral, which stays
    representable for balls far from the origin.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    dirs = sphere_rule(dim, quad.angular_nodes)
    srcs = [f] if sources is None else list(sources)
    br = collect_breaks(srcs, centers, dirs[0])
    ns = polar_nodes(dim, quad, centers, radii, breaks=br, dirs=dirs)
    c2 = np.sum(centers**2, axis=-1)[:, None]
    expo = -ns.sq_norm() + (c2 if scaled else 0.0)
    vals = _evaluate(f, ns.points)
    return np.sum(ns.weights * np.exp(expo) * vals, axis=-1)


def _check_dim(ctx):
    if ctx.dim > 3:
        return False
    return True


def integrate_gauss(ctx, f, B, sources=None):
    """Integral of f over the ball B against the Gauss measure."""
    if not _check_dim(ctx):
        return mc_integrate(ctx, f, B)
    c = np.asarray(B.center, dtype=float)[None, :]
    r = np.array([float(B.radius)])
    if r[0] == 0:
        return IntegralEstimate(0.0, 0.0, "polar")
    v1 = ball_integrals(ctx.dim, ctx.quad, f, c, r, sources)[0]
    v2 = ball_integrals(ctx.dim, ctx.quad.refined(), f, c, r, sources)[0]
    if not (np.isfinite(v1) and np.isfinite(v2)):
        raise ValueError("nonfinite integrand inside the ball")
    return IntegralEstimate(float(v2), float(abs(v2 - v1)), "polar")


def singular_integral(dim, quad, g, x, R, alpha, sources=None):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dirs = sphere_rule(dim, quad.angular_nodes)
    srcs = [g] if sources is None else list(sources)
    br = collect_breaks(srcs, x, dirs[0])
    ns = polar_nodes(dim, quad, x, R, alpha=alpha, breaks=br, dirs=dirs)
    vals = _evaluate(g, ns.points)
    return np.sum(ns.weights * np.exp(-ns.sq_norm()) * vals, axis=-1)


def integrate_singular(ctx, g, x, R, alpha, sources=None):
    """Integral over B(x, R) of g(y) |x - y|^{-alpha} d gamma(y)."""
    n = ctx.dim
    if not 0 <= alpha < n:
        raise ValueError("alpha must lie in [0, n)")
    if n > 3:
        raise ValueError("deterministic polar quadrature supports n <= 3")
    v1 = singular_integral(n, ctx.quad, g, x, R, alpha, sources)[0]
    v2 = singular_integral(n, ctx.quad.refined(), g, x, R, alpha, sources)[0]
    if not (np.isfinite(v1) and np.isfinite(v2)):
        raise ValueError("nonfinite integrand")
    return IntegralEstimate(float(v2), float(abs(v2 - v1)), "polar")


def whole_space_nodes(dim, quad, sources=(), r_inf=R_INF, panel=OUTER_PANEL):
    """Nodes and weights (including the Gauss density) for integrals over B(0, r_inf)."""
    dirs = sphere_rule(dim, quad.angular_nodes)
    origin = np.zeros((1, dim))
    br = collect_breaks(list(sources), origin, dirs[0])
    ns = polar_nodes(dim, quad, origin, r_inf, breaks=br, panel=panel, dirs=dirs)
    w = ns.weights[0] * np.exp(-ns.sq_norm()[0])
    keep = w > 0
    return ns.points[0][keep], w[keep]


def whole_space_tail(dim, r_inf=R_INF):
    """Gauss measure of the complement of B(0, r_inf)."""
    # gamma(|x| > R) = Gamma(n/2, R^2)/Gamma(n/2); bound by the n <= 3 closed forms
    if dim == 1:
        return float(math.erfc(r_inf))
    if dim == 2:
        return math.exp(-(r_inf**2))
    if dim == 3:
        return float(math.erfc(r_inf) + 2 * r_inf * math.exp(-(r_inf**2)) / math.sqrt(math.pi))
    return float("nan")


# Monte Carlo oracle ---------------------------------------------------------

_ERF_HALF = math.erf(1 / math.sqrt(2))


def _truncated_normal(gen, count, dim):
    """Standard normal samples truncated to [-1, 1] per coordinate (rejection from uniform)."""
    out = np.empty((count, dim))
    filled = 0
    while filled < count:
        need = count - filled
        u = gen.random((2 * need + 16, dim + 1))
        t = 2 * u[:, :dim] - 1
        # accept jointly: product of e^{-t_i^2/2} against one uniform
        logp = -0.5 * np.sum(t * t, axis=1)
        acc = np.log(u[:, dim]) <= logp
        t = t[acc][:need]
        out[filled : filled + len(t)] = t
        filled += len(t)
    return out


def mc_integrate(ctx, f, B, samples=None, seed=None):
    """Importance-sampled estimate of the integral of f over B against d gamma.

    Proposal: product of normals N(c_i, r^2) truncated to the bounding box of B.
    Deterministic given the seed (Philox counter-based stream).
    """
    n = ctx.dim
    N = int(samples or ctx.quad.mc_samples)
    key = int(ctx.quad.seed if seed is None else seed)
    c = np.asarray(B.center, dtype=float)
    r = float(B.radius)
    if r == 0:
        return IntegralEstimate(0.0, 0.0, "monte_carlo")
    gen = np.random.Generator(np.random.Philox(key=key))
    t = _truncated_normal(gen, N, n)
    y = c + r * t
    inside = np.sum(t * t, axis=1) < 1.0
    # proposal density: prod_i exp(-t_i^2/2) / (r sqrt(2 pi) erf(1/sqrt 2))
    log_q = -0.5 * np.sum(t * t, axis=1) - n * math.log(r * math.sqrt(2 * math.pi) * _ERF_HALF)
    log_p = -np.sum(y * y, axis=1) - 0.5 * n * math.log(math.pi)
    vals = np.zeros(N)
    if np.any(inside):
        vals[inside] = np.asarray(f(y[inside]), dtype=float) * np.exp(log_p[inside] - log_q[inside])
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(N))
    return IntegralEstimate(mean, 3.0 * se, "monte_carlo")


@dataclass
class FlatNodes:
    """Polar nodes with zero-length segments removed.

    Nodes come in runs of ``q`` per segment; ``seg_owner`` maps segments to
    regions and ``seg_dir`` to direction indices.
    """

    points: np.ndarray  # (K, n)
    radius: np.ndarray  # (K,)
    weights: np.ndarray  # (K,)
    seg_owner: np.ndarray  # (S,)
    seg_dir: np.ndarray  # (S,)
    q: int
    count: int  # number of regions

    @property
    def owner(self):
        return np.repeat(self.seg_owner, self.q)

    def sum(self, vals):
        per_seg = np.asarray(vals).reshape(-1, self.q).sum(axis=1)
        return np.bincount(self.seg_owner, weights=per_seg, minlength=self.count)


def polar_nodes_flat(dim, quad, origins, radii, breaks=None, dirs=None, alpha=0.0):
    """Same rule as ``polar_nodes`` but returned as flat arrays without padding."""
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), origins.shape[:1])
    if dirs is None:
        dirs, dw = sphere_rule(dim, quad.angular_nodes)
    else:
        dirs, dw = dirs
    m, d = len(origins), len(dirs)
    R = radii[:, None, None]
    if breaks is not None and breaks.shape[-1]:
        b = np.broadcast_to(breaks, (m, d, breaks.shape[-1]))
        ok = np.isfinite(b) & (b > 1e-9 * R) & (b < R * (1 - 1e-12))
        b = np.sort(np.where(ok, b, R), axis=-1)
    else:
        b = np.empty((m, d, 0))
    edges = np.concatenate([np.zeros((m, d, 1)), b, np.broadcast_to(R, (m, d, 1))], axis=-1)
    lo, length = edges[..., :-1], np.diff(edges, axis=-1)
    seg = np.nonzero(length > 0)
    L = length[seg][:, None]
    lo = lo[seg][:, None]
    q = quad.radial_nodes
    gam = dim - 1 - alpha
    ul, wl = legendre_unit(q)
    if gam == 0:
        s = lo + L * ul
        w = L * wl
    else:
        first = (seg[2] == 0)[:, None]
        uj, wj = jacobi_unit(q, float(gam))
        s = lo + L * np.where(first, uj, ul)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(first, L ** (gam + 1) * wj, L * wl * s**gam)
    w = w * (dw[seg[1]] * math.pi ** (-dim / 2))[:, None]
    pts = origins[seg[0]][:, None, :] + s[..., None] * dirs[seg[1]][:, None, :]
    return FlatNodes(pts.reshape(-1, dim), s.reshape(-1), w.reshape(-1), seg[0], seg[1], q, m)

"""BMO(gamma), BLO_a(gamma) and p-oscillation estimators over deterministic ball samples."""

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .functions import ball_sample_points, lp_norm
from .geometry import Ball, m_func
from .quadrature import R_INF, collect_breaks, polar_nodes, sphere_rule

DEFAULT_FRACTIONS = (0.25, 0.5, 0.75, 1.0)
DEFAULT_SPACING = {1: 0.25, 2: 0.5, 3: 1.0}


@dataclass(frozen=True)
class BallSample:
    """Balls of class a: centers on a cubic lattice inside |c| <= extent, radii a*m(c)*fraction."""

    dim: int
    a: float = 1.0
    spacing: Optional[float] = None
    extent: float = R_INF
    fractions: Tuple[float, ...] = DEFAULT_FRACTIONS
    extra: Tuple[Ball, ...] = ()

    def __post_init__(self):
        if self.spacing is None:
            object.__setattr__(self, "spacing", DEFAULT_SPACING.get(self.dim, 1.0))
        if not self.spacing > 0 or not self.a > 0:
            raise ValueError("spacing and a must be positive")
        if any(not 0 < t <= 1 for t in self.fractions):
            raise ValueError("radius fractions must lie in (0, 1]")
        for b in self.extra:
            if not 0 < b.radius <= self.a * m_func(b.c):
                raise ValueError("extra balls must belong to the sample class")

    def refined(self):
        return replace(self, spacing=self.spacing / 2)

    @property
    def balls(self):
        c, r = self.arrays()
        return [Ball(tuple(ci), ri) for ci, ri in zip(c, r)]

    def arrays(self):
        k = int(math.floor(self.extent / self.spacing + 1e-9))
        axis = self.spacing * np.arange(-k, k + 1)
        grid = np.array(list(itertools.product(axis, repeat=self.dim)), dtype=float)
        grid = grid[np.sum(grid**2, axis=1) <= self.extent**2 + 1e-12]
        fr = np.asarray(self.fractions, dtype=float)
        centers = np.repeat(grid, len(fr), axis=0)
        radii = (self.a * m_func(grid)[:, None] * fr[None, :]).reshape(-1)
        if self.extra:
            centers = np.concatenate([centers, np.array([b.center for b in self.extra])])
            radii = np.concatenate([radii, np.array([b.radius for b in self.extra])])
        return centers, radii

    def __len__(self):
        return len(self.arrays()[1])


@dataclass
class SupEstimate:
    """Maximum over a ball sample together with the maximizing ball and per-ball values."""

    value: float
    ball: Optional[Ball]
    per_ball: np.ndarray = field(repr=False, default=None)

    def __float__(self):
        return float(self.value)


@dataclass
class BLOEstimate:
    value: float  # L^1 term + max bracket
    l1: float
    bracket: float
    ball: Optional[Ball]
    negative_bracket: bool  # raw bracket below zero somewhere (sampling artifact signal)
    brackets: np.ndarray = field(repr=False, default=None)
    oscillations: np.ndarray = field(repr=False, default=None)

    def __float__(self):
        return float(self.value)


def sample_nodes(ctx, sample, sources, budget=1_000_000):
    """Yield (slice, weights (k, P), points (k, P, n)) over the sample's balls in chunks.

    Weights are scaled by e^{|c|^2}; ratios of sums over one ball are what the
    estimators use, so the scale cancels.
    """
    centers, radii = sample.arrays()
    if len(radii) == 0:
        raise ValueError("empty ball sample")
    dirs = sphere_rule(ctx.dim, ctx.quad.angular_nodes)
    per = len(dirs[0]) * ctx.quad.radial_nodes * 6
    step = max(1, budget // per)
    for i in range(0, len(radii), step):
        sl = slice(i, min(len(radii), i + step))
        c = centers[sl]
        br = collect_breaks(sources, c, dirs[0])
        ns = polar_nodes(ctx.dim, ctx.quad, c, radii[sl], breaks=br, dirs=dirs)
        w = ns.weights * np.exp(np.sum(c**2, axis=1)[:, None] - ns.sq_norm())
        yield sl, w, ns.points


def _vals(f, pts):
    return np.asarray(f(pts.reshape(-1, pts.shape[-1])), dtype=float).reshape(pts.shape[:-1])


def oscillations(ctx, f, sample, p=1.0, sources=None):
    """Per-ball ((1/gamma(B)) int_B |f - f_B|^p d gamma)^{1/p}, averages normalized by node mass."""
    srcs = [f] if sources is None else sources
    out = np.empty(len(sample))
    for sl, w, pts in sample_nodes(ctx, sample, srcs):
        v = _vals(f, pts)
        mass = np.sum(w, axis=1)
        avg = np.sum(w * v, axis=1) / mass
        out[sl] = (np.sum(w * np.abs(v - avg[:, None]) ** p, axis=1) / mass) ** (1.0 / p)
    return out


def _sup(sample, per_ball):
    if len(per_ball) == 0:
        raise ValueError("empty ball sample")
    k = int(np.argmax(per_ball))
    c, r = sample.arrays()
    return SupEstimate(float(per_ball[k]), Ball(tuple(c[k]), r[k]), per_ball)


def bmo_star_norm(ctx, f, sample, sources=None):
    """||f||_* estimated as the max mean oscillation over the sample (a lower bound)."""
    return _sup(sample, oscillations(ctx, f, sample, 1.0, sources))


def bmo_star_p_norm(ctx, f, sample, p, sources=None):
    if p < 1:
        raise ValueError("p must be >= 1")
    return _sup(sample, oscillations(ctx, f, sample, p, sources))


def bmo_norm(ctx, f, sample, sources=None, l1=None):
    """||f||_* + ||f||_{L^1(gamma)}."""
    star = bmo_star_norm(ctx, f, sample, sources)
    l1 = lp_norm(ctx, f, 1.0) if l1 is None else l1
    return SupEstimate(star.value + l1, star.ball, star.per_ball)


def blo_norm(ctx, f, sample, sources=None, sample_count=128, l1=None):
    """||f||_{L^1} + max over sampled B of (f_B - essinf_B f).

    The infimum is the minimum over the ball's quadrature nodes and a nested
    low-discrepancy sample (an upper bound of the true essential infimum),
    so brackets are lower bounds. Averages are node-weighted, which also makes
    the per-ball bound oscillation <= 2 * bracket hold exactly.
    """
    srcs = [f] if sources is None else sources
    centers, radii = sample.arrays()
    brackets = np.empty(len(radii))
    oscs = np.empty(len(radii))
    for sl, w, pts in sample_nodes(ctx, sample, srcs):
        v = _vals(f, pts)
        mass = np.sum(w, axis=1)
        avg = np.sum(w * v, axis=1) / mass
        oscs[sl] = np.sum(w * np.abs(v - avg[:, None]), axis=1) / mass
        node_min = np.min(np.where(w > 0, v, np.inf), axis=1)
        extra = np.stack([ball_sample_points(c, r, sample_count) for c, r in zip(centers[sl], radii[sl])])
        smin = np.min(_vals(f, extra), axis=1)
        brackets[sl] = avg - np.minimum(node_min, smin)
    k = int(np.argmax(brackets))
    l1 = lp_norm(ctx, f, 1.0) if l1 is None else l1
    return BLOEstimate(
        value=float(l1 + brackets[k]),
        l1=float(l1),
        bracket=float(brackets[k]),
        ball=Ball(tuple(centers[k]), radii[k]),
        negative_bracket=bool(np.any(brackets < 0)),
        brackets=brackets,
        oscillations=oscs,
    )

"""Geometry of the Gauss measure: admissible balls, ball measures and the V kernel."""

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from . import special
from .quadrature import QuadratureConfig, legendre_unit, log_angular_scaled


@dataclass(frozen=True)
class Ball:
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not all(math.isfinite(v) for v in c) or not math.isfinite(self.radius):
            raise ValueError("ball center and radius must be finite")
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")

    @property
    def dim(self):
        return len(self.center)

    @property
    def c(self):
        return np.asarray(self.center)

    def contains(self, points):
        """Open-ball membership for an (m, n) array (or a single point)."""
        p = np.asarray(points, dtype=float)
        return np.sum((p - self.c) ** 2, axis=-1) < self.radius**2

    def scaled(self, factor):
        return Ball(self.center, self.radius * factor)

    def to_dict(self):
        return {"center": list(self.center), "radius": self.radius}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["center"]), d["radius"])


@dataclass(frozen=True)
class AdmissibleClass:
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("class parameter a must be positive")

    def __contains__(self, B):
        return is_admissible(B, self)


@dataclass(frozen=True)
class GaussContext:
    dim: int
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be >= 1")

    def refined(self):
        return GaussContext(self.dim, self.quad.refined())


def m_func(points):
    """Vectorized admissibility function min(1, 1/|x|) over the last axis."""
    r = np.sqrt(np.sum(np.asarray(points, dtype=float) ** 2, axis=-1))
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, 1.0 / r)


def admissibility_radius(x):
    """m(x) = min(1, 1/|x|)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    return float(m_func(x))


def is_admissible(B, cls):
    a = cls.a if isinstance(cls, AdmissibleClass) else float(cls)
    return bool(0 < B.radius <= a * admissibility_radius(B.center))


def log_gauss_ball_arrays(dim, quad, centers, radii):
    """log gamma(B(c_i, r_i)) for arrays of centers (m, n) and radii (m,)."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:1])
    out = np.full(radii.shape, -np.inf)
    pos = radii > 0
    if not np.any(pos):
        return out
    c, r = centers[pos], radii[pos]
    if dim == 1:
        out[pos] = special.log_erf_diff(c[:, 0] - r, c[:, 0] + r) - math.log(2)
        return out
    rho = np.sqrt(np.sum(c**2, axis=-1))
    # panel width follows the angular-kernel scale 1/(2 rho) and the unit Gaussian scale
    h = 0.5 / (1.0 + rho)
    npan = np.ceil(r / h).astype(int)
    kmax = int(npan.max())
    j = np.arange(kmax + 1)
    edges = np.minimum(j[None, :] * h[:, None], r[:, None])
    lo, ln = edges[:, :-1], np.diff(edges, axis=1)
    u, w = legendre_unit(max(quad.radial_nodes, 16))
    s = lo[..., None] + ln[..., None] * u
    shift = -np.maximum(rho - r, 0.0) ** 2
    logi = (-(rho[:, None, None] - s) ** 2 + log_angular_scaled(dim, 2 * rho[:, None, None] * s)
            - shift[:, None, None])
    with np.errstate(divide="ignore"):
        logi = logi + (dim - 1) * np.log(s)
    total = np.sum(ln[..., None] * w * np.exp(logi), axis=(1, 2))
    out[pos] = np.log(total) + shift - 0.5 * dim * math.log(math.pi)
    return out


def log_gauss_ball(ctx, B):
    return float(log_gauss_ball_arrays(ctx.dim, ctx.quad, np.asarray(B.center)[None, :], B.radius)[0])


def gauss_ball(ctx, B):
    """Gauss measure of the ball B."""
    if len(B.center) != ctx.dim:
        raise ValueError("ball dimension does not match context")
    return float(math.exp(log_gauss_ball(ctx, B)))


def log_v_arrays(dim, quad, x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    rho = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    x = np.broadcast_to(x, y.shape) if len(x) < len(y) else x
    return log_gauss_ball_arrays(dim, quad, x, rho)


def v_kernel(ctx, x, y):
    """V(x, y) = gamma(B(x, |x - y|))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(np.exp(log_v_arrays(ctx.dim, ctx.quad, x[None], y[None])[0]))


def v_kernel_partial_arrays(dim, x, y, i):
    """dV/dy_i for arrays x, y of shape (m, n); i is zero-based."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = y - x
    rho = np.sqrt(np.sum(d**2, axis=-1))
    if np.any(rho == 0):
        raise ValueError("derivative undefined at y = x")
    ax = np.sqrt(np.sum(x**2, axis=-1))
    # surface integral of e^{-|rho xi + x|^2} = e^{-(rho-|x|)^2} * e^{-t} A_n(t), t = 2 rho |x|
    logs = -(rho - ax) ** 2 + log_angular_scaled(dim, 2 * rho * ax) + (dim - 2) * np.log(rho)
    return math.pi ** (-dim / 2) * d[:, i] * np.exp(logs)


def v_kernel_partial(ctx, x, y, i):
    """Partial derivative of V(x, y) in y_i (i is zero-based).

    Follows direct radial differentiation, which carries the factor (y_i - x_i).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not 0 <= i < ctx.dim:
        raise IndexError("coordinate index out of range")
    return float(v_kernel_partial_arrays(ctx.dim, x[None], y[None], i)[0])


def doubling_bound(n, a, tau):
    return (2 * tau + 1) ** n * math.exp(4 * a * (tau + 1) + a * a)


def doubling_ratio(ctx, B, tau):
    """gamma(B(c, (2 tau + 1) r)) / gamma(B)."""
    if B.radius == 0:
        raise ValueError("doubling ratio undefined for a degenerate ball")
    big = log_gauss_ball(ctx, B.scaled(2 * tau + 1))
    return float(math.exp(big - log_gauss_ball(ctx, B)))


def eccentricity_bounds(a):
    """Bounds on |c|^2 - |x|^2 for x in a ball of class a (log form of the exponential band)."""
    return -2 * a - a * a, 2 * a


def measure_band(n, a):
    """Band containing gamma(B) / (e^{-|c|^2} vol_n r^n) for B of class a."""
    k = math.pi ** (-n / 2)
    return k * math.exp(-2 * a - a * a), k * math.exp(2 * a)


def measure_ratio(ctx, B):
    n = ctx.dim
    from .quadrature import ball_volume

    lg = log_gauss_ball(ctx, B)
    c2 = float(np.sum(np.asarray(B.center) ** 2))
    return math.exp(lg + c2 - math.log(ball_volume(n)) - n * math.log(B.radius))


def kernel_ratio_arrays(dim, quad, x, s):
    """e^{-|x|^2} s^n / V(x, y) for |x - y| = s, vectorized over rows of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lg = log_gauss_ball_arrays(dim, quad, x, s)
    return np.exp(-np.sum(x**2, axis=-1) + dim * np.log(s) - lg)


def kernel_band(ctx, a, r_max=12.0, n_x=65, n_s=64):
    """Measured band [lo, hi] of e^{-|x|^2}|x-y|^n / V(x,y) for |x-y| <= a m(x).

    Sweeps |x| over [0, r_max] along the first axis (V depends on x only through
    |x| and |x-y|) and s over a log grid down to 1e-8 a m(x).
    """
    n = ctx.dim
    ax = np.linspace(0.0, r_max, n_x)
    frac = np.concatenate([np.geomspace(1e-8, 1.0, n_s)])
    X = np.zeros((n_x * n_s, n))
    X[:, 0] = np.repeat(ax, n_s)
    S = (frac[None, :] * a * m_func(ax[:, None])[:, None]).reshape(-1)
    vals = kernel_ratio_arrays(n, ctx.quad, X, S)
    return float(vals.min()), float(vals.max())

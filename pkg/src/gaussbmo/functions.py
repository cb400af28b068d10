"""Declarative test functions, Lebesgue norms against gamma, and atoms."""

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .geometry import Ball, gauss_ball, is_admissible, log_gauss_ball
from .quadrature import (
    R_INF,
    ball_integrals,
    collect_breaks,
    integrate_gauss,
    polar_nodes,
    sphere_hits,
    sphere_rule,
    whole_space_nodes,
)


def _pts(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


class FunctionSpec:
    """Base class: a vectorized real function on R^n with optional declared support."""

    kind = "abstract"
    support: Optional[Ball] = None

    def __call__(self, x):
        p = _pts(x)
        v = np.asarray(self._eval(p), dtype=float)
        v = np.broadcast_to(v, p.shape[:1]).astype(float)
        if self.support is not None:
            v = np.where(self.support.contains(p), v, 0.0)
        return v

    def _eval(self, p):
        raise NotImplementedError

    def _breaks(self, origins, dirs):
        return None

    def ray_breaks(self, origins, dirs):
        """Ray parameters (m, d, k) where the function may jump along origin + s*dir."""
        parts = [np.empty((len(origins), len(dirs), 0))]
        own = self._breaks(origins, dirs)
        if own is not None:
            parts.append(own)
        if self.support is not None:
            parts.append(sphere_hits(origins, dirs, self.support.c[None, :], [self.support.radius]))
        return np.concatenate(parts, axis=-1)

    def support_balls(self):
        """Balls whose boundaries carry discontinuities (used to grade outer quadrature)."""
        return [self.support] if self.support is not None else []

    @property
    def is_constant(self):
        return False

    def to_dict(self):
        raise TypeError(f"{type(self).__name__} has no textual form")

    def to_text(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), allow_nan=False)

    def _sup(self):
        return None if self.support is None else self.support.to_dict()

    # algebra ---------------------------------------------------------------
    def __add__(self, other):
        other = other if isinstance(other, FunctionSpec) else Constant(float(other))
        return LinearCombination(((1.0, self), (1.0, other)))

    __radd__ = __add__

    def __sub__(self, other):
        other = other if isinstance(other, FunctionSpec) else Constant(float(other))
        return LinearCombination(((1.0, self), (-1.0, other)))

    def __neg__(self):
        return LinearCombination(((-1.0, self),))

    def __mul__(self, other):
        if isinstance(other, FunctionSpec):
            return Product((self, other))
        return LinearCombination(((float(other), self),))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=True)
class Constant(FunctionSpec):
    value: float
    support: Optional[Ball] = None
    kind = "constant"

    def _eval(self, p):
        return np.full(len(p), float(self.value))

    @property
    def is_constant(self):
        return self.support is None

    def to_dict(self):
        return {"kind": self.kind, "value": float(self.value), "support": self._sup()}


@dataclass(frozen=True)
class IndicatorBall(FunctionSpec):
    ball: Ball
    support: Optional[Ball] = None
    kind = "indicator_ball"

    def _eval(self, p):
        return self.ball.contains(p).astype(float)

    def _breaks(self, origins, dirs):
        return sphere_hits(origins, dirs, self.ball.c[None, :], [self.ball.radius])

    def support_balls(self):
        return [self.ball] + super().support_balls()

    def to_dict(self):
        return {"kind": self.kind, "ball": self.ball.to_dict(), "support": self._sup()}


@dataclass(frozen=True)
class IndicatorHalfspace(FunctionSpec):
    """Indicator of {x : <normal, x> > offset}."""

    normal: Tuple[float, ...]
    offset: float = 0.0
    support: Optional[Ball] = None
    kind = "indicator_halfspace"

    def _eval(self, p):
        return (p @ np.asarray(self.normal, dtype=float) > self.offset).astype(float)

    def _breaks(self, origins, dirs):
        nu = np.asarray(self.normal, dtype=float)
        den = dirs @ nu
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (self.offset - origins @ nu)[:, None] / den[None, :]
        return np.where(np.isfinite(s), s, np.nan)[..., None]

    def to_dict(self):
        return {"kind": self.kind, "normal": [float(v) for v in self.normal], "offset": float(self.offset),
                "support": self._sup()}


@dataclass(frozen=True)
class Polynomial(FunctionSpec):
    """Sum of coef * prod_i x_i^e_i over terms (coef, (e_1, ..., e_n))."""

    terms: Tuple[Tuple[float, Tuple[int, ...]], ...]
    support: Optional[Ball] = None
    kind = "polynomial"

    def __post_init__(self):
        t = tuple((float(c), tuple(int(e) for e in ex)) for c, ex in self.terms)
        if not t:
            raise ValueError("polynomial needs at least one term")
        object.__setattr__(self, "terms", t)

    def _eval(self, p):
        out = np.zeros(len(p))
        for c, ex in self.terms:
            out += c * np.prod(p[:, : len(ex)] ** np.asarray(ex), axis=1)
        return out

    def to_dict(self):
        return {"kind": self.kind, "terms": [[c, list(ex)] for c, ex in self.terms], "support": self._sup()}


@dataclass(frozen=True)
class SquaredNorm(FunctionSpec):
    support: Optional[Ball] = None
    kind = "squared_norm"

    def _eval(self, p):
        return np.sum(p * p, axis=1)

    def to_dict(self):
        return {"kind": self.kind, "support": self._sup()}


@dataclass(frozen=True)
class GaussianBump(FunctionSpec):
    """height * exp(-|x - center|^2 / width^2)."""

    center: Tuple[float, ...]
    width: float
    height: float = 1.0
    support: Optional[Ball] = None
    kind = "gaussian_bump"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    def _eval(self, p):
        d = p - np.asarray(self.center)
        return self.height * np.exp(-np.sum(d * d, axis=1) / self.width**2)

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "width": float(self.width),
                "height": float(self.height), "support": self._sup()}


@dataclass(frozen=True)
class Clip(FunctionSpec):
    """inner clipped to [lo, hi]."""

    inner: FunctionSpec
    lo: float
    hi: float
    support: Optional[Ball] = None
    kind = "clip"

    def _eval(self, p):
        return np.clip(self.inner(p), self.lo, self.hi)

    def _breaks(self, origins, dirs):
        return self.inner.ray_breaks(origins, dirs)

    def support_balls(self):
        return self.inner.support_balls() + super().support_balls()

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(), "lo": float(self.lo), "hi": float(self.hi),
                "support": self._sup()}


@dataclass(frozen=True)
class LinearCombination(FunctionSpec):
    terms: Tuple[Tuple[float, FunctionSpec], ...]
    support: Optional[Ball] = None
    kind = "linear_combination"

    def __post_init__(self):
        t = tuple((float(c), f) for c, f in self.terms)
        if not t:
            raise ValueError("linear combination must be non-empty")
        object.__setattr__(self, "terms", t)

    def _eval(self, p):
        out = np.zeros(len(p))
        for c, f in self.terms:
            out += c * f(p)
        return out

    def _breaks(self, origins, dirs):
        return collect_breaks([f for _, f in self.terms], origins, dirs)

    def support_balls(self):
        return [b for _, f in self.terms for b in f.support_balls()] + super().support_balls()

    @property
    def is_constant(self):
        return self.support is None and all(f.is_constant for _, f in self.terms)

    def to_dict(self):
        return {"kind": self.kind, "terms": [[c, f.to_dict()] for c, f in self.terms], "support": self._sup()}


@dataclass(frozen=True)
class Product(FunctionSpec):
    factors: Tuple[FunctionSpec, ...]
    support: Optional[Ball] = None
    kind = "product"

    def _eval(self, p):
        out = np.ones(len(p))
        for f in self.factors:
            out = out * f(p)
        return out

    def _breaks(self, origins, dirs):
        return collect_breaks(self.factors, origins, dirs)

    def support_balls(self):
        return [b for f in self.factors for b in f.support_balls()] + super().support_balls()

    @property
    def is_constant(self):
        return self.support is None and all(f.is_constant for f in self.factors)

    def to_dict(self):
        return {"kind": self.kind, "factors": [f.to_dict() for f in self.factors], "support": self._sup()}


@dataclass(frozen=True)
class PositivePart(FunctionSpec):
    inner: FunctionSpec
    support: Optional[Ball] = None
    kind = "positive_part"

    def _eval(self, p):
        return np.maximum(self.inner(p), 0.0)

    def _breaks(self, origins, dirs):
        return self.inner.ray_breaks(origins, dirs)

    def support_balls(self):
        return self.inner.support_balls() + super().support_balls()

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(), "support": self._sup()}


@dataclass(frozen=True)
class NegativePart(FunctionSpec):
    inner: FunctionSpec
    support: Optional[Ball] = None
    kind = "negative_part"

    def _eval(self, p):
        return np.maximum(-self.inner(p), 0.0)

    def _breaks(self, origins, dirs):
        return self.inner.ray_breaks(origins, dirs)

    def support_balls(self):
        return self.inner.support_balls() + super().support_balls()

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(), "support": self._sup()}


@dataclass(frozen=True)
class Atom(FunctionSpec):
    """scale * (profile - mean) restricted to ball."""

    ball: Ball
    r: float
    profile: FunctionSpec
    mean: float
    scale: float
    kind = "atom"

    @property
    def support(self):
        return self.ball

    def _eval(self, p):
        return self.scale * (self.profile(p) - self.mean)

    def _breaks(self, origins, dirs):
        return self.profile.ray_breaks(origins, dirs)

    def support_balls(self):
        return [self.ball] + self.profile.support_balls()

    def to_dict(self):
        return {"kind": self.kind, "ball": self.ball.to_dict(), "r": float(self.r), "profile": self.profile.to_dict(),
                "mean": float(self.mean), "scale": float(self.scale)}


@dataclass(frozen=True, eq=False)
class CallableSpec(FunctionSpec):
    """Wraps an arbitrary vectorized callable; library use only (no textual form)."""

    fn: Callable
    support: Optional[Ball] = None
    breaks_from: Tuple = ()
    kind = "callable"

    def _eval(self, p):
        return self.fn(p)

    def _breaks(self, origins, dirs):
        return collect_breaks(self.breaks_from, origins, dirs)


@dataclass(frozen=True)
class AtomSpec:
    ball: Optional[Ball] = None
    r: float = 2.0
    profile: Optional[FunctionSpec] = None
    is_constant_one: bool = False

    def __post_init__(self):
        if not self.r > 1:
            raise ValueError("atom exponent r must exceed 1")


# textual form ----------------------------------------------------------------

def _ball(d):
    return None if d is None else Ball.from_dict(d)


def from_dict(d):
    kind = d["kind"]
    sup = _ball(d.get("support"))
    if kind == "constant":
        return Constant(float(d["value"]), sup)
    if kind == "indicator_ball":
        return IndicatorBall(Ball.from_dict(d["ball"]), sup)
    if kind == "indicator_halfspace":
        return IndicatorHalfspace(tuple(d["normal"]), float(d["offset"]), sup)
    if kind == "polynomial":
        return Polynomial(tuple((c, tuple(ex)) for c, ex in d["terms"]), sup)
    if kind == "squared_norm":
        return SquaredNorm(sup)
    if kind == "gaussian_bump":
        return GaussianBump(tuple(d["center"]), float(d["width"]), float(d.get("height", 1.0)), sup)
    if kind == "clip":
        return Clip(from_dict(d["inner"]), float(d["lo"]), float(d["hi"]), sup)
    if kind == "linear_combination":
        return LinearCombination(tuple((c, from_dict(f)) for c, f in d["terms"]), sup)
    if kind == "product":
        return Product(tuple(from_dict(f) for f in d["factors"]), sup)
    if kind == "positive_part":
        return PositivePart(from_dict(d["inner"]), sup)
    if kind == "negative_part":
        return NegativePart(from_dict(d["inner"]), sup)
    if kind == "atom":
        return Atom(Ball.from_dict(d["ball"]), float(d["r"]), from_dict(d["profile"]), float(d["mean"]),
                    float(d["scale"]))
    raise ValueError(f"unknown function kind: {kind!r}")


def from_text(text):
    return from_dict(json.loads(text))


# evaluation and norms --------------------------------------------------------

def evaluate(f, x):
    """Pointwise value of f at a single point (or an (m, n) array of points)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation point must be finite")
    v = f(x)
    if not np.all(np.isfinite(v)):
        raise ValueError("nonfinite function value (malformed spec)")
    return float(v[0]) if x.ndim == 1 else v


def outer_nodes(ctx, sources=(), r_inf=R_INF, grading=True):
    """Whole-space nodes with breaks at the discontinuities of ``sources``.

    With ``grading`` the radial mesh is also split on spheres around every
    support ball at radii r*2^k, which resolves images of small-ball inputs.
    """
    shells = []
    for src in sources:
        for b in getattr(src, "support_balls", lambda: [])():
            rad = b.radius
            while rad < 2.0:
                shells.append((b.center, rad))
                rad *= 2
    extra = []
    if grading and shells:
        extra.append(_Shells(shells))
    return whole_space_nodes(ctx.dim, ctx.quad, list(sources) + extra, r_inf)


class _Shells:
    def __init__(self, shells):
        self.c = np.array([s[0] for s in shells], dtype=float)
        self.r = np.array([s[1] for s in shells], dtype=float)

    def ray_breaks(self, origins, dirs):
        return sphere_hits(origins, dirs, self.c, self.r)


def lp_norm(ctx, f, p, domain=None, return_tail=False):
    """(integral |f|^p d gamma)^{1/p} over a Ball or over B(0, R_inf) (domain=None or a radius)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if domain is None and getattr(f, "is_constant", False):
        # gamma is a probability measure: exact, and keeps constant rows bit-exact
        out = abs(float(f(np.zeros((1, ctx.dim)))[0]))
        return (out, 0.0) if return_tail else out
    if isinstance(domain, Ball):
        val = ball_integrals(ctx.dim, ctx.quad, lambda y: np.abs(f(y)) ** p, domain.c[None, :], [domain.radius],
                             sources=[f])[0]
        tail = 0.0
    else:
        r_inf = R_INF if domain is None else float(domain)
        pts, w = outer_nodes(ctx, [f], r_inf)
        val = float(np.sum(w * np.abs(f(pts)) ** p))
        from .quadrature import whole_space_tail

        tail = whole_space_tail(ctx.dim, r_inf)
    out = float(val) ** (1.0 / p)
    return (out, tail) if return_tail else out


def default_lambda_grid(values, count=64, span=1e-3):
    vmax = float(np.max(np.abs(values))) if len(values) else 0.0
    if vmax <= 0:
        return np.array([1.0])
    return np.geomspace(vmax * span, vmax, count)


def weak_from_samples(values, weights, p, lambda_grid):
    a = np.abs(values)
    lam = np.asarray(lambda_grid, dtype=float)
    order = np.argsort(a)
    a_s, w_s = a[order], weights[order]
    tail = np.concatenate([np.cumsum(w_s[::-1])[::-1], [0.0]])
    idx = np.searchsorted(a_s, lam, side="right")
    meas = tail[idx]
    return float(np.max(lam * meas ** (1.0 / p)))


def weak_lp_quasinorm(ctx, f, p, lambda_grid=None, r_inf=R_INF):
    """max over the grid of lambda * gamma(|f| > lambda)^{1/p} (a lower bound of the supremum)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    pts, w = outer_nodes(ctx, [f], r_inf)
    vals = f(pts)
    grid = default_lambda_grid(vals) if lambda_grid is None else lambda_grid
    if len(grid) == 0:
        raise ValueError("lambda grid must be non-empty")
    return weak_from_samples(vals, w, p, grid)


def ball_average(ctx, f, B):
    if B.radius <= 0:
        raise ValueError("degenerate ball")
    return integrate_gauss(ctx, f, B).value / gauss_ball(ctx, B)


def _radical_inverse(k, base):
    out = np.zeros(len(k))
    f = 1.0 / base
    k = k.copy()
    while np.any(k > 0):
        out += (k % base) * f
        k //= base
        f /= base
    return out


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def ball_sample_points(center, radius, count):
    """Deterministic low-discrepancy points inside B(center, radius); prefixes are nested."""
    c = np.asarray(center, dtype=float)
    n = len(c)
    k = np.arange(1, count + 1)
    u = np.stack([_radical_inverse(k, _PRIMES[i]) for i in range(max(n, 1))], axis=1)
    if n == 1:
        return c + radius * (2 * u - 1)
    if n == 2:
        rho = radius * np.sqrt(u[:, 0])
        th = 2 * np.pi * u[:, 1]
        return c + np.stack([rho * np.cos(th), rho * np.sin(th)], axis=1)
    if n == 3:
        rho = radius * np.cbrt(u[:, 0])
        z = 2 * u[:, 1] - 1
        ph = 2 * np.pi * u[:, 2]
        s = np.sqrt(1 - z * z)
        return c + rho[:, None] * np.stack([s * np.cos(ph), s * np.sin(ph), z], axis=1)
    # n >= 4: Halton points of the cube, kept when inside the ball (still nested)
    pts = 2 * u - 1
    pts = pts[np.sum(pts * pts, axis=1) < 1]
    return c + radius * pts


def ess_inf_estimate(ctx, f, B, sample_count=128):
    """Minimum of f over a low-discrepancy sample of B (an upper bound of the essential infimum)."""
    if sample_count < 100:
        raise ValueError("sample_count must be >= 100")
    pts = ball_sample_points(B.center, B.radius, sample_count)
    return float(np.min(f(pts)))


# atoms -----------------------------------------------------------------------

def _ball_nodes(ctx, B, sources):
    c = B.c[None, :]
    dirs = sphere_rule(ctx.dim, ctx.quad.angular_nodes)
    br = collect_breaks(sources, c, dirs[0])
    ns = polar_nodes(ctx.dim, ctx.quad, c, [B.radius], breaks=br, dirs=dirs)
    w = ns.weights[0] * np.exp(-ns.sq_norm()[0] + float(np.sum(B.c**2)))
    return ns.points[0], w


def make_atom(ctx, spec):
    """Center the profile on the ball, then scale its L^r norm to gamma(B)^{1/r - 1}."""
    if spec.is_constant_one:
        return Constant(1.0)
    B = spec.ball
    if B is None or spec.profile is None:
        raise ValueError("atom needs a ball and a profile")
    if not is_admissible(B, 1.0):
        raise ValueError("atom ball must belong to the class a = 1")
    pts, w = _ball_nodes(ctx, B, [spec.profile, IndicatorBall(B)])
    prof = spec.profile(pts)
    mean = float(np.sum(w * prof) / np.sum(w))
    lg = log_gauss_ball(ctx, B)
    c2 = float(np.sum(B.c**2))
    # scaled weights carry e^{|c|^2}; the true integral is e^{-|c|^2} sum(w * ...)
    size = float(np.sum(w * np.abs(prof) ** spec.r))
    norm_r = float(np.sum(w * np.abs(prof - mean) ** spec.r))
    if not norm_r > 1e-20 * max(size, 1e-300):
        raise ValueError("profile is constant on the ball (zero after centering)")
    log_norm = (math.log(norm_r) - c2) / spec.r
    scale = math.exp((1.0 / spec.r - 1.0) * lg - log_norm)
    return Atom(B, float(spec.r), spec.profile, mean, scale)


@dataclass
class AtomCheck:
    ok: bool
    reasons: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_atom(ctx, f, spec, tol=1e-6):
    """Check the atom conditions; returns a truthy/falsy AtomCheck with reason codes."""
    if spec.is_constant_one:
        probe = ball_sample_points(np.zeros(ctx.dim), 5.0, 128)
        ok = bool(np.all(f(probe) == 1.0))
        return AtomCheck(ok, [] if ok else ["not_constant_one"])
    B = spec.ball
    reasons = []
    if not is_admissible(B, 1.0):
        reasons.append("ball_not_admissible")
    sup = f.support
    if sup is not None:
        inside = np.linalg.norm(sup.c - B.c) + sup.radius <= B.radius * (1 + 1e-12)
        if not inside:
            reasons.append("support_outside_ball")
    else:
        probe = ball_sample_points(B.center, 2 * B.radius, 512)
        probe = probe[~B.contains(probe)]
        if np.any(f(probe) != 0):
            reasons.append("support_outside_ball")
    pts, w = _ball_nodes(ctx, B, [f, IndicatorBall(B)])
    vals = f(pts)
    c2 = float(np.sum(B.c**2))
    integral = float(np.sum(w * vals)) * math.exp(-c2)
    if abs(integral) > tol:
        reasons.append("mean_not_zero")
    lg = log_gauss_ball(ctx, B)
    lr = float(np.sum(w * np.abs(vals) ** spec.r))
    if lr > 0:
        log_norm = (math.log(lr) - c2) / spec.r
        if log_norm > (1.0 / spec.r - 1.0) * lg + math.log1p(tol):
            reasons.append("norm_too_large")
    return AtomCheck(not reasons, reasons)


# test families ---------------------------------------------------------------

def _e1(dim, t):
    v = [0.0] * dim
    v[0] = float(t)
    return tuple(v)


def coordinate(dim, i=0):
    ex = [0] * dim
    ex[i] = 1
    return Polynomial(((1.0, tuple(ex)),))


def standard_family(ctx, r=2.0):
    """Twelve specs: bounded/unbounded, signed/nonnegative, compact/global support."""
    n = ctx.dim
    ex2 = [0] * n
    ex2[0] = 2
    atoms = [
        make_atom(ctx, AtomSpec(Ball(_e1(n, 0.0), 0.5), r, coordinate(n))),
        make_atom(ctx, AtomSpec(Ball(_e1(n, 1.5), 0.4), r, GaussianBump(_e1(n, 1.6), 0.3))),
        make_atom(ctx, AtomSpec(Ball(_e1(n, -3.0), 0.2), r, IndicatorHalfspace(_e1(n, 1.0), -3.0))),
    ]
    return [
        Constant(0.0),
        Constant(1.0),
        Constant(-2.0),
        IndicatorBall(Ball(_e1(n, 0.0), 0.5)),
        IndicatorBall(Ball(_e1(n, 2.0), 0.25)),
        IndicatorBall(Ball(_e1(n, 5.0), 0.1)),
        SquaredNorm(),
        GaussianBump(_e1(n, 0.5), 0.5),
        Polynomial(((1.0, (0,) * n), (1.0, tuple(coordinate(n).terms[0][1])), (-0.5, tuple(ex2)))),
    ] + atoms


def default_b_family(ctx):
    """Constants, an indicator, |x|^2 and the first coordinate clipped at +-R_inf."""
    n = ctx.dim
    return [
        Constant(1.0),
        Constant(-1.0),
        IndicatorBall(Ball(_e1(n, 0.5), 0.5)),
        SquaredNorm(),
        Clip(coordinate(n), -R_INF, R_INF),
    ]


_ATOM_PROFILES = ("coordinate", "bump", "halfspace", "quadratic")


def random_atoms(ctx, count, r, seed, gamma_range=(1e-3, 1e-1), max_center=2.0):
    """Atoms on random class-1 balls with gamma(B) log-uniform in gamma_range.

    Returns a list of (AtomSpec, atom). Deterministic in ``seed``.
    """
    from .geometry import gauss_ball

    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    out = []
    n = ctx.dim
    lo, hi = np.log(gamma_range[0]), np.log(gamma_range[1])
    while len(out) < count:
        target = float(np.exp(gen.uniform(lo, hi)))
        d = gen.normal(size=n)
        d /= np.linalg.norm(d)
        c = d * gen.uniform(0.0, max_center)
        rmax = min(1.0, 1.0 / max(np.linalg.norm(c), 1e-300))
        if gauss_ball(ctx, Ball(tuple(c), rmax)) < target:
            continue
        a_, b_ = 0.0, rmax
        for _ in range(60):
            mid = 0.5 * (a_ + b_)
            if gauss_ball(ctx, Ball(tuple(c), mid)) < target:
                a_ = mid
            else:
                b_ = mid
        rad = 0.5 * (a_ + b_)
        B = Ball(tuple(c), rad)
        kind = _ATOM_PROFILES[len(out) % len(_ATOM_PROFILES)]
        u = gen.normal(size=n)
        u /= np.linalg.norm(u)
        if kind == "coordinate":
            prof = coordinate(n, int(gen.integers(n)))
        elif kind == "bump":
            prof = GaussianBump(tuple(c + 0.5 * rad * u), 0.5 * rad)
        elif kind == "halfspace":
            prof = IndicatorHalfspace(tuple(u), float(u @ c))
        else:
            prof = SquaredNorm()
        spec = AtomSpec(B, r, prof)
        out.append((spec, make_atom(ctx, spec)))
    return out


def compact_support(f):
    """A ball outside which f vanishes, when one is known (else None)."""
    sup = getattr(f, "support", None)
    if sup is not None:
        return sup
    if isinstance(f, IndicatorBall):
        return f.ball
    if isinstance(f, Product):
        for g in f.factors:
            s = compact_support(g)
            if s is not None:
                return s
    if isinstance(f, (PositivePart, NegativePart)):
        return compact_support(f.inner)
    return None


def is_nonnegative(f, ctx):
    """Structural check first, then a sampled check on outer nodes."""
    if isinstance(f, (IndicatorBall, IndicatorHalfspace, SquaredNorm, PositivePart, NegativePart)):
        return True
    if isinstance(f, Constant):
        return f.value >= 0
    if isinstance(f, GaussianBump):
        return f.height >= 0
    pts, _ = outer_nodes(ctx, [f])
    return bool(np.all(f(pts) >= 0))

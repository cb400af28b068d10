"""Commutators of b with the local fractional integral and maximal operators.

b(x) is evaluated once per point and held fixed inside the integral. The
integral commutators are computed as a single combined integrand on one node
set, so constant b gives exactly zero. Maximal commutators share one
candidate scan for every term, which makes the one-sided relations between
them hold candidate by candidate.
"""

from enum import Enum

import numpy as np

from .operators import (
    _as_points,
    _finish,
    _values,
    frac_maximal_factor,
    fractional_sum,
    masked_max,
    scan_candidates,
)


class CommutatorKind(str, Enum):
    BRACKET_I_TILDE = "bracket_I_tilde"
    ABS_I = "abs_I"
    BRACKET_M = "bracket_M"
    ABS_M = "abs_M"
    AUX_T = "aux_T"


def _bx(b, xc):
    return np.asarray(b(xc), dtype=float)[:, None]


def commutator_bracket_I(ctx, params, b, f, x):
    """[b, tilde I](f)(x) = b(x) tilde I f(x) - tilde I(bf)(x)."""
    pts, single = _as_points(ctx, x)

    def integrand(xc, y):
        return (_bx(b, xc) - _values(b, y)) * _values(f, y)

    return _finish(fractional_sum(ctx, params, pts, integrand, "tilde_x", [b, f]), single)


def _abs_integrand(b, f):
    def integrand(xc, y):
        return np.abs(_bx(b, xc) - _values(b, y)) * np.abs(_values(f, y))

    return integrand


def abs_commutator_I(ctx, params, b, f, x):
    """Integral over B(x, a m(x)) of |b(x) - b(y)| |f(y)| V(x,y)^{beta-1} d gamma(y)."""
    pts, single = _as_points(ctx, x)
    return _finish(fractional_sum(ctx, params, pts, _abs_integrand(b, f), "V", [b, f]), single)


def aux_T(ctx, params, b, f, x):
    """Same integrand as abs_commutator_I with kernel [e^{-|y|^2}|x-y|^n]^{beta-1}."""
    pts, single = _as_points(ctx, x)
    return _finish(fractional_sum(ctx, params, pts, _abs_integrand(b, f), "tilde_y", [b, f]), single)


def maximal_commutator_terms(ctx, params, b, f, x):
    """One candidate scan returning (M f, M(b f), tilde[b, M] f) at every x."""
    pts, _ = _as_points(ctx, x)
    beta = params.beta

    def red(blk):
        fy = np.abs(np.asarray(f(blk.y), dtype=float))
        by = np.asarray(b(blk.y), dtype=float)
        bx = blk.per_query(np.asarray(b(blk.x), dtype=float))
        k = frac_maximal_factor(beta, blk.lg, blk.c2)
        wf = blk.w * fy
        mf = blk.sum(wf) * k
        mbf = blk.sum(wf * np.abs(by)) * k
        ab = blk.sum(wf * np.abs(bx - by)) * k
        return masked_max(mf, blk.valid), masked_max(mbf, blk.valid), masked_max(ab, blk.valid)

    mf, mbf, ab = scan_candidates(ctx, params.a, params.ball_grid, pts, [b, f], red)
    if not (np.all(np.isfinite(mf)) and np.all(np.isfinite(mbf)) and np.all(np.isfinite(ab))):
        raise ValueError("nonfinite maximal value")
    return mf, mbf, ab


def commutator_bracket_M(ctx, params, b, f, x):
    """[b, M_a^beta](f)(x) = b(x) M f(x) - M(b f)(x), both maxima on one candidate grid."""
    pts, single = _as_points(ctx, x)
    mf, mbf, _ = maximal_commutator_terms(ctx, params, b, f, pts)
    return _finish(np.asarray(b(pts), dtype=float) * mf - mbf, single)


def abs_commutator_M(ctx, params, b, f, x):
    """max over candidates of gamma(B)^{beta-1} int_B |b(x) - b(y)| |f(y)| d gamma(y)."""
    pts, single = _as_points(ctx, x)
    _, _, ab = maximal_commutator_terms(ctx, params, b, f, pts)
    return _finish(ab, single)


def evaluate_commutator(kind, ctx, params, b, f, x):
    kind = CommutatorKind(kind)
    table = {
        CommutatorKind.BRACKET_I_TILDE: commutator_bracket_I,
        CommutatorKind.ABS_I: abs_commutator_I,
        CommutatorKind.BRACKET_M: commutator_bracket_M,
        CommutatorKind.ABS_M: abs_commutator_M,
        CommutatorKind.AUX_T: aux_T,
    }
    return table[kind](ctx, params, b, f, x)

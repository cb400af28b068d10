import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussbmo.commutators import (
    CommutatorKind,
    abs_commutator_I,
    abs_commutator_M,
    aux_T,
    commutator_bracket_I,
    commutator_bracket_M,
    evaluate_commutator,
    maximal_commutator_terms,
)
from gaussbmo.functions import Constant, GaussianBump, IndicatorBall, SquaredNorm, coordinate
from gaussbmo.geometry import Ball, GaussContext, kernel_band
from gaussbmo.operators import BallSearchGrid, OperatorParams, frac_integral_tilde

# int_{-1}^{1} |y| V(0,y)^{-1/2} d gamma(y) in n = 1 with V = gamma(B(0,|y|)) (mpmath)
ABS_I_COORD_AT_ZERO = 0.508381132886292

HALF = OperatorParams(1.0, 0.5)
GRID = OperatorParams(1.0, 0.25, BallSearchGrid(4, 16, 4))
XS = np.linspace(-3, 3, 9)[:, None]


def test_abs_commutator_golden(ctx1):
    val = abs_commutator_I(ctx1, HALF, coordinate(1), Constant(1.0), [0.0])
    assert val == pytest.approx(ABS_I_COORD_AT_ZERO, rel=1e-8)


@pytest.mark.parametrize("kind", list(CommutatorKind))
def test_constant_symbol_gives_zero(ctx1, kind):
    f = GaussianBump((0.3,), 0.7)
    out = evaluate_commutator(kind, ctx1, GRID, Constant(2.5), f, XS)
    assert np.max(np.abs(out)) <= 1e-12


def test_bracket_is_linear_in_symbol(ctx1):
    f = IndicatorBall(Ball((0.5,), 0.5))
    b = coordinate(1)
    one = commutator_bracket_I(ctx1, HALF, b, f, XS)
    two = commutator_bracket_I(ctx1, HALF, b * Constant(3.0) + Constant(1.0), f, XS)
    assert np.allclose(two, 3.0 * one, rtol=1e-10, atol=1e-13)


def test_bracket_matches_operator_difference(ctx1):
    # for smooth data the combined integrand equals b(x) I f - I(b f)
    f = GaussianBump((0.0,), 1.0)
    b = coordinate(1)
    x = np.array([[0.3], [1.2]])
    lhs = commutator_bracket_I(ctx1, HALF, b, f, x)
    rhs = b(x) * frac_integral_tilde(ctx1, HALF, f, x) - frac_integral_tilde(ctx1, HALF, b * f, x)
    assert np.allclose(lhs, rhs, rtol=1e-6, atol=1e-9)


def test_sandwich_between_kernels(ctx1):
    # |[b, tilde I] f| <= C * abs commutator with C from the measured kernel band
    b = SquaredNorm()
    f = IndicatorBall(Ball((0.2,), 0.8))
    lo, hi = kernel_band(ctx1, HALF.a)
    C = max(lo ** (HALF.beta - 1), hi ** (HALF.beta - 1))
    br = np.abs(commutator_bracket_I(ctx1, HALF, b, f, XS))
    ab = abs_commutator_I(ctx1, HALF, b, f, XS)
    assert np.all(br <= C * ab * (1 + 1e-9) + 1e-12)


def test_aux_kernel_band(ctx1):
    # e^{-|y|^2}/e^{-|x|^2} lies in [e^{-2a-a^2}, e^{2a}] on B(x, a m(x))
    b = coordinate(1)
    f = Constant(1.0)
    a, k = HALF.a, HALF.beta - 1
    lo, hi = kernel_band(ctx1, a)
    ab = abs_commutator_I(ctx1, HALF, b, f, XS)
    t = aux_T(ctx1, HALF, b, f, XS)
    assert np.all(t >= ab * (hi * np.exp(2 * a)) ** k * (1 - 1e-6))
    assert np.all(t <= ab * (lo * np.exp(-2 * a - a * a)) ** k * (1 + 1e-6))


def test_maximal_bracket_below_abs(ctx1):
    b = coordinate(1)
    for f in (Constant(1.0), IndicatorBall(Ball((1.0,), 0.5)), GaussianBump((-0.5,), 0.6)):
        br = commutator_bracket_M(ctx1, GRID, b, f, XS)
        ab = abs_commutator_M(ctx1, GRID, b, f, XS)
        assert np.all(br <= ab * (1 + 1e-12) + 1e-15)
        bp = SquaredNorm()
        assert np.all(np.abs(commutator_bracket_M(ctx1, GRID, bp, f, XS))
                      <= abs_commutator_M(ctx1, GRID, bp, f, XS) * (1 + 1e-12) + 1e-15)


def test_maximal_terms_consistent(ctx1):
    b = coordinate(1)
    f = IndicatorBall(Ball((0.0,), 1.0))
    mf, mbf, ab = maximal_commutator_terms(ctx1, GRID, b, f, XS)
    assert np.all(mf >= 0) and np.all(mbf >= 0) and np.all(ab >= 0)
    assert np.allclose(commutator_bracket_M(ctx1, GRID, b, f, XS), b(XS) * mf - mbf)


def test_indicator_symbol_and_data_inside_ball(ctx1):
    # b = f = chi_B: the integrand |b(x) - b(y)| f(y) vanishes for x in B
    B = Ball((0.5,), 0.5)
    chi = IndicatorBall(B)
    x = np.array([[0.3], [0.6], [0.9]])
    assert np.max(np.abs(abs_commutator_I(ctx1, HALF, chi, chi, x))) <= 1e-14


@settings(max_examples=15, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.1, 0.9))
def test_abs_commutator_dominates_bracket(x, beta):
    ctx = GaussContext(1)
    p = OperatorParams(1.0, beta)
    b = coordinate(1)
    f = GaussianBump((0.2,), 0.5)
    ab = abs_commutator_I(ctx, p, b, f, [x])
    t = aux_T(ctx, p, b, f, [x])
    assert ab >= 0 and t >= 0
    lo, hi = kernel_band(ctx, p.a)
    C = max(lo ** (beta - 1), hi ** (beta - 1))
    assert abs(commutator_bracket_I(ctx, p, b, f, [x])) <= C * ab * (1 + 1e-9) + 1e-12

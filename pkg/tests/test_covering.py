import numpy as np
import pytest

from gaussbmo.covering import KAPPA, build_covering, overlap_count
from gaussbmo.geometry import GaussContext, m_func


@pytest.fixture(scope="module")
def fam1():
    return build_covering(GaussContext(1), ([-5.0], [5.0]), candidate_spacing=0.5)


def test_inner_balls_disjoint(fam1):
    c = fam1.centers[:, 0]
    r = fam1.inner_radii
    order = np.argsort(c)
    c, r = c[order], r[order]
    assert np.all(c[1:] - c[:-1] >= r[1:] + r[:-1] - 1e-12)
    assert fam1.stats["disjoint"]


def test_cover_balls_cover_region(fam1):
    t = np.linspace(-5, 5, 20001)[:, None]
    d = np.abs(t - fam1.centers[None, :, 0])
    assert np.all(np.any(d <= fam1.cover_radii[None, :], axis=1))
    assert fam1.stats["uncovered_test_points"] == 0


def test_radii_follow_local_scale(fam1):
    assert np.allclose(fam1.cover_radii, KAPPA * m_func(fam1.centers))
    assert np.allclose(fam1.inner_radii, fam1.cover_radii / 4)


def test_overlap_bounded_and_stable(fam1):
    counts = [overlap_count(fam1, tau) for tau in (1, 2, 4)]
    assert counts == sorted(counts)
    assert counts[0] >= 1
    fine = build_covering(GaussContext(1), ([-5.0], [5.0]), candidate_spacing=0.25)
    assert overlap_count(fine, 4) == counts[2]


def test_overlap_count_brute_force(fam1):
    pts = np.linspace(-5, 5, 997)[:, None]
    tau = 4
    d = np.abs(pts - fam1.centers[None, :, 0])
    brute = int(np.max(np.sum(d < tau * fam1.cover_radii[None, :], axis=1)))
    got = overlap_count(fam1, tau, test_points=pts)
    assert abs(got - brute) <= 1


def test_two_dimensional_small_box():
    fam = build_covering(GaussContext(2), ([-1.0, -1.0], [1.0, 1.0]), candidate_spacing=1.0)
    c, r = fam.centers, fam.inner_radii
    d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    assert np.all(d >= r[:, None] + r[None, :] - 1e-12)
    # m = 1 on the box, so volume packing bounds the count by (4 tau + 1)^2
    assert 1 <= overlap_count(fam, 4) <= 17**2


def test_region_validation():
    with pytest.raises(ValueError):
        build_covering(GaussContext(1), ([1.0], [0.0]))
    with pytest.raises(ValueError):
        build_covering(GaussContext(2), ([0.0], [1.0]))

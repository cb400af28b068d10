"""End-to-end acceptance criteria; a summary line per criterion is printed after the run."""

import functools
import math
import time

import mpmath as mp
import numpy as np
import pytest

from gaussbmo.cli import cli_main
from gaussbmo.functions import Constant
from gaussbmo.geometry import Ball, GaussContext, gauss_ball, log_v_arrays, m_func, v_kernel_partial, \
    v_kernel_partial_arrays
from gaussbmo.harness import TheoremCheckConfig, run_check
from gaussbmo.quadrature import QuadratureConfig, mc_integrate

criterion = pytest.mark.criterion


@functools.lru_cache(maxsize=None)
def _run(theorem_id, **kw):
    t = time.perf_counter()
    rep = run_check(TheoremCheckConfig(theorem_id, **kw))
    elapsed = time.perf_counter() - t
    print(f"{theorem_id} {kw}: pass={rep.passed} max_ratio={rep.max_ratio:.6g} "
          f"delta={rep.refinement['delta']:.3g} time={elapsed:.1f}s")
    return rep, elapsed


def _stable(rep):
    return math.isfinite(rep.refinement["coarse"]) and math.isfinite(rep.refinement["fine"]) \
        and rep.refinement["delta"] < 0.05


@criterion(1, "ball identity for the maximal operator on explicit candidates")
def test_identity():
    rep, elapsed = _run("E4.13", identity_samples=20)
    assert len(rep.cases) == 20
    assert rep.checks["max_relative_deviation"] <= 0.005
    assert rep.passed
    assert elapsed < 10


@criterion(2, "eccentricity and m-equivalence with zero violations")
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_geometric_inequalities(n, a):
    rep, elapsed = _run("GEOM", n=n, a=a)
    assert rep.checks["pairs"] >= 10_000
    assert rep.checks["eccentricity_violations"] == 0
    assert rep.checks["m_equivalence_violations"] == 0
    assert elapsed < 30


@criterion(3, "doubling bound with zero violations for tau in {1, 2, 4}")
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_doubling(n, a):
    rep, _ = _run("GEOM", n=n, a=a)
    assert rep.checks["doubling_balls"] >= 1_000
    assert rep.checks["doubling_violations"] == 0
    taus = {c["inputs"].get("tau") for c in rep.cases if c["inputs"]["check"] == "doubling"}
    assert {1.0, 2.0, 4.0} <= taus


@criterion(4, "derivative of V against central finite differences")
def test_derivative_formula():
    gen = np.random.Generator(np.random.Philox(key=404))
    quad = QuadratureConfig()
    total = 0
    for n in (1, 2, 3):
        m = 400
        x = gen.normal(size=(m, n)) * 1.5
        y = x + gen.normal(size=(m, n)) * 0.5
        i = gen.integers(n, size=m)
        h = 1e-5 * np.linalg.norm(x - y, axis=1)
        e = np.zeros((m, n))
        e[np.arange(m), i] = h
        fd = (np.exp(log_v_arrays(n, quad, x, y + e)) - np.exp(log_v_arrays(n, quad, x, y - e))) / (2 * h)
        an = np.array([v_kernel_partial_arrays(n, x[k:k + 1], y[k:k + 1], int(i[k]))[0] for k in range(m)])
        keep = np.abs(an) > 1e-12
        rel = np.abs(an[keep] - fd[keep]) / np.abs(an[keep])
        assert rel.max() < 1e-4, (n, rel.max())
        total += int(keep.sum())
    assert total >= 1_000
    val = v_kernel_partial(GaussContext(1), [0.0], [1.0], 0)
    assert abs(val - 2 * math.exp(-1) / math.sqrt(math.pi)) <= 1e-8 * val


@criterion(5, "ball measures against the closed form and a Monte Carlo oracle")
def test_measure_closed_forms():
    gen = np.random.Generator(np.random.Philox(key=505))
    ctx = GaussContext(1)
    mp.mp.dps = 40
    for _ in range(50):
        c = gen.uniform(-6, 6)
        r = gen.uniform(0.01, 1.0) * float(m_func(np.array([[c]]))[0])
        ref = (mp.erfc(mp.mpf(c) - r) - mp.erfc(mp.mpf(c) + r)) / 2
        got = gauss_ball(ctx, Ball((c,), r))
        assert abs(got - float(ref)) <= 1e-10 * float(ref)
    misses = 0
    for n in (1, 2, 3):
        ctx = GaussContext(n)
        for k in range(34 if n < 3 else 32):
            c = gen.normal(size=n)
            r = float(m_func(c[None])[0]) * gen.uniform(0.1, 1.0)
            B = Ball(tuple(c), r)
            est = mc_integrate(ctx, Constant(1.0), B, seed=1000 + k)
            if abs(est.value - gauss_ball(ctx, B)) > est.error_estimate:
                misses += 1
    # error_estimate is 3 standard errors
    assert misses == 0


@criterion(6, "strong type ratio finite and refinement stable")
def test_strong_type():
    rep, elapsed = _run("T3.1-strong", n=1, a=1.0, beta=0.25, p=2.0)
    assert rep.config["q"] == pytest.approx(4.0)
    assert len({str(c["inputs"]["f"]) for c in rep.cases}) == 12
    assert _stable(rep) and rep.passed
    assert elapsed < 300


@criterion(7, "weak type ratio finite and refinement stable")
def test_weak_type():
    rep, _ = _run("T3.1-weak", n=1, a=1.0, beta=0.25)
    assert _stable(rep) and rep.passed


@criterion(8, "atom images lie in one band of width at most 10")
def test_atom_band():
    rep, _ = _run("T3.2-atoms", n=1, a=1.0, beta=0.25, atom_count=20)
    assert rep.checks["invalid_atoms"] == 0
    assert len(rep.cases) >= 21
    assert rep.checks["band"] <= 10 and rep.checks["band_fine"] <= 10
    assert rep.passed


@criterion(9, "BLO images finite, stable, and oscillation at most twice the bracket")
def test_blo_images():
    rep, _ = _run("T3.2-blo", n=1, a=1.0, beta=0.25)
    for key, level in rep.checks.items():
        if isinstance(level, dict) and "oscillation_bracket_violations" in level:
            assert level["balls"] > 0
            assert level["oscillation_bracket_violations"] == 0
    assert _stable(rep) and rep.passed


@criterion(10, "forward commutator ratio stable and pointwise sandwich holds")
def test_commutator_forward():
    rep, _ = _run("T1.1-forward", n=1, a=1.0, beta=0.25, p=2.0)
    for level in ("coarse", "fine"):
        assert rep.checks[level]["points"] >= 1_000
        assert rep.checks[level]["violations"] == 0
    assert _stable(rep) and rep.passed


@criterion(11, "converse chain per-ball inequality and b-minus bound")
def test_converse_chain():
    rep, _ = _run("T1.2-converse-chain", n=1, a=1.0, beta=0.25, p=2.0)
    for level in ("coarse", "fine"):
        assert rep.checks[level]["balls"] > 0
        assert rep.checks[level]["chain_violations"] == 0
        assert rep.checks[level]["bminus_violations"] == 0
    assert rep.passed


@criterion(12, "maximal commutator relations on shared candidate grids")
@pytest.mark.parametrize("theorem_id", ["T1.2-forward", "T1.3-forward"])
def test_maximal_relations(theorem_id):
    rep, _ = _run(theorem_id, n=1, a=1.0, beta=0.25, p=2.0)
    for level in ("coarse", "fine"):
        c = rep.checks[level]
        assert c["points"] >= 1_000 and c["nonnegative_b_points"] >= 1_000
        assert c["bracket_over_abs_violations"] == 0
        assert c["abs_bracket_over_abs_violations"] == 0
    assert rep.passed


@criterion(13, "covering family disjoint, covering and with stable overlap")
@pytest.mark.parametrize("n", [1, 2])
def test_covering(n):
    rep, _ = _run("L2.1", n=n, tau=4.0, region_half=5.0)
    for row in rep.checks["rows"]:
        st = row["stats"]
        assert st["disjoint"] and st["uncovered_test_points"] == 0
    assert _stable(rep) and rep.passed


@criterion(14, "Lp against L1 plus sharp maximal norm, constants at most 1")
def test_fefferman_stein():
    rep, _ = _run("E2.7", n=1, a=1.0, p=2.0)
    assert rep.checks["constant_rows_ok"]
    for c in rep.cases:
        if c["inputs"]["f"]["kind"] == "constant":
            assert c["ratio"] <= 1.0
    assert math.isfinite(rep.max_ratio) and rep.passed


@criterion(15, "repeated verify runs write byte-identical reports")
@pytest.mark.parametrize("theorem_id", ["E4.13", "T3.1-strong", "GEOM"])
def test_determinism(tmp_path, theorem_id, capsys):
    paths = []
    for k in range(2):
        p = tmp_path / f"r{k}.json"
        assert cli_main(["verify", theorem_id, "--output", str(p)]) == 0
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    csvs = []
    for k in range(2):
        p = tmp_path / f"r{k}.csv"
        cli_main(["verify", theorem_id, "--format", "csv", "--output", str(p)])
        csvs.append(p.read_bytes())
    assert csvs[0] == csvs[1]

"""Acceptance criteria, one test each, timed against their runtime budgets.

Each test carries ``@pytest.mark.acceptance(number, title)``; the conftest
hook prints one PASS/FAIL line per criterion after the run.
"""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from wnk.charfun import (
    Dirac,
    WhiteNoise,
    drifting_dirac_family,
    equicontinuity_modulus,
    fubini_check,
    gram_psd_check,
    m_constant,
    m_ratio,
    sample_white_noise,
    white_noise_cf,
)
from wnk.cli import main
from wnk.donsker import (
    GAUSSIAN,
    RADEMACHER,
    builtin_innovations,
    cell_averages,
    product_cf,
    rate_estimate,
    sample_pairing,
)
from wnk.hermite import BasisConfig, TestFunction, l2_norm_sq
from wnk.hilbert_scale import (
    DistributionVector,
    ball_contains,
    embedding_norm,
    exhaustion_ball,
    exhaustion_index,
    norm_dual,
    norm_primal,
    pairing,
)

B = BasisConfig(16)
e0 = TestFunction.unit(B, 0)
e2 = TestFunction.unit(B, 2)
SCHEDULE = [16, 64, 256, 1024]


@contextmanager
def budget(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, budget {seconds}s"


def rademacher_errors():
    wn = white_noise_cf(e0)
    return [abs(product_cf(e0, n, RADEMACHER) - wn) for n in SCHEDULE]


@pytest.mark.acceptance(1, "Donsker convergence, Rademacher, phi = e0")
def test_donsker_convergence():
    with budget(10):
        errs = rademacher_errors()
    assert all(b < a for a, b in zip(errs, errs[1:])), errs
    assert errs[-1] <= 1e-3


@pytest.mark.acceptance(2, "log-log rate of the convergence error")
def test_rate_sanity():
    errs = rademacher_errors()
    with budget(1):
        slope = rate_estimate(list(zip(SCHEDULE, errs)))
    assert slope <= -0.8, slope


@pytest.mark.acceptance(3, "Gaussian innovations match the closed form")
def test_gaussian_closed_form():
    smooth = [e0, e0 + e2, TestFunction([0.4, -0.3, 0.2, 0.0, 0.1] + [0.0] * 11, B)]
    with budget(5):
        for phi in smooth:
            for n in (1, 16, 64, 128, 512):
                cells = cell_averages(phi, n)
                closed = math.exp(-0.5 * n * float(np.dot(cells.values, cells.values)))
                assert abs(product_cf(phi, n, GAUSSIAN, cells=cells) - closed) <= 1e-12
            gap = [abs(cell_averages(phi, n).energy() - l2_norm_sq(phi)) for n in (64, 128)]
            assert gap[0] >= 2 * gap[1], gap


@pytest.mark.acceptance(4, "empirical vs analytic CF at N = 1e5")
def test_empirical_vs_analytic():
    N = 100_000
    tol = 5 / math.sqrt(N)
    with budget(60):
        for inn in builtin_innovations():
            for phi in (e0, e0 + e2):
                for n in (4, 64):
                    cells = cell_averages(phi, n)
                    s = sample_pairing(phi, n, inn, 20240601, size=N, cells=cells)
                    ecf = np.exp(1j * s).mean()
                    err = abs(ecf - product_cf(phi, n, inn, cells=cells))
                    assert err <= tol, (inn.name, n, err)


@pytest.mark.acceptance(5, "equicontinuity: white noise vs drifting Dirac")
def test_equicontinuity():
    with budget(5):
        for delta in (0.1, 0.5, 1.0):
            r = equicontinuity_modulus([WhiteNoise(B)], 0, delta, probes=64, seed=1, eps=0.01)
            assert abs(r.modulus - (1 - math.exp(-delta ** 2 / 2))) <= 1e-10
        family = drifting_dirac_family(B, 12)
        for m in range(5):
            for delta in (0.1, 0.5, 1.0, 2.0):
                r = equicontinuity_modulus(family, m, delta, probes=64, seed=2, eps=0.5)
                assert r.verdict == "violation", (m, delta, r.modulus)


@pytest.mark.acceptance(6, "Fubini identity for white noise, direction e0")
def test_fubini():
    N = 100_000
    with budget(30):
        X = sample_white_noise(B, 11, size=N)
        r = fubini_check(X, [e0], N, 12, inner=256)
    target = 1 - 3 ** -0.5
    assert abs(r.lhs - target) <= 5 * r.sd_lhs / math.sqrt(r.n_mu)
    assert abs(r.lhs - r.rhs) <= r.threshold


@pytest.mark.acceptance(7, "M constant, maximiser and small-u limit")
def test_m_constant():
    with budget(1):
        M, u_star = m_constant(return_argmax=True)
        limit = float(m_ratio(0.0))
    assert 2.0 <= M <= 2.0002
    assert abs(u_star - math.pi) <= 0.05
    assert abs(limit - 0.5) <= 1e-9
    assert abs(float(m_ratio(1e-4)) - 0.5) <= 1e-8


@pytest.mark.acceptance(8, "Hilbert scale contraction, embedding norm, duality")
def test_hilbert_scale():
    rng = np.random.default_rng(8)
    with budget(5):
        for _ in range(1000):
            x = DistributionVector(rng.standard_normal(16) * 10.0 ** rng.uniform(-3, 3), B)
            n = int(rng.integers(0, 20))
            assert norm_dual(x, n + 2) <= 0.25 * norm_dual(x, n)
        for k in range(6):
            scan = max(norm_dual(DistributionVector.unit(B, j), k + 2) / norm_dual(DistributionVector.unit(B, j), k)
                       for j in range(B.K))
            assert scan == 0.25 == embedding_norm(k, k + 2)
        for _ in range(1000):
            x = DistributionVector(rng.standard_normal(16), B)
            phi = TestFunction(rng.standard_normal(16), B)
            p = int(rng.integers(0, 7))
            assert abs(pairing(x, phi)) <= norm_dual(x, p) * norm_primal(phi, p) * (1 + 1e-12)


@pytest.mark.acceptance(9, "hemicompact exhaustion: nesting, covering, 100 e0")
def test_hemicompact():
    with budget(2):
        X = sample_white_noise(B, 9, size=1000)
        balls = [exhaustion_ball(n) for n in range(1, 16)]
        for row in X:
            x = DistributionVector(row, B)
            inside = [ball_contains(b, x) for b in balls]
            assert all(b for a, b in zip(inside, inside[1:]) if a)
            assert exhaustion_index(x) is not None
        assert exhaustion_index(DistributionVector.unit(B, 0, 100.0)) == 5


@pytest.mark.acceptance(10, "white-noise Gram matrices are PSD")
def test_psd():
    cf = WhiteNoise(B)
    worst = math.inf
    with budget(10):
        for trial in range(100):
            rng = np.random.default_rng(trial)
            probes = [TestFunction(rng.standard_normal(B.K), B) for _ in range(16)]
            ok, lam = gram_psd_check(cf, probes)
            assert ok
            worst = min(worst, lam)
    assert worst >= -1e-10


@pytest.mark.acceptance(11, "CLI donsker CSV is byte-identical across WNK_THREADS")
def test_reproducibility(tmp_path, monkeypatch):
    outputs = []
    with budget(30):
        for threads in ("1", "4"):
            monkeypatch.setenv("WNK_THREADS", threads)
            out = tmp_path / f"threads{threads}"
            assert main(["donsker", "--out", str(out)]) == 0
            outputs.append((out / "table.csv").read_bytes())
    assert outputs[0] == outputs[1]

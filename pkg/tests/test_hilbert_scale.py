import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wnk.hermite import BasisConfig, TestFunction
from wnk.hilbert_scale import (
    Ball,
    DistributionVector,
    ball_contains,
    bound_witness,
    embedding_norm,
    embedding_singular_values,
    exhaustion_ball,
    exhaustion_index,
    exhaustion_radius,
    exhaustion_table,
    norm_dual,
    norm_primal,
    pairing,
)

B = BasisConfig(8)


def e(k, scale=1.0, cls=TestFunction):
    return cls.unit(B, k, scale)


def d(k, scale=1.0):
    return DistributionVector.unit(B, k, scale)


def test_norm_primal_examples():
    assert norm_primal(e(0), 1) == 2.0
    assert norm_primal(e(1), 2) == 16.0
    phi = TestFunction(np.arange(8.0) - 3, B)
    assert norm_primal(phi, 0) == pytest.approx(np.sqrt(np.sum((np.arange(8.0) - 3) ** 2)))


def test_norm_primal_large_power_no_spurious_overflow():
    big = BasisConfig(64)
    phi = TestFunction.unit(big, 0)
    # weight of e_0 is 2^p; the e_63 weight 128^p would overflow if formed directly
    assert norm_primal(phi, 140) == pytest.approx(2.0 ** 140)


def test_norm_dual_examples():
    assert norm_dual(d(0), 1) == 0.5
    assert norm_dual(d(1), 2) == 1 / 16
    x = DistributionVector(np.linspace(-1, 2, 8), B)
    assert norm_dual(x, 0) == pytest.approx(np.linalg.norm(np.linspace(-1, 2, 8)))


def test_pairing_examples():
    assert pairing(d(0), e(0)) == 1.0
    assert pairing(d(0), e(1)) == 0.0
    assert pairing(d(2, 3.0), e(2, 2.0)) == 6.0
    with pytest.raises(ValueError):
        pairing(d(0), TestFunction.unit(BasisConfig(4), 0))


def test_ball_contains_examples():
    assert ball_contains(Ball(1, 1.0), d(0))
    assert not ball_contains(Ball(0, 1.0), d(0, 2.0))
    for level in (0, 3, 9):
        assert ball_contains(Ball(level, 1e-9), DistributionVector.zeros(B))
    with pytest.raises(ValueError):
        Ball(0, 0.0)
    with pytest.raises(ValueError):
        Ball(-1, 1.0)


def brute_force_embedding_norm(k, n, K):
    # max of |x|_{-n} / |x|_{-k} over the K coordinate directions
    basis = BasisConfig(K)
    return max(norm_dual(DistributionVector.unit(basis, j), n) / norm_dual(DistributionVector.unit(basis, j), k)
               for j in range(K))


@pytest.mark.parametrize("k,n,expected", [(0, 0, 1.0), (3, 3, 1.0), (0, 2, 0.25), (4, 6, 0.25), (0, 1, 0.5)])
def test_embedding_norm_examples(k, n, expected):
    assert embedding_norm(k, n) == expected
    assert embedding_norm(k, n, 12) == expected
    assert brute_force_embedding_norm(k, n, 12) == pytest.approx(expected, rel=1e-15)


def test_embedding_singular_values_square_summable():
    sv = embedding_singular_values(1, 3, 2000)
    np.testing.assert_allclose(sv[:3], [1 / 4, 1 / 16, 1 / 36])
    # sum (2j+2)^{-4} converges to zeta(4)/16
    assert np.sum(sv ** 2) == pytest.approx(np.pi ** 4 / 90 / 16, rel=1e-9)
    with pytest.raises(ValueError):
        embedding_norm(3, 2)
    with pytest.raises(ValueError):
        embedding_singular_values(3, 2, 4)


def test_exhaustion_radius():
    assert exhaustion_radius(1) == 1.0
    assert exhaustion_radius(5) == 5.0
    assert embedding_norm(1, 3) * 3 <= exhaustion_radius(3)
    assert embedding_norm(1, 3) == 0.25
    with pytest.raises(ValueError):
        exhaustion_radius(0)


def scan_index(x, bound=200):
    # independent oracle: direct loop over levels
    for n in range(1, bound):
        if norm_dual(x, n) <= n:
            return n


def test_exhaustion_index_examples():
    assert exhaustion_index(DistributionVector.zeros(B)) == 1
    assert exhaustion_index(d(0)) == 1
    assert exhaustion_index(d(0, 100.0)) == 5
    assert scan_index(d(0, 100.0)) == 5
    assert 100 / 16 > 4 and 100 / 32 <= 5


def test_bound_witness_examples():
    assert bound_witness([DistributionVector.zeros(B)], 3) == 0.0
    assert bound_witness([d(0), d(1)], 1) == 0.5
    fam = [d(j, float(j)) for j in range(8)]
    expected = max(j / (2 * j + 2) for j in range(8))
    assert bound_witness(fam, 1) == pytest.approx(expected)
    assert expected < 0.5
    with pytest.raises(ValueError):
        bound_witness([], 1)


coeff_vectors = arrays(np.float64, 8, elements=st.floats(-1e6, 1e6, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(c=coeff_vectors, n=st.integers(0, 20))
def test_scale_contraction(c, n):
    x = DistributionVector(c, B)
    assert norm_dual(x, n + 2) <= 0.25 * norm_dual(x, n)


def test_contraction_equality_iff_supported_on_zero():
    x = d(0, 3.7)
    for n in range(6):
        assert norm_dual(x, n + 2) == 0.25 * norm_dual(x, n)
    y = DistributionVector([3.7, 1e-3, 0, 0, 0, 0, 0, 0], B)
    assert norm_dual(y, 3) < 0.25 * norm_dual(y, 1)


@settings(max_examples=100, deadline=None)
@given(xc=coeff_vectors, pc=coeff_vectors, p=st.integers(0, 6))
def test_duality_bound(xc, pc, p):
    x, phi = DistributionVector(xc, B), TestFunction(pc, B)
    assert abs(pairing(x, phi)) <= norm_dual(x, p) * norm_primal(phi, p) * (1 + 1e-12) + 1e-300


@settings(max_examples=100, deadline=None)
@given(c=coeff_vectors)
def test_nested_exhaustion_and_covering(c):
    x = DistributionVector(c, B)
    inside = [ball_contains(exhaustion_ball(n), x) for n in range(1, 40)]
    assert all(b for a, b in zip(inside, inside[1:]) if a)
    idx = exhaustion_index(x)
    assert idx is not None and idx == scan_index(x)


def test_exhaustion_table_counts():
    xs = [DistributionVector.zeros(B), d(0, 100.0), d(0, 3.0)]
    rows = exhaustion_table(xs, 6)
    assert rows[0] == (1, 1.0, 1)
    assert rows[1] == (2, 2.0, 2)
    assert rows[4] == (5, 5.0, 3)
    counts = [r[2] for r in rows]
    assert counts == sorted(counts)


def test_distribution_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        DistributionVector([np.inf] + [0.0] * 7, B)

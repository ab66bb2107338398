"""The dual Hilbert scale H_{-p} on truncated Hermite coefficients.

With A = -d^2/dt^2 + t^2 + 1 acting diagonally (A e_k = (2k+2) e_k):

    |phi|_p   = ( sum (2k+2)^{2p} c_k^2 )^{1/2}    test-function side
    |x|_{-p}  = ( sum (2k+2)^{-2p} x_k^2 )^{1/2}   distribution side

The canonical embedding H_{-k} -> H_{-n} (n >= k) is the identity on
coefficients with singular values (2j+2)^{-(n-k)}, so it is compact as soon
as n > k. The exhaustion K_n = ball(level n, radius n) covers every finite
vector and is increasing in n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hermite import BasisConfig, CoefficientVector

__all__ = [
    "DistributionVector",
    "Ball",
    "EXHAUSTION_SEARCH_BOUND",
    "norm_primal",
    "norm_dual",
    "pairing",
    "ball_contains",
    "embedding_norm",
    "embedding_singular_values",
    "exhaustion_radius",
    "exhaustion_ball",
    "exhaustion_index",
    "bound_witness",
    "exhaustion_table",
]

#: Largest level scanned by :func:`exhaustion_index`. Since
#: |x|_{-n} <= 2^{-n} |x|_0, any x with |x|_0 < 2^{1000} is caught well
#: before this.
EXHAUSTION_SEARCH_BOUND = 1100


class DistributionVector(CoefficientVector):
    """Tempered distribution as dual Hermite coefficients x_k = <x, e_k>."""

    def __post_init__(self):
        super().__post_init__()
        if self.basis.K > 1:
            n0, n1 = norm_dual(self, 0), norm_dual(self, 1)
            if n1 > n0:
                raise AssertionError("dual norms must be nonincreasing in the level")


@dataclass(frozen=True)
class Ball:
    """Closed ball {x : |x|_{-level} <= radius}."""

    level: int
    radius: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if not self.radius > 0:
            raise ValueError("radius must be positive")


def _weights(K: int, p: float) -> np.ndarray:
    return np.power(2.0 * np.arange(K) + 2.0, p)


def _norm(v: np.ndarray) -> float:
    """Euclidean norm with exact power-of-two prescaling (no under/overflow of squares)."""
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return m
    _, e = math.frexp(m)
    return math.ldexp(math.sqrt(float(np.sum(np.ldexp(v, -e) ** 2))), e)


def norm_primal(phi: CoefficientVector, p: int) -> float:
    """|phi|_p, factored by the largest weight so intermediates cannot overflow."""
    if p < 0:
        raise ValueError("p must be >= 0")
    c = phi.coeffs
    if p == 0:
        return _norm(c)
    lam = 2.0 * np.arange(c.shape[0]) + 2.0
    top = lam[-1]
    with np.errstate(over="ignore"):
        return float(top ** p * _norm(c * np.power(lam / top, p)))


def norm_dual(x: CoefficientVector, p: int) -> float:
    """|x|_{-p} = 2^{-p} |x_k (2/lambda_k)^p|_2; the 2^{-p} factor is applied exactly."""
    if p < 0:
        raise ValueError("p must be >= 0")
    c = x.coeffs
    if p == 0:
        return _norm(c)
    lam = 2.0 * np.arange(c.shape[0]) + 2.0
    return math.ldexp(_norm(c * np.power(2.0 / lam, p)), -p)


def pairing(x: CoefficientVector, phi: CoefficientVector) -> float:
    """<x, phi> = sum_k x_k c_k."""
    if x.basis.K != phi.basis.K:
        raise ValueError(f"basis mismatch: K={x.basis.K} vs K={phi.basis.K}")
    return float(np.dot(x.coeffs, phi.coeffs))


def ball_contains(b: Ball, x: CoefficientVector) -> bool:
    return norm_dual(x, b.level) <= b.radius


def embedding_singular_values(k: int, n: int, K: int) -> np.ndarray:
    """Singular values (2j+2)^{-(n-k)}, j < K, of H_{-k} -> H_{-n}."""
    if n < k:
        raise ValueError(f"embedding needs n >= k, got k={k}, n={n}")
    return _weights(K, -(n - k))


def embedding_norm(k: int, n: int, K: int | None = None) -> float:
    """Operator norm of H_{-k} -> H_{-n}: sup_j (2j+2)^{-(n-k)} = 2^{-(n-k)}."""
    if n < k:
        raise ValueError(f"embedding needs n >= k, got k={k}, n={n}")
    if K is None:
        return 2.0 ** -(n - k)
    return float(embedding_singular_values(k, n, K).max())


def exhaustion_radius(n: int) -> float:
    """r_n = n, checked against every embedding of the balls B_k(n), k <= n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    r = float(n)
    for k in range(1, n + 1):
        assert embedding_norm(k, n) * n <= r
    return r


def exhaustion_ball(n: int) -> Ball:
    """K_n = B_n(r_n)."""
    return Ball(n, exhaustion_radius(n))


def exhaustion_index(x: CoefficientVector, search_bound: int = EXHAUSTION_SEARCH_BOUND):
    """Least n >= 1 with |x|_{-n} <= n, or ``None`` past ``search_bound``."""
    for n in range(1, search_bound + 1):
        # exhaustion_radius(n) == n; its assertion loop is O(n), so inlined
        if norm_dual(x, n) <= n:
            return n
    return None


def bound_witness(family: Sequence[CoefficientVector], m: int) -> float:
    """sup over the family of |x|_{-m}: the radius showing boundedness at level m."""
    if len(family) == 0:
        raise ValueError("family must be nonempty")
    return max(norm_dual(x, m) for x in family)


def exhaustion_table(samples: Sequence[CoefficientVector], levels: int):
    """Rows (n, r_n, member_count) for n = 1..levels."""
    rows = []
    for n in range(1, levels + 1):
        ball = exhaustion_ball(n)
        rows.append((n, ball.radius, sum(ball_contains(ball, x) for x in samples)))
    return rows

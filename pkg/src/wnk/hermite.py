"""Hermite-function basis of L^2(R).

The orthonormal Hermite functions

    e_k(t) = (2^k k! sqrt(pi))^{-1/2} H_k(t) exp(-t^2 / 2)

are evaluated directly by the three-term recurrence

    e_{k+1}(t) = sqrt(2/(k+1)) t e_k(t) - sqrt(k/(k+1)) e_{k-1}(t),

carrying the Gaussian factor as a separate per-point log scale, so neither
H_k overflow nor exp(-t^2/2) underflow is ever materialised. Values whose
true magnitude is below the smallest double flush to zero.

Every element of the model is a truncated coefficient vector on e_0..e_{K-1};
the Hilbert-scale weight of e_k is lambda_k = 2k + 2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "CONVENTION",
    "K_MAX",
    "BasisConfig",
    "CoefficientVector",
    "TestFunction",
    "hermite_point",
    "hermite_functions",
    "hermite_series",
    "gh_rule",
    "gh_rule_scaled",
    "quadrature",
    "project",
    "eval_test_function",
    "l2_norm_sq",
    "coeffs_to_dict",
    "coeffs_from_dict",
    "dump_coeffs",
    "load_coeffs",
]

CONVENTION = "lambda=2k+2"

#: Largest supported basis index + 1. The recurrence itself is stable far
#: beyond this; the cap bounds the O(K) loops and quadrature sizes.
K_MAX = 4096

_PI_QUARTER = math.pi ** -0.25
# rescaling by an exact power of two keeps the scaled recurrence bit-faithful
_RESCALE_EXP = 600
_RESCALE_AT = 2.0 ** _RESCALE_EXP
_RESCALE_LOG = _RESCALE_EXP * math.log(2.0)


@dataclass(frozen=True)
class BasisConfig:
    """Truncation dimension ``K`` and Gauss-Hermite order ``Q``.

    ``Q`` defaults to ``max(2K, 64)``; it must satisfy ``Q >= 2K`` so that
    every product ``e_j e_k`` is integrated exactly.
    """

    K: int
    Q: int | None = None
    convention: str = CONVENTION

    def __post_init__(self):
        if not isinstance(self.K, (int, np.integer)) or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        if self.K > K_MAX:
            raise ValueError(f"K={self.K} exceeds supported maximum {K_MAX}")
        if self.Q is None:
            object.__setattr__(self, "Q", max(2 * int(self.K), 64))
        if self.Q < 2 * self.K:
            raise ValueError(f"Q={self.Q} must be >= 2K={2 * self.K}")
        if self.convention != CONVENTION:
            raise ValueError(f"unknown convention tag {self.convention!r}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "Q", int(self.Q))

    @property
    def eigenvalues(self) -> np.ndarray:
        """lambda_k = 2k + 2 for k < K."""
        return 2.0 * np.arange(self.K) + 2.0


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Immutable real coefficient vector on a truncated Hermite basis."""

    coeffs: np.ndarray
    basis: BasisConfig = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != self.basis.K:
            raise ValueError(f"expected {self.basis.K} coefficients, got {c.shape[0]}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, basis: BasisConfig):
        return cls(np.zeros(basis.K), basis)

    @classmethod
    def unit(cls, basis: BasisConfig, k: int, scale: float = 1.0):
        """``scale * e_k``."""
        c = np.zeros(basis.K)
        c[k] = scale
        return cls(c, basis)

    @property
    def K(self) -> int:
        return self.basis.K

    def _check(self, other):
        if not isinstance(other, CoefficientVector):
            return NotImplemented
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} and {type(other).__name__}")
        if other.basis.K != self.basis.K:
            raise ValueError(f"basis mismatch: K={self.basis.K} vs K={other.basis.K}")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return type(self)(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return type(self)(self.coeffs - other.coeffs, self.basis)

    def __neg__(self):
        return type(self)(-self.coeffs, self.basis)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)(float(scalar) * self.coeffs, self.basis)

    __rmul__ = __mul__

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.basis.K == other.basis.K and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None


class TestFunction(CoefficientVector):
    """Schwartz function as its Hermite coefficients, phi = sum_k c_k e_k."""

    __test__ = False  # not a pytest class

    def __call__(self, t):
        return eval_test_function(self, t)


def _check_index(k):
    if k < 0 or k >= K_MAX:
        raise ValueError(f"Hermite index {k} outside supported range [0, {K_MAX})")


def _unscale(scaled, logscale):
    """sign(scaled) * exp(log|scaled| + logscale) without intermediate underflow."""
    with np.errstate(divide="ignore"):
        return np.sign(scaled) * np.exp(np.log(np.abs(scaled)) + logscale)


def _recurrence(K, t, visit):
    """Run the scaled recurrence for e_0..e_{K-1} at points ``t``.

    ``visit(k, cur)`` is called with the scaled value of e_k; it may return a
    list of extra arrays that must be rescaled together with the recurrence
    state. Returns the final per-point log scale.
    """
    logscale = -0.5 * t * t
    prev = np.zeros_like(t)
    cur = np.full_like(t, _PI_QUARTER)
    carried = []
    for k in range(K):
        carried = visit(k, cur) or carried
        if k == K - 1:
            break
        nxt = math.sqrt(2.0 / (k + 1)) * t * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE_AT
        if np.any(big):
            prev[big] *= 2.0 ** -_RESCALE_EXP
            cur[big] *= 2.0 ** -_RESCALE_EXP
            for arr in carried:
                arr[big] *= 2.0 ** -_RESCALE_EXP
            logscale = np.where(big, logscale + _RESCALE_LOG, logscale)
    return logscale


def hermite_point(k: int, t: float) -> float:
    """Orthonormal Hermite function e_k(t).

    Supported for ``0 <= k < K_MAX`` and any finite ``t``; results are never
    NaN or infinite.
    """
    _check_index(k)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    return float(hermite_functions(k + 1, np.array([t], dtype=float))[k, 0])


def hermite_functions(K: int, t) -> np.ndarray:
    """Matrix ``E[k, i] = e_k(t_i)`` for ``k < K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    _check_index(K - 1)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    scaled = np.empty((K,) + t.shape)
    # rows keep the log scale in force when they were produced
    logs = np.empty((K,) + t.shape)
    logscale = -0.5 * t * t
    prev = np.zeros_like(t)
    cur = np.full_like(t, _PI_QUARTER)
    for k in range(K):
        scaled[k] = cur
        logs[k] = logscale
        if k == K - 1:
            break
        nxt = math.sqrt(2.0 / (k + 1)) * t * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE_AT
        if np.any(big):
            prev = np.where(big, prev * 2.0 ** -_RESCALE_EXP, prev)
            cur = np.where(big, cur * 2.0 ** -_RESCALE_EXP, cur)
            logscale = np.where(big, logscale + _RESCALE_LOG, logscale)
    return _unscale(scaled, logs)


def hermite_series(coeffs, t) -> np.ndarray:
    """sum_k coeffs[k] e_k(t), accumulated inside the scaled recurrence."""
    coeffs = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = t.shape
    t = np.atleast_1d(t).reshape(-1)
    acc = np.zeros_like(t)

    def visit(k, cur):
        if coeffs[k] != 0.0:
            acc[:] += coeffs[k] * cur
        return [acc]

    logscale = _recurrence(len(coeffs), t, visit)
    return _unscale(acc, logscale).reshape(shape)


@lru_cache(maxsize=64)
def _gh_cached(Q: int):
    # Golub-Welsch on the Jacobi matrix of the physicists' weight exp(-t^2)
    off = np.sqrt(np.arange(1, Q) / 2.0)
    nodes = eigh_tridiagonal(np.zeros(Q), off, eigvals_only=True)
    if Q > 1:
        # Newton polish on e_Q: e_Q' / e_Q = sqrt(2Q) e_{Q-1} / e_Q at a zero
        for _ in range(2):
            E = hermite_functions(Q + 1, nodes)
            nodes = nodes - E[Q] / (math.sqrt(2.0 * Q) * E[Q - 1])
        nodes = 0.5 * (nodes - nodes[::-1])  # exact symmetry
    # Christoffel numbers: w_i exp(t_i^2) = 1 / sum_{k<Q} e_k(t_i)^2
    scaled = 1.0 / np.sum(hermite_functions(Q, nodes) ** 2, axis=0)
    scaled = 0.5 * (scaled + scaled[::-1])
    weights = scaled * np.exp(-nodes * nodes)
    for arr in (nodes, scaled, weights):
        arr.setflags(write=False)
    return nodes, weights, scaled


def gh_rule(Q: int):
    """Gauss-Hermite nodes and weights for the weight exp(-t^2).

    Exact for polynomials of degree <= 2Q - 1.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    nodes, weights, _ = _gh_cached(int(Q))
    return nodes, weights


def gh_rule_scaled(Q: int):
    """Nodes and de-weighted weights ``w_i exp(t_i^2)``.

    ``sum_i w_i exp(t_i^2) f(t_i)`` approximates ``int f dt`` and is exact
    when ``f`` is a polynomial of degree <= 2Q - 1 times exp(-t^2).
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    nodes, _, scaled = _gh_cached(int(Q))
    return nodes, scaled


def _evaluate(f: Callable, t: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f(t), dtype=float)
    except TypeError:  # scalar-only callable
        vals = None
    if vals is None or vals.shape != t.shape:
        vals = np.array([float(f(ti)) for ti in t])
    return vals


def quadrature(f: Callable, Q: int) -> float:
    """int_R f(t) dt by the de-weighted Q-point Gauss-Hermite rule."""
    nodes, w = gh_rule_scaled(Q)
    return float(np.dot(w, _evaluate(f, nodes)))


def project(f: Callable, config: BasisConfig) -> TestFunction:
    """Hermite coefficients c_k = int f e_k dt of a real function."""
    nodes, w = gh_rule_scaled(config.Q)
    vals = _evaluate(f, nodes)
    if not np.all(np.isfinite(vals)):
        raise ValueError("f returned non-finite values at quadrature nodes")
    E = hermite_functions(config.K, nodes)
    return TestFunction(E @ (w * vals), config)


def eval_test_function(phi: TestFunction, t):
    """phi(t) = sum_k c_k e_k(t); scalar in, scalar out."""
    out = hermite_series(phi.coeffs, t)
    return float(out) if np.ndim(out) == 0 else out


def l2_norm_sq(phi: CoefficientVector) -> float:
    """int phi^2 dt, by Parseval."""
    return float(np.dot(phi.coeffs, phi.coeffs))


# -- coefficient-vector file format -----------------------------------------

def coeffs_to_dict(vec: CoefficientVector) -> dict:
    return {"convention": CONVENTION, "K": vec.basis.K, "coeffs": [float(c) for c in vec.coeffs]}


def coeffs_from_dict(data: dict, cls=TestFunction, Q: int | None = None):
    """Inverse of :func:`coeffs_to_dict`; rejects unknown convention tags."""
    tag = data.get("convention")
    if tag != CONVENTION:
        raise ValueError(f"unknown convention tag {tag!r}")
    K = data.get("K")
    coeffs = data.get("coeffs")
    if not isinstance(K, int) or not isinstance(coeffs, list) or len(coeffs) != K:
        raise ValueError("malformed coefficient record: need integer K and K coeffs")
    return cls(np.array(coeffs, dtype=float), BasisConfig(K, Q))


def dump_coeffs(vec: CoefficientVector, path) -> None:
    Path(path).write_text(json.dumps(coeffs_to_dict(vec), indent=2) + "\n")


def load_coeffs(path, cls=TestFunction, Q: int | None = None):
    return coeffs_from_dict(json.loads(Path(path).read_text()), cls=cls, Q=Q)

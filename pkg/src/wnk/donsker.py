"""Scaled iid step processes and their characteristic functionals.

X^{(n)}_t = sqrt(n) xi_{floor(n t)} pairs with a test function as

    <X^{(n)}, phi> = sum_j sqrt(n) xi_j a_j,    a_j = int_{j/n}^{(j+1)/n} phi,

so its characteristic functional is prod_j C(sqrt(n) a_j), C being the
characteristic function of one innovation. As n grows this tends to the
white noise value exp(-|phi|_0^2 / 2).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .charfun import CharFunctional, white_noise_cf
from .hermite import TestFunction, hermite_functions, hermite_series, l2_norm_sq

__all__ = [
    "Innovation",
    "CellAverages",
    "ExperimentReport",
    "ProductIID",
    "RADEMACHER",
    "GAUSSIAN",
    "UNIFORM",
    "builtin_innovations",
    "get_innovation",
    "cell_averages",
    "product_cf",
    "sample_pairing",
    "convergence_experiment",
    "rate_estimate",
    "worker_count",
    "CSV_COLUMNS",
    "MAX_CELLS",
]

GL_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)
# the envelope grid extends _TAIL_SPAN past the search cap; beyond that the
# envelope is below exp(-(cap + 12)^2 / 2) times a polynomial
_TAIL_SPAN = 12.0
_T_STEP = 0.25
_T_MARGIN = 40.0
_EVAL_BLOCK = 1 << 20
#: Largest window (number of cells) cell_averages will build.
MAX_CELLS = 1 << 24
_CELL_BLOCK = 32


@dataclass(frozen=True)
class Innovation:
    """iid law with mean 0 and variance 1.

    ``sampler(rng, size)`` draws floats; ``cf(u)`` is vectorised.
    """

    name: str
    sampler: Callable[[np.random.Generator, int], np.ndarray] = field(repr=False)
    cf: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    moment2: float = 1.0
    moment4: float = 3.0
    symmetric: bool = True

    def __post_init__(self):
        if self.moment2 != 1.0:
            raise ValueError("innovations must have unit variance")


def _rademacher(rng, size):
    return 2.0 * rng.integers(0, 2, size=size) - 1.0


_SQRT3 = math.sqrt(3.0)

RADEMACHER = Innovation("rademacher", _rademacher, lambda u: np.cos(u), moment4=1.0)
GAUSSIAN = Innovation("gaussian", lambda rng, size: rng.standard_normal(size),
                      lambda u: np.exp(-0.5 * np.square(u)), moment4=3.0)
UNIFORM = Innovation("uniform", lambda rng, size: rng.uniform(-_SQRT3, _SQRT3, size),
                     lambda u: np.sinc(_SQRT3 * np.asarray(u, dtype=float) / math.pi), moment4=1.8)


def builtin_innovations() -> list[Innovation]:
    return [RADEMACHER, GAUSSIAN, UNIFORM]


def get_innovation(name: str) -> Innovation:
    for inn in builtin_innovations():
        if inn.name == name:
            return inn
    raise ValueError(f"unknown innovation {name!r}")


def worker_count() -> int:
    """Thread cap from WNK_THREADS (default 1). Results never depend on it."""
    raw = os.environ.get("WNK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"WNK_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class CellAverages:
    n: int
    j_min: int
    j_max: int
    values: np.ndarray = field(repr=False)
    tail_bound: float

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    def energy(self) -> float:
        """sum_j n a_j^2, the variance of <X^{(n)}, phi>."""
        return float(self.n * np.dot(self.values, self.values))

    def __getitem__(self, j: int) -> float:
        if j < self.j_min or j > self.j_max:
            return 0.0
        return float(self.values[j - self.j_min])


def _envelope_half_width(phi: TestFunction, tail_tol: float) -> tuple[float, float]:
    """Smallest T on a 0.25 grid with int_{|t|>T} E(t)^2 dt <= tail_tol.

    E(t) = sum_k |c_k| |e_k(t)| dominates |phi(t)|, so the returned bound
    also dominates the discarded part of sum_j n a_j^2.
    """
    K = phi.basis.K
    cap = math.sqrt(2 * K + 1) + _T_MARGIN
    panels = int(math.ceil((cap + _TAIL_SPAN) / _T_STEP))
    left = np.arange(panels) * _T_STEP
    t = (left[:, None] + 0.5 * _T_STEP * (_GL_NODES + 1.0)).reshape(-1)
    E = np.abs(phi.coeffs) @ np.abs(hermite_functions(K, t))
    panel_mass = (0.5 * _T_STEP * (E * E).reshape(panels, GL_ORDER)) @ _GL_WEIGHTS
    # suffix[i] = int_{left[i]}^{grid end} E^2, summed from the small end so
    # tiny tails are not lost to cancellation against the O(1) total mass
    suffix = np.cumsum(panel_mass[::-1])[::-1]
    for i in range(1, panels):
        T = left[i]
        if T > cap:
            break
        tail = 2.0 * suffix[i]
        if tail <= tail_tol:
            return float(T), float(tail)
    raise ValueError(f"no window up to |t| <= {cap:.1f} meets tail_tol={tail_tol:g}")


def cell_averages(phi: TestFunction, n: int, tail_tol: float = 1e-12) -> CellAverages:
    """a_j = int_{j/n}^{(j+1)/n} phi dt over a window certified by ``tail_tol``.

    Each cell uses 8-point Gauss-Legendre on phi evaluated by the stable
    Hermite recurrence.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    T, tail = _envelope_half_width(phi, tail_tol)
    j_min = int(math.floor(-T * n))
    j_max = int(math.ceil(T * n)) - 1
    if j_max - j_min + 1 > MAX_CELLS:
        raise ValueError(f"window of {j_max - j_min + 1} cells for tail_tol={tail_tol:g}, n={n} "
                         f"exceeds MAX_CELLS={MAX_CELLS}")
    j = np.arange(j_min, j_max + 1, dtype=float)
    t = ((j[:, None] + 0.5 * (_GL_NODES + 1.0)) / n).reshape(-1)
    vals = np.empty_like(t)
    for s in range(0, t.size, _EVAL_BLOCK):
        vals[s:s + _EVAL_BLOCK] = hermite_series(phi.coeffs, t[s:s + _EVAL_BLOCK])
    a = (vals.reshape(-1, GL_ORDER) @ _GL_WEIGHTS) / (2.0 * n)
    a.setflags(write=False)
    return CellAverages(n=n, j_min=j_min, j_max=j_max, values=a, tail_bound=tail)


def _product(factors: np.ndarray) -> complex:
    """prod of factors via summed log-magnitudes and per-factor phases.

    Factors may be negative or complex; zeros give 0.
    """
    factors = np.asarray(factors)
    mag = np.abs(factors)
    if np.any(mag == 0.0):
        return 0j
    logmag = math.fsum(np.log(mag))
    if np.isrealobj(factors) or not np.any(factors.imag):
        re = factors.real
        sign = -1.0 if np.count_nonzero(re < 0) % 2 else 1.0
        return complex(sign * math.exp(logmag), 0.0)
    phase = math.fsum(np.angle(factors))
    return complex(math.exp(logmag) * complex(math.cos(phase), math.sin(phase)))


def product_cf(phi: TestFunction, n: int, inn: Innovation, tail_tol: float = 1e-12,
               cells: CellAverages | None = None) -> complex:
    """prod_j C(sqrt(n) a_j), the characteristic functional of P_n at phi."""
    cells = cells if cells is not None else cell_averages(phi, n, tail_tol)
    return _product(inn.cf(math.sqrt(n) * cells.values))


def _zigzag(j: int) -> int:
    return 2 * j if j >= 0 else -2 * j - 1


def _cell_draws(seed: int, j: int, inn: Innovation, size: int) -> np.ndarray:
    # stream for cell j depends only on (seed, j); replicate r is its r-th draw
    ss = np.random.SeedSequence(seed, spawn_key=(_zigzag(j),))
    return inn.sampler(np.random.Generator(np.random.Philox(ss)), size)


def sample_pairing(phi: TestFunction, n: int, inn: Innovation, seed: int,
                   tail_tol: float = 1e-12, size: int | None = None,
                   cells: CellAverages | None = None):
    """Draws of <X^{(n)}, phi> = sum_j sqrt(n) xi_j a_j.

    Returns a float, or an array of ``size`` replicates. The innovation
    xi_j of replicate r is the same for every window containing cell j.
    Cell blocks are drawn on up to ``worker_count()`` threads and summed
    in cell order, so the result does not depend on the thread count.
    """
    cells = cells if cells is not None else cell_averages(phi, n, tail_tol)
    N = 1 if size is None else int(size)
    if N < 1:
        raise ValueError("size must be >= 1")
    coef = math.sqrt(n) * cells.values
    js = cells.indices
    total = np.zeros(N)
    workers = worker_count()

    def block(start):
        out = np.zeros(N)
        for j, a in zip(js[start:start + _CELL_BLOCK], coef[start:start + _CELL_BLOCK]):
            if a != 0.0:
                out += a * _cell_draws(seed, int(j), inn, N)
        return out

    starts = range(0, js.size, _CELL_BLOCK)
    if workers == 1:
        for s in starts:
            total += block(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(block, starts):
                total += part
    return float(total[0]) if size is None else total


class ProductIID(CharFunctional):
    """Characteristic functional of P_n for a given innovation."""

    def __init__(self, innovation: Innovation, n: int, tail_tol: float = 1e-12, basis=None):
        self.innovation = innovation
        self.n = n
        self.tail_tol = tail_tol
        self.basis = basis
        self.name = f"product-{innovation.name}-n{n}"

    def values(self, rows):
        rows = np.atleast_2d(rows)
        basis = self.basis
        if basis is None:
            from .hermite import BasisConfig
            basis = BasisConfig(rows.shape[1])
        return np.array([product_cf(TestFunction(r, basis), self.n, self.innovation, self.tail_tol)
                         for r in rows], dtype=complex)


CSV_COLUMNS = ["phi_id", "n", "analytic_cf_re", "analytic_cf_im", "wn_cf",
               "analytic_err", "empirical_err", "N_mc", "seed"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass
class ExperimentReport:
    """Seeded run descriptor plus one row per (phi, n)."""

    config: dict
    rows: list[dict] = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "checks": self.checks}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def column(self, phi_id: str, key: str) -> list:
        return [r[key] for r in self.rows if r["phi_id"] == phi_id]


def convergence_experiment(phi_set, n_schedule: Sequence[int], inn: Innovation, N_mc: int,
                           seed: int, tail_tol: float = 1e-12) -> ExperimentReport:
    """Analytic and Monte-Carlo characteristic functionals of P_n vs white noise.

    ``phi_set`` is a mapping id -> TestFunction or a sequence (ids phi0,
    phi1, ...). Each row carries the product value, the white-noise value,
    their distance, and the empirical characteristic functional from
    ``N_mc`` draws with its distance to the product value (CSV
    ``empirical_err``) and to the white-noise value.
    """
    if not isinstance(phi_set, Mapping):
        phi_set = {f"phi{i}": phi for i, phi in enumerate(phi_set)}
    if not phi_set or not n_schedule:
        raise ValueError("need at least one test function and one scale")
    if any(b <= a for a, b in zip(n_schedule, n_schedule[1:])):
        raise ValueError("n_schedule must be strictly increasing")
    if N_mc < 1:
        raise ValueError("N_mc must be >= 1")
    report = ExperimentReport(config={
        "innovation": inn.name, "n_schedule": list(map(int, n_schedule)), "N_mc": int(N_mc),
        "seed": int(seed), "tail_tol": float(tail_tol),
        "phi": {k: [float(c) for c in v.coeffs] for k, v in phi_set.items()},
    })
    for phi_id, phi in phi_set.items():
        wn = white_noise_cf(phi).real
        for n in n_schedule:
            cells = cell_averages(phi, n, tail_tol)
            cf = product_cf(phi, n, inn, cells=cells)
            draws = sample_pairing(phi, n, inn, seed, size=N_mc, cells=cells)
            ecf = complex(np.exp(1j * draws).mean())
            report.rows.append({
                "phi_id": phi_id, "n": int(n),
                "analytic_cf_re": cf.real, "analytic_cf_im": cf.imag, "wn_cf": wn,
                "analytic_err": abs(cf - wn),
                "empirical_cf_re": ecf.real, "empirical_cf_im": ecf.imag,
                "empirical_err": abs(ecf - cf), "empirical_wn_err": abs(ecf - wn),
                "energy": cells.energy(), "l2_norm_sq": l2_norm_sq(phi),
                "tail_bound": cells.tail_bound, "cells": int(cells.values.size),
                "N_mc": int(N_mc), "seed": int(seed),
            })
    return report


def rate_estimate(errors: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(n)."""
    if len(errors) < 3:
        raise ValueError("need at least 3 points")
    n = np.array([e[0] for e in errors], dtype=float)
    err = np.array([e[1] for e in errors], dtype=float)
    if np.any(err <= 0) or np.any(n <= 0):
        raise ValueError("errors and scales must be positive")
    slope, _ = np.polyfit(np.log(n), np.log(err), 1)
    return float(slope)

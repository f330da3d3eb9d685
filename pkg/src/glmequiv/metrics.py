"""Squared Hellinger distances and the deficiency bound they imply.

Convention: ``H^2(P, Q) = (1/2) * integral (sqrt(dP) - sqrt(dQ))^2``, so that
``0 <= H^2 <= 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from ._rng import child_seeds
from .errors import ConfigError, DomainError, ShapeError
from .funcspace import GridFunction

__all__ = [
    "Method",
    "HellingerEstimate",
    "hellinger_gaussian_products",
    "hellinger_bound_product",
    "hellinger_white_noise",
    "hellinger_mc",
    "hellinger_terms",
    "hellinger_cv",
    "deficiency_upper",
    "gaussian_calibration_sampler",
]

JACKKNIFE_BLOCKS = 50
MIN_REPS = 100


class Method(str, Enum):
    EXACT_GAUSSIAN = "ExactGaussian"
    EXACT_WHITE_NOISE = "ExactWhiteNoise"
    MONTE_CARLO = "MonteCarlo"


@dataclass(frozen=True)
class HellingerEstimate:
    h2: float
    se: float
    reps: int
    method: Method
    bound: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.h2 <= 1.0) and self.method is not Method.MONTE_CARLO:
            raise DomainError(f"h2 = {self.h2} outside [0, 1]")
        if self.se < 0:
            raise DomainError("se must be nonnegative")

    def to_json(self) -> str:
        d = {"h2": self.h2, "se": self.se, "reps": self.reps, "method": self.method.value}
        if self.bound is not None:
            d["bound"] = self.bound
        return json.dumps(d, sort_keys=True)


def hellinger_gaussian_products(means1, means2, vars) -> HellingerEstimate:
    """Exact H^2 between prod N(means1_i, vars_i) and prod N(means2_i, vars_i)."""
    m1, m2, v = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (means1, means2, vars))
    if not (m1.shape == m2.shape and np.broadcast_shapes(m1.shape, v.shape) == m1.shape):
        raise ShapeError(f"shapes {m1.shape}, {m2.shape}, {v.shape} do not match")
    if np.any(v <= 0):
        raise DomainError("variances must be positive")
    x = 0.125 * float(np.sum((m1 - m2) ** 2 / v))
    return HellingerEstimate(-math.expm1(-x), 0.0, 0, Method.EXACT_GAUSSIAN, bound=x)


def hellinger_bound_product(coord_h2) -> float:
    """Subadditive bound H^2(prod P_i, prod Q_i) <= min(1, sum_i H^2(P_i, Q_i))."""
    h = np.asarray(coord_h2, dtype=float)
    if np.any((h < 0) | (h > 1)) or np.any(~np.isfinite(h)):
        raise DomainError("coordinate h2 values must lie in [0, 1]")
    return float(min(1.0, h.sum()))


def _l2_squared(diff: np.ndarray) -> float:
    # trapezoid rule on t_0 = 0, t_1, ..., t_n with the value at 0 extrapolated
    # as constant; integrates constants and grid step functions near 0 exactly
    n = diff.size
    sq = np.concatenate([[diff[0] ** 2], diff**2])
    return float(trapezoid(sq, dx=1.0 / n))


def hellinger_white_noise(m1: GridFunction, m2: GridFunction, n: int) -> HellingerEstimate:
    """H^2 between white-noise experiments dY = m_j dt + n^{-1/2} dW on [0, 1].

    Returns ``1 - exp(-(n/8) * int (m1 - m2)^2)`` with the integral by the
    trapezoid rule on the grid; ``bound`` holds ``(n/8) * int (m1 - m2)^2``.
    """
    if m1.n != m2.n:
        raise ShapeError(f"grid sizes differ: {m1.n} vs {m2.n}")
    x = 0.125 * n * _l2_squared(m1.values - m2.values)
    return HellingerEstimate(-math.expm1(-x), 0.0, 0, Method.EXACT_WHITE_NOISE, bound=x)


def hellinger_terms(log1, log2) -> np.ndarray:
    """Per-replication ``(1/2) (exp(log1/2) - exp(log2/2))^2``, computed stably."""
    a = np.asarray(log1, dtype=float)
    b = np.asarray(log2, dtype=float)
    hi = np.maximum(a, b)
    gap = np.abs(a - b)
    with np.errstate(divide="ignore"):
        # log of the squared factor is -inf for equal ratios, giving an exact zero
        log_sq = 2.0 * np.log(-np.expm1(-0.5 * gap))
    return 0.5 * np.exp(hi + log_sq)


def _jackknife(terms: np.ndarray, blocks: int = JACKKNIFE_BLOCKS) -> float:
    r = terms.size
    k = min(blocks, r)
    edges = np.linspace(0, r, k + 1).astype(int)
    sums = np.add.reduceat(terms, edges[:-1])
    counts = np.diff(edges)
    total = terms.sum()
    loo = (total - sums) / (r - counts)
    return float(math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2)))


def hellinger_cv(log1, log2) -> tuple[float, float]:
    """Control-variate Monte-Carlo H^2 from per-replication log-ratios.

    ``log1`` and ``log2`` must be log densities of the two laws with respect to
    the sampling measure, so ``exp(log1)`` and ``exp(log2)`` have mean one. Their
    centred values are used as control variates for the Hellinger terms with
    the least-squares coefficient; the standard error is the jackknife of the
    adjusted terms.
    """
    a = np.asarray(log1, dtype=float)
    b = np.asarray(log2, dtype=float)
    t = hellinger_terms(a, b)
    y = np.column_stack([np.expm1(a), np.expm1(b)])
    yc = y - y.mean(axis=0)
    coef = np.linalg.lstsq(yc, t - t.mean(), rcond=None)[0]
    adj = t - y @ coef
    return float(adj.mean()), _jackknife(adj)


def hellinger_mc(
    pair_sampler: Callable,
    reps: int = 20_000,
    seed=0,
    batch: int = 1000,
) -> HellingerEstimate:
    """Monte-Carlo H^2 between two likelihood-ratio processes on a common space.

    ``pair_sampler(seeds)`` receives a list of :class:`numpy.random.SeedSequence`
    (one per replication) and returns two arrays ``(log1, log2)`` holding
    ``log dP1/dQ`` and ``log dP2/dQ`` evaluated on the *same* draw from the base
    measure ``Q``. The estimate is the mean of ``(1/2)(sqrt(L1) - sqrt(L2))^2``;
    its standard error comes from a 50-block jackknife.
    """
    if reps < MIN_REPS:
        raise ConfigError(f"reps must be at least {MIN_REPS}, got {reps}")
    seeds = child_seeds(seed, reps)
    terms = []
    for start in range(0, reps, batch):
        chunk = seeds[start:start + batch]
        log1, log2 = pair_sampler(chunk)
        log1, log2 = np.asarray(log1, dtype=float), np.asarray(log2, dtype=float)
        if log1.shape != (len(chunk),) or log2.shape != (len(chunk),):
            raise ShapeError("pair_sampler must return one value per seed for each ratio")
        terms.append(hellinger_terms(log1, log2))
    t = np.concatenate(terms)
    return HellingerEstimate(float(t.mean()), _jackknife(t), reps, Method.MONTE_CARLO)


def gaussian_calibration_sampler(d: float) -> Callable:
    """Pair sampler for N(d/2, 1) and N(-d/2, 1) against the base N(0, 1).

    Both log-ratios are driven by the same standard normal draw, so the exact
    answer is ``1 - exp(-d^2/8)``.
    """

    def sampler(seeds):
        z = np.array([np.random.default_rng(s).standard_normal() for s in seeds])
        return d * z / 2 - d * d / 8, -d * z / 2 - d * d / 8

    return sampler


def deficiency_upper(h_sup: float) -> float:
    """Deficiency bound sqrt(2) * h_sup from the supremum Hellinger distance."""
    if not 0.0 <= h_sup <= 1.0:
        raise DomainError(f"h_sup must lie in [0, 1], got {h_sup}")
    return math.sqrt(2.0) * h_sup

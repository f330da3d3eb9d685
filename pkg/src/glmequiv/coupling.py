"""Coupling of sufficient statistics with Gaussian partners on one probability space.

Given canonical parameters ``theta_i`` we draw ``N_i ~ N(0, I(theta_i))`` and
construct ``X~_i ~ P_{theta_i}`` as a deterministic function of the ``N``'s, so
that the centred statistics ``U(X~_i) - b(theta_i)`` track ``N_i``. Two schemes:

``PerCoordinate``
    ``X~_i = Q_{theta_i}(Phi(N_i / sqrt(I_i)))``. Exact marginals, but the
    partial sums of the differences grow like ``sqrt(n)``.
``DyadicBlocks``
    Block sums are matched first, top-down over a binary tree, by quantile
    transforms of the Gaussian block sums and of the conditional Gaussian
    splits (the Hungarian construction). Integer families use the exact pmfs of
    their block sums, so marginals are exact; the Gamma-type families use a
    Beta split that is exact when theta is constant on the block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special, stats

from . import _kmt
from ._rng import child_seeds, derive, make_rng
from .errors import ConfigError, ShapeError
from .expfam import Bernoulli, ExpFamily, Exponential, GaussMean, GaussVar, Poisson
from .funcspace import GridFunction, sample_holder

__all__ = [
    "Scheme",
    "CouplingRun",
    "TailFit",
    "QuantileCoupler",
    "DyadicCoupler",
    "quantile_couple",
    "dyadic_couple",
    "s_n",
    "holder_dictionary",
    "kmt_tail_test",
    "growth_exponent",
    "X_GRID",
]

X_GRID = np.arange(1, 11) * 0.5


class Scheme(str, Enum):
    PER_COORDINATE = "PerCoordinate"
    DYADIC_BLOCKS = "DyadicBlocks"
    UNCOUPLED = "Uncoupled"


@dataclass(frozen=True, eq=False)
class CouplingRun:
    family: ExpFamily
    theta: np.ndarray
    x_tilde: np.ndarray
    normals: np.ndarray
    scheme: Scheme
    seed: object
    centred: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.theta.size

    @property
    def u_bar(self) -> np.ndarray:
        """Centred sufficient statistics U(X~_i) - b(theta_i)."""
        if self.centred is not None:
            return self.centred
        return self.family.u_stat(self.x_tilde) - self.family.mean_param(self.theta)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_theta(fam: ExpFamily, theta) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if th.ndim != 1:
        raise ShapeError("theta must be one-dimensional")
    fam.check_theta(th)
    return th


def _x_from_ubar(fam: ExpFamily, theta, ubar, rng=None):
    """Invert the centred statistic back to an observation."""
    u = ubar + fam.mean_param(theta)
    if isinstance(fam, GaussVar):
        # U = x^2/2 loses the sign; attach an independent fair sign
        sign = np.where(make_rng(rng).random(u.shape) < 0.5, -1.0, 1.0)
        return sign * np.sqrt(2.0 * np.maximum(u, 0.0))
    return u


class QuantileCoupler:
    """Per-coordinate quantile coupling for a fixed parameter vector."""

    scheme = Scheme.PER_COORDINATE

    def __init__(self, fam: ExpFamily, theta):
        self.fam = fam
        self.theta = _check_theta(fam, theta)
        self.sd = np.sqrt(fam.fisher_info(self.theta))
        self.mean = fam.mean_param(self.theta)

    def ubar(self, normals: np.ndarray) -> np.ndarray:
        """Centred statistics coupled to ``normals`` (shape (..., n))."""
        if isinstance(self.fam, GaussMean):
            return np.array(normals, dtype=float)
        z = normals / self.sd
        if isinstance(self.fam, (Exponential, GaussVar)):
            # couple U itself: quantiling X and then squaring would not be monotone in z
            alpha = _gamma_shape(self.fam)
            return _gamma_quantile(z, alpha) * (self.mean / alpha) - self.mean
        # Phi(z) loses precision in the upper tail; use the symmetric form there
        u = np.where(z < 0, special.ndtr(z), -special.ndtr(-z) + 1.0)
        u = np.clip(u, 1e-300, 1.0 - 1e-16)
        x = self.fam.quantile(np.broadcast_to(self.theta, z.shape), u)
        return self.fam.u_stat(x) - self.mean


class _Tree:
    """Binary split of range(n) with floor/ceil halves, nodes in breadth-first order."""

    def __init__(self, n: int):
        lo, hi, left, right = [0], [n], [], []
        i = 0
        while i < len(lo):
            a, b = lo[i], hi[i]
            if b - a > 1:
                m = a + (b - a) // 2
                left.append(len(lo))
                lo.append(a)
                hi.append(m)
                right.append(len(lo))
                lo.append(m)
                hi.append(b)
            else:
                left.append(-1)
                right.append(-1)
            i += 1
        self.lo = np.array(lo, dtype=np.int64)
        self.hi = np.array(hi, dtype=np.int64)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.n = n

    def node_sums(self, x: np.ndarray) -> np.ndarray:
        """Block sums for every node; ``x`` has shape (reps, n)."""
        cs = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
        return cs[..., self.hi] - cs[..., self.lo]

    def levels(self):
        """Internal nodes grouped by depth (parents before children)."""
        depth = np.zeros(self.lo.size, dtype=int)
        for v in range(self.lo.size):
            if self.left[v] >= 0:
                depth[self.left[v]] = depth[v] + 1
                depth[self.right[v]] = depth[v] + 1
        internal = self.left >= 0
        return [np.flatnonzero(internal & (depth == d)) for d in range(depth.max() + 1)]


class DyadicCoupler:
    """Dyadic (Hungarian-type) coupling for a fixed parameter vector.

    Construction cost (node pmf tables) is paid once; :meth:`ubar` then maps
    any batch of Gaussian vectors to coupled centred statistics.
    """

    scheme = Scheme.DYADIC_BLOCKS

    def __init__(self, fam: ExpFamily, theta):
        self.fam = fam
        self.theta = _check_theta(fam, theta)
        self.n = self.theta.size
        self.tree = _Tree(self.n)
        self.mean = fam.mean_param(self.theta)
        info = fam.fisher_info(self.theta)
        self.node_mean = self.tree.node_sums(self.mean[None, :])[0]
        self.node_var = self.tree.node_sums(info[None, :])[0]
        if isinstance(fam, (Poisson, Bernoulli)):
            self._build_tables()
        elif not isinstance(fam, (GaussMean, Exponential, GaussVar)):
            raise ConfigError(f"no dyadic coupling for family {fam.name}")

    def _build_tables(self):
        tree = self.tree
        n_nodes = tree.lo.size
        tables = [None] * n_nodes
        if isinstance(self.fam, Poisson):
            for v in range(n_nodes):
                mu = self.node_mean[v]
                k = int(math.ceil(mu + 15.0 * math.sqrt(mu) + 25.0))
                tables[v] = stats.poisson.pmf(np.arange(k + 1), mu)
        else:
            p = self.mean
            for v in range(n_nodes - 1, -1, -1):
                if tree.left[v] < 0:
                    i = tree.lo[v]
                    tables[v] = np.array([1.0 - p[i], p[i]])
                else:
                    tables[v] = np.clip(np.convolve(tables[tree.left[v]], tables[tree.right[v]]), 0.0, None)
        length = np.array([t.size for t in tables], dtype=np.int64)
        self._off = np.concatenate([[0], np.cumsum(length)[:-1]]).astype(np.int64)
        self._len = length
        self._pmf = np.concatenate(tables)
        self._root_cdf = np.cumsum(tables[0])

    def ubar(self, normals: np.ndarray) -> np.ndarray:
        """Centred statistics coupled to ``normals`` (shape (reps, n) or (n,))."""
        z = np.atleast_2d(np.asarray(normals, dtype=float))
        if z.shape[-1] != self.n:
            raise ShapeError(f"normals have length {z.shape[-1]}, expected {self.n}")
        if isinstance(self.fam, GaussMean):
            out = z.copy()
        elif isinstance(self.fam, (Poisson, Bernoulli)):
            G = np.ascontiguousarray(self.tree.node_sums(z))
            t = self.tree
            leaf = _kmt.couple_batch(
                G, t.left, t.right, t.lo, self._pmf, self._off, self._len,
                self._root_cdf, self.node_mean, self.node_var, self.n,
            )
            out = leaf.astype(float) - self.mean
        else:
            out = self._gamma_ubar(z)
        return out if np.ndim(normals) > 1 else out[0]

    def _gamma_ubar(self, z):
        # U_i = scale_i * E_i with E_i ~ Gamma(alpha, 1). The unit-scale vector has equal
        # scales, so its block sums are Gamma and the Beta splits below are exact.
        alpha = _gamma_shape(self.fam)
        t = self.tree
        scale = self.mean / alpha
        w = z / scale  # N(0, alpha) per coordinate, matching Var(E_i)
        G = t.node_sums(w)
        shape = alpha * (t.hi - t.lo)
        totals = np.empty_like(G)
        totals[:, 0] = _gamma_quantile(G[:, 0] / np.sqrt(shape[0]), shape[0])
        for nodes in t.levels():
            L, R = t.left[nodes], t.right[nodes]
            sv, sl, sr = shape[nodes], shape[L], shape[R]
            zc = (G[:, L] - G[:, nodes] * sl / sv) / np.sqrt(sl * sr / sv)
            u = np.clip(special.ndtr(zc), 1e-300, 1 - 1e-16)
            frac = special.betaincinv(sl, sr, u)
            totals[:, L] = totals[:, nodes] * frac
            totals[:, R] = totals[:, nodes] - totals[:, L]
        leaves = np.flatnonzero(t.left < 0)
        out = np.empty((z.shape[0], self.n))
        out[:, t.lo[leaves]] = totals[:, leaves]
        return out * scale - self.mean


def _gamma_shape(fam: ExpFamily) -> float:
    """Shape of the Gamma law of U: 1 for Exponential, 1/2 for GaussVar."""
    return 1.0 if isinstance(fam, Exponential) else 0.5


def _gamma_quantile(z, shape):
    """Gamma(shape, 1) quantile at Phi(z), using the upper tail for z > 0."""
    z = np.asarray(z, dtype=float)
    lower = stats.gamma.ppf(np.clip(special.ndtr(z), 1e-300, None), shape)
    upper = stats.gamma.isf(np.clip(special.ndtr(-z), 1e-300, None), shape)
    return np.where(z < 0, lower, upper)


def _draw_normals(fam: ExpFamily, theta, rng) -> np.ndarray:
    return np.sqrt(fam.fisher_info(theta)) * rng.standard_normal(theta.size)


def _make_run(coupler, seed) -> CouplingRun:
    rng = make_rng(seed)
    normals = _draw_normals(coupler.fam, coupler.theta, rng)
    ubar = coupler.ubar(normals)
    x = _x_from_ubar(coupler.fam, coupler.theta, ubar, rng)
    # keep the coupler's centred values: recomputing them from x would add rounding
    return CouplingRun(coupler.fam, coupler.theta, x, normals, coupler.scheme, seed, ubar)


def quantile_couple(fam: ExpFamily, theta, seed) -> CouplingRun:
    """Per-coordinate quantile coupling of ``X~_i`` with ``N_i ~ N(0, I(theta_i))``."""
    return _make_run(QuantileCoupler(fam, theta), seed)


def dyadic_couple(fam: ExpFamily, theta, seed) -> CouplingRun:
    """Dyadic block coupling; ``len(theta)`` must be a power of two."""
    th = _check_theta(fam, theta)
    if not _is_pow2(th.size):
        raise ConfigError(f"dyadic coupling needs a power-of-two length, got {th.size}")
    return _make_run(DyadicCoupler(fam, th), seed)


def s_n(run: CouplingRun, f: GridFunction | np.ndarray) -> float:
    """S_n(f) = sum_i f(t_i) (U(X~_i) - b(theta_i) - N_i)."""
    vals = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    if vals.shape != (run.n,):
        raise ShapeError(f"function has {vals.size} values, run has {run.n}")
    return float(np.dot(vals, run.u_bar - run.normals))


def holder_dictionary(n: int, size: int = 32, holder_const: float = 1.0, seed: int = 20240) -> np.ndarray:
    """Rows of Hölder-1/2 test functions with values in [-1, 1] (fixed seeds)."""
    rows = [np.ones(n)]
    rows += [sample_holder(0.5, holder_const, (-1.0, 1.0), n, (seed, k)).values for k in range(size - 1)]
    return np.vstack(rows[:size])


def _coupled_differences(fam, theta, scheme, reps, seed, batch=100):
    """Yield batches of U~ - N under the requested scheme."""
    if scheme is Scheme.DYADIC_BLOCKS:
        coupler = DyadicCoupler(fam, theta)
    else:
        coupler = QuantileCoupler(fam, theta)
    sd = np.sqrt(fam.fisher_info(theta))
    seeds = child_seeds(seed, reps)
    for start in range(0, reps, batch):
        rngs = [np.random.default_rng(s) for s in seeds[start:start + batch]]
        normals = sd * np.vstack([r.standard_normal(theta.size) for r in rngs])
        if scheme is Scheme.UNCOUPLED:
            # independent redraw: the null comparison without any coupling
            x = np.vstack([fam.sample(theta, r) for r in rngs])
            ubar = fam.u_stat(x) - coupler.mean
        else:
            ubar = coupler.ubar(normals)
        yield ubar - normals


def _max_abs_sn(fam, theta, dictionary, scheme, reps, seed):
    out = [np.max(np.abs(d @ dictionary.T), axis=1) for d in _coupled_differences(fam, theta, scheme, reps, seed)]
    return np.concatenate(out)


@dataclass(frozen=True)
class TailFit:
    x_grid: np.ndarray
    survival: np.ndarray
    c1_fit: float
    c2_fit: float
    r2: float
    n: int
    reps: int
    dict_size: int
    scheme: Scheme
    degenerate: bool
    scale: float
    exact: bool = False

    @property
    def passed(self) -> bool:
        """Exponential decay fitted: c2 > 0 with r^2 >= 0.9.

        An all-zero survival passes only for an exact coupling (Gaussian
        family); otherwise there is nothing to fit and the test fails.
        """
        if self.degenerate:
            return self.exact
        if not math.isfinite(self.c2_fit):
            return False
        return bool(self.c2_fit > 0 and self.r2 >= 0.9)

    def fitted(self) -> np.ndarray:
        return self.c1_fit * np.exp(-self.c2_fit * self.x_grid)

    def to_rows(self) -> list[dict]:
        return [
            {"x": float(x), "survival": float(s), "fitted": float(f)}
            for x, s, f in zip(self.x_grid, self.survival, self.fitted())
        ]

    def summary(self) -> dict:
        return {
            "c1_fit": self.c1_fit, "c2_fit": self.c2_fit, "r2": self.r2, "n": self.n,
            "reps": self.reps, "dict_size": self.dict_size, "scheme": self.scheme.value,
            "degenerate": self.degenerate, "exact": self.exact, "scale": self.scale, "passed": self.passed,
        }


def _fit_tail(x_grid, survival):
    keep = survival > 0
    if keep.sum() < 2:
        return float("nan"), float("nan"), float("nan")
    x, y = x_grid[keep], np.log(survival[keep])
    res = stats.linregress(x, y)
    r2 = res.rvalue**2 if keep.sum() > 2 else 1.0
    return float(math.exp(res.intercept)), float(-res.slope), float(r2)


def kmt_tail_test(
    fam: ExpFamily,
    theta0_value: float,
    n: int,
    dict_size: int = 32,
    reps: int = 500,
    seed=0,
    holder_const: float = 1.0,
    x_grid=None,
    scale: float | None = None,
    scheme: Scheme = Scheme.DYADIC_BLOCKS,
) -> TailFit:
    """Empirical tail of max over a Hölder-1/2 dictionary of |S_n(f)|.

    The survival function ``P(max_f |S_n(f)| > x * scale)`` is estimated on
    ``x_grid`` (default 0.5, 1, ..., 5) with ``scale = log(n)^2`` unless given,
    and ``log survival`` is fitted linearly in ``x`` over its nonzero entries.
    """
    if not _is_pow2(n):
        raise ConfigError(f"n must be a power of two, got {n}")
    if reps < 200:
        raise ConfigError(f"reps must be at least 200, got {reps}")
    x_grid = X_GRID if x_grid is None else np.asarray(x_grid, dtype=float)
    scale = math.log(n) ** 2 if scale is None else float(scale)
    theta = np.full(n, float(theta0_value))
    dictionary = holder_dictionary(n, dict_size, holder_const)
    m = _max_abs_sn(fam, theta, dictionary, Scheme(scheme), reps, seed)
    survival = np.array([np.mean(m > x * scale) for x in x_grid])
    degenerate = bool(np.all(survival == 0))
    c1, c2, r2 = _fit_tail(x_grid, survival)
    exact = isinstance(fam, GaussMean) and Scheme(scheme) is not Scheme.UNCOUPLED
    return TailFit(x_grid, survival, c1, c2, r2, n, reps, dict_size, Scheme(scheme), degenerate, scale, exact)


def growth_exponent(
    fam: ExpFamily,
    theta_value: float,
    n_list,
    reps: int = 200,
    seed=0,
    scheme: Scheme = Scheme.DYADIC_BLOCKS,
    dict_size: int = 32,
):
    """Slope of log median(max_f |S_n(f)|) against log n.

    Returns ``(slope, medians)``. Polylogarithmic growth shows up as a small
    slope; independent redraws (``Scheme.UNCOUPLED``) give about 1/2. When
    every median is zero the slope is ``-inf``.
    """
    medians = []
    for n in n_list:
        theta = np.full(int(n), float(theta_value))
        dictionary = holder_dictionary(int(n), dict_size)
        m = _max_abs_sn(fam, theta, dictionary, Scheme(scheme), reps, derive(seed, int(n)))
        medians.append(float(np.median(m)))
    if not any(medians):
        # exact coupling (Gaussian family): nothing grows
        return float("-inf"), medians
    slope = stats.linregress(np.log(np.asarray(n_list, dtype=float)), np.log(medians)).slope
    return float(slope), medians

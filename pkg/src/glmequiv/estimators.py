"""Preliminary kernel estimator of the regression function.

The Nadaraya–Watson smoother of the sufficient statistics estimates the
mean-scale function ``g = b(f)``; clipping to ``Lambda0 = b(theta0)`` and
applying the inverse mean map gives an estimate of ``f`` on the canonical scale.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft, integrate

from ._rng import child_seeds, derive
from .errors import ConfigError, DomainError, InvariantError, NumericalError
from .expfam import ExpFamily, check_regularity
from .experiments import ExperimentSample, Kind, simulate_glm
from .funcspace import GridFunction, design, rates, sample_holder

__all__ = [
    "KernelSpec",
    "epanechnikov",
    "EstimatorOutput",
    "design_density",
    "smooth",
    "nadaraya_watson",
    "finalize_estimate",
    "bias_constant",
    "net_project",
    "ES1Report",
    "es1_experiment",
]


@dataclass(frozen=True)
class KernelSpec:
    """A bounded kernel supported on [-tau, tau] integrating to one."""

    tau: float
    k_max: float
    evaluator: Callable
    holder_beta: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if self.tau <= 0 or self.k_max <= 0:
            raise InvariantError("tau and k_max must be positive")
        mass, _ = integrate.quad(self.evaluator, -self.tau, self.tau, epsabs=1e-12, epsrel=1e-12)
        if abs(mass - 1.0) > 1e-8:
            raise InvariantError(f"kernel integrates to {mass}, not 1")
        probe = np.linspace(-1.5 * self.tau, 1.5 * self.tau, 3001)
        vals = np.asarray(self.evaluator(probe), dtype=float)
        if np.any(vals < 0) or np.any(vals > self.k_max * (1 + 1e-12)):
            raise InvariantError("kernel values must lie in [0, k_max]")
        if np.any(vals[np.abs(probe) >= self.tau] != 0):
            raise InvariantError("kernel must vanish outside (-tau, tau)")

    def __call__(self, u):
        return np.asarray(self.evaluator(np.asarray(u, dtype=float)), dtype=float)


def _epan(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


def epanechnikov() -> KernelSpec:
    """K(u) = 3/4 (1 - u^2) on [-1, 1]."""
    return KernelSpec(1.0, 0.75, _epan, 1.0, "epanechnikov")


@dataclass(frozen=True)
class EstimatorOutput:
    g_star: GridFunction
    rho: GridFunction
    bandwidth: float
    g_starstar: GridFunction | None = None
    f_star: GridFunction | None = None
    lipschitz: float | None = None


def design_density(kernel: KernelSpec, n: int, delta_n: float, t) -> float | np.ndarray:
    """rho_n(t) = (n delta)^{-1} sum_i K((t_i - t)/delta)."""
    tt = np.asarray(t, dtype=float)
    if np.any((tt < 0) | (tt > 1)):
        raise DomainError("t must lie in [0, 1]")
    if not 0 < delta_n < 1:
        raise DomainError("delta_n must lie in (0, 1)")
    ti = design(n)
    vals = kernel((ti[None, :] - np.atleast_1d(tt)[:, None]) / delta_n).sum(axis=1) / (n * delta_n)
    return float(vals[0]) if tt.ndim == 0 else vals


def _weights(kernel: KernelSpec, n: int, delta_n: float) -> np.ndarray:
    half = int(math.floor(kernel.tau * n * delta_n))
    return kernel(np.arange(-half, half + 1) / (n * delta_n))


def smooth(y, kernel: KernelSpec, delta_n: float):
    """Kernel-weighted local means of ``y`` at every grid point.

    Returns ``(g, rho)`` where ``rho`` is the design density on the grid.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    w = _weights(kernel, n, delta_n)
    half = (w.size - 1) // 2
    num = np.convolve(y, w)[half:half + n]
    den = np.convolve(np.ones(n), w)[half:half + n]
    rho = den / (n * delta_n)
    if np.any(rho < 1e-12):
        raise NumericalError("design density vanishes; bandwidth too small for the grid")
    return num / den, rho


def nadaraya_watson(sample: ExperimentSample, kernel: KernelSpec, delta_n: float) -> EstimatorOutput:
    """Nadaraya–Watson estimate of g = b(f) from a regression sample.

    Gaussian samples are accepted too; their data are smoothed as they are.
    """
    if not 0 < delta_n < 0.5:
        raise DomainError(f"delta_n must lie in (0, 1/2), got {delta_n}")
    y = sample.u if isinstance(sample, ExperimentSample) else np.asarray(sample, dtype=float)
    g, rho = smooth(y, kernel, delta_n)
    return EstimatorOutput(GridFunction(g), GridFunction(rho), delta_n)


def finalize_estimate(out: EstimatorOutput, fam: ExpFamily, lambda_range=None) -> EstimatorOutput:
    """Clip g* to ``lambda_range`` (default b(theta0)) and map back by the inverse mean."""
    lo, hi = fam.lambda0 if lambda_range is None else lambda_range
    g2 = np.clip(out.g_star.values, lo, hi)
    f_star = fam.inverse_mean(g2)
    i_min, _ = check_regularity(fam)
    return EstimatorOutput(
        out.g_star, out.rho, out.bandwidth, GridFunction(g2), GridFunction(f_star), 1.0 / i_min
    )


def bias_constant(kernel: KernelSpec, fam: ExpFamily, beta: float, holder_const: float, rho_min: float) -> float:
    """c5 = (2 tau)^beta I_max L k_max / rho_min, the noise-free sup-bias constant over gamma_n."""
    _, i_max = check_regularity(fam)
    return (2.0 * kernel.tau) ** beta * i_max * holder_const * kernel.k_max / rho_min


def net_project(f: GridFunction, step: float, n_coef: int = 32, theta0=None) -> GridFunction:
    """Project onto a finite net: round the leading cosine coefficients to a lattice.

    Only provided for ``n <= 512``; the net over the full class is exponentially
    large and is never needed beyond small desk-scale illustrations.
    """
    if f.n > 512:
        raise ConfigError("net projection is only provided for n <= 512")
    if step <= 0:
        raise DomainError("lattice step must be positive")
    c = fft.dct(f.values, type=2, norm="ortho")
    c[n_coef:] = 0.0
    c = np.round(c / step) * step
    vals = fft.idct(c, type=2, norm="ortho")
    if theta0 is not None:
        vals = np.clip(vals, *theta0)
    return GridFunction(vals, f.beta, f.holder_const, f.theta0)


@dataclass(frozen=True)
class ES1Report:
    rows: list
    q95: dict
    fitted_c1: float
    failure_rate: float
    stability: float
    beta: float
    family: str

    @property
    def passed(self) -> bool:
        return bool(self.stability <= 2.0 and self.failure_rate <= 0.05)

    def summary(self) -> dict:
        return {
            "fitted_c1": self.fitted_c1, "failure_rate": self.failure_rate,
            "stability": self.stability, "q95": {str(k): v for k, v in self.q95.items()},
            "beta": self.beta, "family": self.family, "passed": self.passed,
        }


def es1_experiment(
    fam: ExpFamily,
    beta: float,
    holder_const: float,
    n_list,
    reps: int,
    seed=0,
    kernel: KernelSpec | None = None,
    kappa0: float = 1.0,
    noise: bool = True,
) -> ES1Report:
    """Sup-norm error of the preliminary estimator relative to gamma_n.

    For every ``n`` and replication a fresh ``f`` is drawn from the Hölder
    class inside ``theta0``, the regression sample is simulated (or replaced by
    its mean ``b(f)`` when ``noise=False``) and the canonical-scale estimate is
    compared with ``f``. ``fitted_c1`` is the largest per-n 95th percentile of
    ``sup-error / gamma_n``; the run passes when those percentiles agree within
    a factor two and at most 5% of all ratios exceed ``fitted_c1``.
    """
    if reps < 20:
        raise ConfigError(f"reps must be at least 20, got {reps}")
    if not 0.5 < beta < 1.0:
        warnings.warn(f"beta = {beta} is outside (1/2, 1), where the estimator's bias bound is stated")
    kernel = epanechnikov() if kernel is None else kernel
    rows = []
    for n in n_list:
        n = int(n)
        r = rates(n, beta, kappa0)
        for rep, ss in enumerate(child_seeds(derive(seed, n), reps)):
            f_seed, x_seed = ss.spawn(2)
            f = sample_holder(beta, holder_const, fam.theta0, n, f_seed)
            if noise:
                sample = simulate_glm(fam, f, x_seed)
            else:
                sample = ExperimentSample(Kind.GLM, fam, f, None, n, None, fam.mean_param(f.values))
            out = finalize_estimate(nadaraya_watson(sample, kernel, r.delta_n), fam)
            err = float(np.max(np.abs(out.f_star.values - f.values)))
            rows.append({"n": n, "rep": rep, "sup_error": err, "gamma_n": r.gamma_n, "ratio": err / r.gamma_n})
    ratios = {}
    for row in rows:
        ratios.setdefault(row["n"], []).append(row["ratio"])
    q95 = {n: float(np.percentile(v, 95)) for n, v in ratios.items()}
    c1 = max(q95.values())
    fail = float(np.mean([row["ratio"] > c1 for row in rows]))
    stability = max(q95.values()) / min(q95.values())
    return ES1Report(rows, q95, c1, fail, stability, beta, fam.name)

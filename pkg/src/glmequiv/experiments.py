"""The regression experiment and its two Gaussian accompanying experiments.

Three observation schemes on the grid ``t_i = i/n``:

* ``Glm``:         X_i ~ P_{f(t_i)} independently;
* ``GaussHetero``: Y_i = f(t_i) + I(f0(t_i))^{-1/2} eps_i, noise level frozen at f0;
* ``GaussVst``:    Y_i = Gamma(f(t_i)) + eps_i.

Log-likelihood ratios are computed in closed form and kept on the log scale.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._rng import make_rng
from .errors import ConfigError, ShapeError
from .expfam import ExpFamily, check_regularity, third_cumulant_bound
from .funcspace import GridFunction

__all__ = [
    "Kind",
    "ExperimentSample",
    "LogLikelihoodRatio",
    "simulate_glm",
    "simulate_gauss_hetero",
    "simulate_gauss_vst",
    "loglr_glm",
    "loglr_gauss_hetero",
    "loglr_gauss_vst",
    "loglr",
    "taylor_remainders",
    "remainder_bounds",
]


class Kind(str, Enum):
    GLM = "Glm"
    GAUSS_HETERO = "GaussHetero"
    GAUSS_VST = "GaussVst"


@dataclass(frozen=True, eq=False)
class ExperimentSample:
    kind: Kind
    family: ExpFamily
    f: GridFunction
    f0: GridFunction | None
    n: int
    seed: object
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.n,):
            raise ShapeError(f"data has shape {self.data.shape}, expected ({self.n},)")
        if self.kind is Kind.GAUSS_HETERO and self.f0 is None:
            raise ConfigError("a heteroscedastic Gaussian sample needs f0")

    @property
    def u(self) -> np.ndarray:
        """Sufficient statistics U(X_i) (the data themselves for the Gaussian kinds)."""
        if self.kind is Kind.GLM:
            return self.family.u_stat(self.data)
        return self.data

    def sidecar(self) -> dict:
        return {
            "kind": self.kind.value,
            "family": self.family.name,
            "n": self.n,
            "seed": _seed_repr(self.seed),
            "f_hash": self.f.digest(),
            "f0_hash": self.f0.digest() if self.f0 is not None else None,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "t_i", "x"])
        for i, (t, x) in enumerate(zip(self.f.t, self.data), start=1):
            w.writerow([i, repr(float(t)), repr(float(x))])
        return buf.getvalue()


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed if isinstance(seed, (int, type(None))) else repr(seed)


@dataclass(frozen=True)
class LogLikelihoodRatio:
    kind: Kind
    value: float
    f: GridFunction
    f0: GridFunction

    def __float__(self):
        return self.value


def _same_grid(*funcs):
    n = funcs[0].n
    for g in funcs[1:]:
        if g is not None and g.n != n:
            raise ShapeError(f"grid sizes differ: {n} vs {g.n}")
    return n


def simulate_glm(fam: ExpFamily, f: GridFunction, seed) -> ExperimentSample:
    """Draw X_i ~ P_{f(t_i)} independently."""
    fam.check_theta(f.values)
    data = np.asarray(fam.sample(f.values, make_rng(seed)), dtype=float)
    return ExperimentSample(Kind.GLM, fam, f, None, f.n, seed, data)


def simulate_gauss_hetero(fam: ExpFamily, f0: GridFunction, f: GridFunction, seed) -> ExperimentSample:
    """Draw Y_i = f(t_i) + I(f0(t_i))^{-1/2} eps_i."""
    n = _same_grid(f, f0)
    fam.check_theta(f.values)
    sd = 1.0 / np.sqrt(fam.fisher_info(f0.values))
    data = f.values + sd * make_rng(seed).standard_normal(n)
    return ExperimentSample(Kind.GAUSS_HETERO, fam, f, f0, n, seed, data)


def simulate_gauss_vst(fam: ExpFamily, f: GridFunction, seed) -> ExperimentSample:
    """Draw Y_i = Gamma(f(t_i)) + eps_i."""
    data = fam.gamma_canonical(f.values) + make_rng(seed).standard_normal(f.n)
    return ExperimentSample(Kind.GAUSS_VST, fam, f, None, f.n, seed, data)


def _data(sample, n):
    u = sample.u if isinstance(sample, ExperimentSample) else np.asarray(sample, dtype=float)
    if u.shape[-1] != n:
        raise ShapeError(f"data length {u.shape[-1]} does not match grid size {n}")
    return u


def loglr_glm(fam: ExpFamily, f: GridFunction, f0: GridFunction, data) -> LogLikelihoodRatio:
    """log dP_f/dP_f0 = sum (f - f0) U(X_i) - sum (V(f) - V(f0)).

    ``data`` may be an :class:`ExperimentSample` or raw sufficient statistics.
    """
    n = _same_grid(f, f0)
    u = _data(data, n)
    value = float(np.dot(f.values - f0.values, u) - np.sum(fam.cumulant(f.values) - fam.cumulant(f0.values)))
    return LogLikelihoodRatio(Kind.GLM, value, f, f0)


def loglr_gauss_hetero(fam: ExpFamily, f: GridFunction, f0: GridFunction, data, center: GridFunction | None = None):
    """Gaussian log-LR with precisions I(center(t_i)).

    The precision profile is part of the experiment: it is taken from
    ``center``, else from the sample's own ``f0``, else from the ``f0`` argument.
    Keeping it fixed makes the ratio antisymmetric and multiplicative along
    chains of hypotheses.
    """
    n = _same_grid(f, f0, center)
    y = _data(data, n)
    if center is None:
        center = data.f0 if isinstance(data, ExperimentSample) and data.f0 is not None else f0
    prec = fam.fisher_info(center.values)
    d = f.values - f0.values
    value = float(np.dot(prec * d, y) - 0.5 * np.dot(prec, f.values**2 - f0.values**2))
    return LogLikelihoodRatio(Kind.GAUSS_HETERO, value, f, f0)


def loglr_gauss_vst(fam: ExpFamily, f: GridFunction, f0: GridFunction, data) -> LogLikelihoodRatio:
    """Unit-variance Gaussian log-LR between means Gamma(f) and Gamma(f0)."""
    n = _same_grid(f, f0)
    y = _data(data, n)
    m1, m0 = fam.gamma_canonical(f.values), fam.gamma_canonical(f0.values)
    value = float(np.dot(m1 - m0, y) - 0.5 * np.sum(m1**2 - m0**2))
    return LogLikelihoodRatio(Kind.GAUSS_VST, value, f, f0)


_LOGLR = {Kind.GLM: loglr_glm, Kind.GAUSS_HETERO: loglr_gauss_hetero, Kind.GAUSS_VST: loglr_gauss_vst}


def loglr(kind, fam, f, f0, data) -> LogLikelihoodRatio:
    return _LOGLR[Kind(kind)](fam, f, f0, data)


def taylor_remainders(fam: ExpFamily, f0: GridFunction, g: GridFunction, gamma_star: float) -> tuple[float, float]:
    """Second- and first-order Taylor remainders of the cumulant along f = f0 + gamma_star g.

    ``R  = sum [V(f) - V(f0) - gamma g V'(f0) - gamma^2 g^2 V''(f0)/2]``
    ``R0 = sum [V(f) - V(f0) - gamma g V'(f0)]``
    """
    _same_grid(f0, g)
    h = gamma_star * g.values
    r = float(np.sum(fam.taylor_tail(f0.values, h, 2)))
    r0 = float(np.sum(fam.taylor_tail(f0.values, h, 1)))
    return r, r0


def remainder_bounds(fam: ExpFamily, g_sup: float, gamma_star: float, n: int, theta0=None, eps0=None):
    """Upper bounds ``(|R|, |R0|)`` matching :func:`taylor_remainders`.

    ``|R| <= g_sup^3 c5 gamma^3 n / 6`` with ``c5 = sup |V'''|`` over theta0
    fattened by eps0/2, and ``|R0| <= g_sup^2 I_max gamma^2 n / 2``. Both require
    ``g_sup * gamma_star <= eps0 / 2``.
    """
    theta0 = fam.theta0 if theta0 is None else theta0
    eps0 = fam.eps0 if eps0 is None else eps0
    if g_sup * gamma_star > eps0 / 2 + 1e-15:
        raise ConfigError("perturbation leaves the eps0/2-fattened interval; bounds do not apply")
    c5 = third_cumulant_bound(fam, theta0, eps0)
    _, i_max = check_regularity(fam, theta0, eps0)
    r_bound = g_sup**3 * c5 * gamma_star**3 * n / 6.0
    r0_bound = 0.5 * g_sup**2 * i_max * gamma_star**2 * n
    return r_bound, r0_bound


def gaussian_shift_loglr(f: GridFunction, f0: GridFunction, x) -> float:
    """Reference Gaussian location log-LR, used to cross-check the GaussMean family."""
    x = np.asarray(x, dtype=float)
    return float(np.dot(f.values - f0.values, x) - 0.5 * np.sum(f.values**2 - f0.values**2))


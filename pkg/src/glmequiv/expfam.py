"""One-parameter exponential families in canonical form.

A family is described by its sufficient statistic ``U`` and cumulant function
``V``; everything else (mean map, Fisher information, inverse mean map,
Legendre transform, variance-stabilizing transform) is derived from these::

    P_theta(dx) = exp{theta * U(x) - V(theta)} mu(dx)
    b(theta) = V'(theta),  I(theta) = V''(theta),  a = b^{-1}
    F'(lam) = sqrt(a'(lam)),  Gamma(theta) = F(b(theta))

The five built-in families carry closed forms for every map. ``CustomFamily``
accepts an arbitrary cumulant and falls back to numerical differentiation,
bisection and quadrature.
"""
from __future__ import annotations

import csv
import io
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, ClassVar, NamedTuple

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigError, DomainError

__all__ = [
    "ExpFamily",
    "GaussMean",
    "GaussVar",
    "Poisson",
    "Bernoulli",
    "Exponential",
    "CustomFamily",
    "FAMILY_NAMES",
    "get_family",
    "check_regularity",
    "third_cumulant_bound",
    "moment_bound_check",
    "MomentBoundReport",
    "catalogue_rows",
    "catalogue_csv",
]

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr, scalar):
    return float(arr) if scalar else arr


def _check_open(x, lo, hi, what, fam_name):
    arr, scalar = _as_array(x)
    ok = np.isfinite(arr) & (arr > lo) & (arr < hi)
    if not np.all(ok):
        bad = arr[~ok] if arr.ndim else arr
        raise DomainError(
            f"{fam_name}: {what} must lie in ({lo}, {hi}); got {np.ravel(bad)[:3]}"
        )
    return arr, scalar


def _log1p_tail(x, order):
    """log1p(x) minus its Taylor polynomial of the given order, cancellation-free."""
    x = np.asarray(x, dtype=float)
    poly = np.zeros_like(x)
    for k in range(1, order + 1):
        poly = poly + (-1) ** (k + 1) * x**k / k
    direct = np.log1p(x) - poly
    small = np.abs(x) < 0.1
    if np.any(small):
        xs = np.where(small, x, 0.0)
        series = np.zeros_like(x)
        for k in range(order + 1, order + 40):
            series = series + (-1) ** (k + 1) * xs**k / k
        direct = np.where(small, series, direct)
    return direct


def _expm1_tail(h, order):
    """exp(h) minus its Taylor polynomial of the given order."""
    h = np.asarray(h, dtype=float)
    poly = np.zeros_like(h)
    fact = 1.0
    for k in range(0, order + 1):
        if k:
            fact *= k
        poly = poly + h**k / fact
    direct = np.exp(h) - poly
    small = np.abs(h) < 0.5
    if np.any(small):
        hs = np.where(small, h, 0.0)
        series = np.zeros_like(h)
        fact = math.factorial(order + 1)
        for k in range(order + 1, order + 30):
            if k > order + 1:
                fact *= k
            series = series + hs**k / fact
        direct = np.where(small, series, direct)
    return direct


@dataclass(frozen=True)
class ExpFamily(ABC):
    """Canonical exponential family with a regular subinterval ``theta0``.

    Subclasses set the class attributes ``name``, ``theta_domain`` (open
    interval of canonical parameters), ``lambda_domain`` (open range of the
    mean map) and ``discrete``.
    """

    theta0: tuple[float, float]
    eps0: float = 0.1

    name: ClassVar[str] = "abstract"
    theta_domain: ClassVar[tuple[float, float]] = (-math.inf, math.inf)
    lambda_domain: ClassVar[tuple[float, float]] = (-math.inf, math.inf)
    discrete: ClassVar[bool] = False
    formulas: ClassVar[dict] = {}

    def __post_init__(self):
        lo, hi = self.theta0
        if not lo < hi:
            raise ConfigError(f"theta0 must be a nondegenerate interval, got {self.theta0}")
        if self.eps0 <= 0:
            raise ConfigError("eps0 must be positive")
        dlo, dhi = self.theta_domain
        if not (dlo < lo and hi < dhi):
            raise ConfigError(f"theta0 {self.theta0} is not inside {self.theta_domain}")

    def with_params(self, theta0=None, eps0=None) -> "ExpFamily":
        return replace(
            self,
            theta0=tuple(theta0) if theta0 is not None else self.theta0,
            eps0=eps0 if eps0 is not None else self.eps0,
        )

    @property
    def lambda0(self) -> tuple[float, float]:
        """Image of ``theta0`` under the mean map."""
        return (self.mean_param(self.theta0[0]), self.mean_param(self.theta0[1]))

    @property
    def theta_mid(self) -> float:
        return 0.5 * (self.theta0[0] + self.theta0[1])

    def check_theta(self, theta):
        return _check_open(theta, *self.theta_domain, "theta", self.name)

    def check_lambda(self, lam):
        return _check_open(lam, *self.lambda_domain, "lambda", self.name)

    # -- calculus -----------------------------------------------------------
    def cumulant(self, theta):
        """V(theta), the log-Laplace transform of the base measure."""
        arr, s = self.check_theta(theta)
        return _ret(self._V(arr), s)

    def mean_param(self, theta):
        """b(theta) = V'(theta) = E_theta U(X)."""
        arr, s = self.check_theta(theta)
        return _ret(self._b(arr), s)

    def fisher_info(self, theta):
        """I(theta) = V''(theta) = Var_theta U(X)."""
        arr, s = self.check_theta(theta)
        return _ret(self._I(arr), s)

    def third_cumulant(self, theta):
        arr, s = self.check_theta(theta)
        return _ret(self._V3(arr), s)

    def inverse_mean(self, lam):
        """a(lam), the inverse of the mean map."""
        arr, s = self.check_lambda(lam)
        return _ret(self._a(arr), s)

    def legendre(self, lam):
        """Convex conjugate T(lam) = sup_theta {lam*theta - V(theta)}; T' = a."""
        arr, s = self.check_lambda(lam)
        th = self._a(arr)
        return _ret(arr * th - self._V(th), s)

    def vst(self, lam, strict: bool = True):
        """Variance-stabilizing transform F with F'(lam) = sqrt(a'(lam)).

        With ``strict=False`` the closed form is also evaluated on the boundary
        of the mean range (e.g. a sample mean of 0 for Poisson counts).
        """
        if strict:
            arr, s = self.check_lambda(lam)
        else:
            arr, s = _as_array(lam)
        return _ret(self._F(arr), s)

    def vst_inverse(self, y):
        arr, s = _as_array(y)
        return _ret(self._F_inv(arr), s)

    def gamma_canonical(self, theta):
        """Gamma(theta) = F(b(theta)); its derivative is sqrt(I(theta))."""
        arr, s = self.check_theta(theta)
        return _ret(self._Gamma(arr), s)

    def gamma_inverse(self, y):
        """Inverse of ``gamma_canonical`` (maps the stabilized scale back to theta)."""
        arr, s = _as_array(y)
        return _ret(self._a(self._F_inv(arr)), s)

    def taylor_tail(self, theta0, h, order: int):
        """V(theta0 + h) minus the Taylor polynomial of V at theta0 of degree ``order``.

        Evaluated without catastrophic cancellation where a closed form allows.
        """
        t0, s0 = self.check_theta(theta0)
        hh = np.asarray(h, dtype=float)
        self.check_theta(t0 + hh)
        out = self._taylor_tail(t0, hh, order)
        return _ret(out, s0 and hh.ndim == 0)

    def _taylor_tail(self, t0, h, order):
        derivs = [self._V, self._b, self._I, self._V3]
        acc = self._V(t0 + h)
        fact = 1.0
        for k in range(order + 1):
            if k:
                fact *= k
            acc = acc - derivs[k](t0) * h**k / fact
        return acc

    # -- sampling ------------------------------------------------------------
    def u_stat(self, x):
        return np.asarray(x, dtype=float)

    def sample(self, theta, rng: np.random.Generator, size=None):
        """Draw X ~ P_theta (``size`` independent copies, broadcast against theta)."""
        arr, s = self.check_theta(theta)
        out = self._sample(arr, rng, size)
        return float(out) if (s and size is None) else out

    def sample_sum(self, theta: float, n: int, rng: np.random.Generator, size=None):
        """Draw sum_{i<=n} U(X_i) for X_i i.i.d. P_theta, using the exact law of the sum."""
        arr, _ = self.check_theta(theta)
        return self._sample_sum(float(arr), int(n), rng, size)

    def quantile(self, theta, u):
        """Generalized inverse CDF of X under P_theta."""
        arr, s = self.check_theta(theta)
        uu = np.asarray(u, dtype=float)
        if np.any(~((uu > 0) & (uu < 1))):
            raise DomainError(f"{self.name}: u must lie in (0, 1)")
        out = self._quantile(arr, uu)
        return float(out) if (s and uu.ndim == 0) else out

    def cdf(self, theta, x):
        arr, _ = self.check_theta(theta)
        return self._cdf(arr, np.asarray(x, dtype=float))

    # -- closed forms supplied by subclasses ---------------------------------
    @abstractmethod
    def _V(self, th): ...

    @abstractmethod
    def _b(self, th): ...

    @abstractmethod
    def _I(self, th): ...

    @abstractmethod
    def _V3(self, th): ...

    @abstractmethod
    def _a(self, lam): ...

    @abstractmethod
    def _F(self, lam): ...

    @abstractmethod
    def _F_inv(self, y): ...

    def _Gamma(self, th):
        return self._F(self._b(th))

    @abstractmethod
    def _sample(self, th, rng, size): ...

    @abstractmethod
    def _sample_sum(self, th, n, rng, size): ...

    @abstractmethod
    def _quantile(self, th, u): ...

    @abstractmethod
    def _cdf(self, th, x): ...


@dataclass(frozen=True)
class GaussMean(ExpFamily):
    """N(theta, 1); U(x) = x, V = theta^2/2, I = 1."""

    theta0: tuple[float, float] = (-2.0, 2.0)
    eps0: float = 0.5
    gamma_offset: float = 0.0

    name = "GaussMean"
    formulas = {
        "V": "theta^2/2", "b": "theta", "I": "1", "F": "lambda", "Gamma": "theta",
    }

    def _V(self, th):
        return 0.5 * th * th

    def _b(self, th):
        return th * 1.0

    def _I(self, th):
        return np.ones_like(th)

    def _V3(self, th):
        return np.zeros_like(th)

    def _a(self, lam):
        return lam * 1.0

    def _F(self, lam):
        return lam + self.gamma_offset

    def _F_inv(self, y):
        return y - self.gamma_offset

    def _taylor_tail(self, t0, h, order):
        if order == 0:
            return t0 * h + 0.5 * h * h
        if order == 1:
            return 0.5 * h * h
        return np.zeros(np.broadcast(t0, h).shape)

    def _sample(self, th, rng, size):
        return th + rng.standard_normal(size if size is not None else th.shape)

    def _sample_sum(self, th, n, rng, size):
        return n * th + math.sqrt(n) * rng.standard_normal(size)

    def _quantile(self, th, u):
        return th + special.ndtri(u)

    def _cdf(self, th, x):
        return special.ndtr(x - th)


@dataclass(frozen=True)
class GaussVar(ExpFamily):
    """N(0, -1/theta) with U(x) = x^2/2; the mean parameter is half the variance."""

    theta0: tuple[float, float] = (-4.0, -0.25)
    eps0: float = 0.1

    name = "GaussVar"
    theta_domain = (-math.inf, 0.0)
    lambda_domain = (0.0, math.inf)
    formulas = {
        "V": "-log(-theta/(2*pi))/2", "b": "-1/(2*theta)", "I": "1/(2*theta^2)",
        "F": "log(lambda)/sqrt(2)", "Gamma": "log(-1/(2*theta))/sqrt(2)",
    }

    def u_stat(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x * x

    def _V(self, th):
        return -0.5 * np.log(-th / (2.0 * math.pi))

    def _b(self, th):
        return -0.5 / th

    def _I(self, th):
        return 0.5 / (th * th)

    def _V3(self, th):
        return -1.0 / th**3

    def _a(self, lam):
        return -0.5 / lam

    def _F(self, lam):
        return np.log(lam) * INV_SQRT2

    def _F_inv(self, y):
        return np.exp(math.sqrt(2.0) * y)

    def _Gamma(self, th):
        return -np.log(-2.0 * th) * INV_SQRT2

    def _taylor_tail(self, t0, h, order):
        x = h / t0
        if order == 0:
            return self._V(t0 + h)
        return -0.5 * _log1p_tail(x, order)

    def _sample(self, th, rng, size):
        z = rng.standard_normal(size if size is not None else th.shape)
        return np.sqrt(-1.0 / th) * z

    def _sample_sum(self, th, n, rng, size):
        return rng.gamma(0.5 * n, -1.0 / th, size)

    def _quantile(self, th, u):
        return np.sqrt(-1.0 / th) * special.ndtri(u)

    def _cdf(self, th, x):
        return special.ndtr(x * np.sqrt(-th))


@dataclass(frozen=True)
class Poisson(ExpFamily):
    """Poisson with intensity exp(theta); U(x) = x, V = exp(theta)."""

    theta0: tuple[float, float] = (-1.0, 1.0)
    eps0: float = 0.1

    name = "Poisson"
    lambda_domain = (0.0, math.inf)
    discrete = True
    formulas = {
        "V": "exp(theta)", "b": "exp(theta)", "I": "exp(theta)",
        "F": "2*sqrt(lambda)", "Gamma": "2*exp(theta/2)",
    }

    def _V(self, th):
        return np.exp(th)

    _b = _V
    _I = _V
    _V3 = _V

    def _a(self, lam):
        return np.log(lam)

    def _F(self, lam):
        return 2.0 * np.sqrt(lam)

    def _F_inv(self, y):
        return 0.25 * y * y

    def _Gamma(self, th):
        return 2.0 * np.exp(0.5 * th)

    def _taylor_tail(self, t0, h, order):
        return np.exp(t0) * _expm1_tail(h, order)

    def _sample(self, th, rng, size):
        return rng.poisson(np.exp(th), size).astype(float)

    def _sample_sum(self, th, n, rng, size):
        return rng.poisson(n * math.exp(th), size).astype(float)

    def _quantile(self, th, u):
        return stats.poisson.ppf(u, np.exp(th))

    def _cdf(self, th, x):
        return stats.poisson.cdf(x, np.exp(th))


@dataclass(frozen=True)
class Bernoulli(ExpFamily):
    """Bernoulli with success probability expit(theta); V = log(1 + e^theta)."""

    theta0: tuple[float, float] = (-2.0, 2.0)
    eps0: float = 0.1

    name = "Bernoulli"
    lambda_domain = (0.0, 1.0)
    discrete = True
    formulas = {
        "V": "log(1+exp(theta))", "b": "exp(theta)/(1+exp(theta))",
        "I": "exp(theta)/(1+exp(theta))^2", "F": "2*arcsin(sqrt(lambda))",
        "Gamma": "2*arcsin(sqrt(exp(theta)/(1+exp(theta))))",
    }

    def _V(self, th):
        return np.logaddexp(0.0, th)

    def _b(self, th):
        return special.expit(th)

    def _I(self, th):
        p = special.expit(th)
        return p * (1.0 - p)

    def _V3(self, th):
        p = special.expit(th)
        return p * (1.0 - p) * (1.0 - 2.0 * p)

    def _a(self, lam):
        return special.logit(lam)

    def _F(self, lam):
        return 2.0 * np.arcsin(np.sqrt(lam))

    def _F_inv(self, y):
        return np.sin(0.5 * y) ** 2

    def _sample(self, th, rng, size):
        p = special.expit(th)
        return (rng.random(size if size is not None else np.shape(p)) < p).astype(float)

    def _sample_sum(self, th, n, rng, size):
        return rng.binomial(n, float(special.expit(th)), size).astype(float)

    def _quantile(self, th, u):
        p = special.expit(th)
        return (u > 1.0 - p).astype(float)

    def _cdf(self, th, x):
        p = special.expit(th)
        return np.where(x < 0, 0.0, np.where(x < 1, 1.0 - p, 1.0))


@dataclass(frozen=True)
class Exponential(ExpFamily):
    """Exponential with rate -theta; U(x) = x, V = -log(-theta), b = -1/theta."""

    theta0: tuple[float, float] = (-4.0, -1.0)
    eps0: float = 0.1

    name = "Exponential"
    theta_domain = (-math.inf, 0.0)
    lambda_domain = (0.0, math.inf)
    formulas = {
        "V": "-log(-theta)", "b": "-1/theta", "I": "1/theta^2",
        "F": "log(lambda)", "Gamma": "-log(-theta)",
    }

    def _V(self, th):
        return -np.log(-th)

    def _b(self, th):
        return -1.0 / th

    def _I(self, th):
        return 1.0 / (th * th)

    def _V3(self, th):
        return -2.0 / th**3

    def _a(self, lam):
        return -1.0 / lam

    def _F(self, lam):
        return np.log(lam)

    def _F_inv(self, y):
        return np.exp(y)

    def _Gamma(self, th):
        return -np.log(-th)

    def _taylor_tail(self, t0, h, order):
        if order == 0:
            return self._V(t0 + h)
        return -_log1p_tail(h / t0, order)

    def _sample(self, th, rng, size):
        return rng.exponential(-1.0 / th, size if size is not None else th.shape)

    def _sample_sum(self, th, n, rng, size):
        return rng.gamma(float(n), -1.0 / th, size)

    def _quantile(self, th, u):
        return -np.log1p(-u) / (-th)

    def _cdf(self, th, x):
        return np.where(x <= 0, 0.0, -np.expm1(th * np.maximum(x, 0.0)))


@dataclass(frozen=True)
class CustomFamily(ExpFamily):
    """A user-defined family given by its cumulant function.

    Derivatives come from central differences, the inverse mean map from
    bisection (tolerance 1e-12) and the stabilizing transform from quadrature
    of sqrt(a') anchored at ``vst_anchor`` (F(vst_anchor) = 0). Sampling needs a
    user-supplied quantile function ``quantile_fn(theta, u)``.
    """

    theta0: tuple[float, float] = (-1.0, 1.0)
    eps0: float = 0.1
    V: Callable = field(default=None, compare=False)
    domain: tuple[float, float] = (-math.inf, math.inf)
    quantile_fn: Callable = field(default=None, compare=False)
    label: str = "Custom"
    step: float = 1e-4
    vst_anchor: float | None = None

    @property
    def name(self):  # type: ignore[override]
        return self.label

    @property
    def theta_domain(self):  # type: ignore[override]
        return self.domain

    @property
    def lambda_domain(self):  # type: ignore[override]
        lo, hi = self.domain
        span = 50.0
        lo = lo if math.isfinite(lo) else -span
        hi = hi if math.isfinite(hi) else span
        eps = 1e-9 * max(1.0, hi - lo)
        return (float(self._b(np.asarray(lo + eps))), float(self._b(np.asarray(hi - eps))))

    def __post_init__(self):
        if self.V is None:
            raise ConfigError("CustomFamily needs a cumulant function V")
        super().__post_init__()

    def _V(self, th):
        return np.vectorize(self.V, otypes=[float])(th)

    def _b(self, th):
        h = self.step
        return (self._V(th + h) - self._V(th - h)) / (2 * h)

    def _I(self, th):
        h = self.step
        return (self._V(th + h) - 2 * self._V(th) + self._V(th - h)) / (h * h)

    def _V3(self, th):
        h = 10 * self.step
        return (self._V(th + 2 * h) - 2 * self._V(th + h) + 2 * self._V(th - h) - self._V(th - 2 * h)) / (2 * h**3)

    def _a(self, lam):
        lo, hi = self.domain
        lo = lo if math.isfinite(lo) else -50.0
        hi = hi if math.isfinite(hi) else 50.0

        def one(y):
            a, c = lo + 1e-12, hi - 1e-12
            while c - a > 1e-12 * max(1.0, abs(a) + abs(c)):
                mid = 0.5 * (a + c)
                if self._b(np.asarray(mid)) < y:
                    a = mid
                else:
                    c = mid
            return 0.5 * (a + c)

        return np.vectorize(one, otypes=[float])(lam)

    def _F(self, lam):
        anchor = self.vst_anchor
        if anchor is None:
            anchor = float(self._b(np.asarray(self.theta_mid)))

        def integrand(y):
            return 1.0 / math.sqrt(float(self._I(np.asarray(self._a(np.asarray(y))))))

        return np.vectorize(lambda y: integrate.quad(integrand, anchor, y)[0], otypes=[float])(lam)

    def _F_inv(self, y):
        raise NotImplementedError("vst_inverse is not available for custom families")

    def _quantile(self, th, u):
        if self.quantile_fn is None:
            raise ConfigError("CustomFamily has no quantile function")
        return np.vectorize(self.quantile_fn, otypes=[float])(th, u)

    def _sample(self, th, rng, size):
        shape = size if size is not None else np.shape(th)
        u = rng.random(shape)
        return self._quantile(np.broadcast_to(th, shape), u)

    def _sample_sum(self, th, n, rng, size):
        shape = (n,) if size is None else tuple(np.atleast_1d(size)) + (n,)
        return self.u_stat(self._sample(np.full(shape, th), rng, None)).sum(axis=-1)

    def _cdf(self, th, x):
        raise NotImplementedError


_REGISTRY = {
    "gaussmean": GaussMean,
    "gaussvar": GaussVar,
    "poisson": Poisson,
    "bernoulli": Bernoulli,
    "exponential": Exponential,
}
FAMILY_NAMES = ("GaussMean", "GaussVar", "Poisson", "Bernoulli", "Exponential")


def get_family(name: str | ExpFamily, **params) -> ExpFamily:
    """Look up a built-in family by (case- and separator-insensitive) name."""
    if isinstance(name, ExpFamily):
        return name.with_params(**params) if params else name
    key = name.lower().replace("-", "").replace("_", "")
    if key not in _REGISTRY:
        raise ConfigError(f"unknown family {name!r}; expected one of {FAMILY_NAMES}")
    cls = _REGISTRY[key]
    if params.get("theta0") is not None:
        params["theta0"] = tuple(params["theta0"])
    return cls(**{k: v for k, v in params.items() if v is not None})


def _grid(lo, hi, step):
    k = int(math.ceil((hi - lo) / step))
    return np.linspace(lo, hi, k + 1)


def check_regularity(
    fam: ExpFamily, theta0=None, eps0=None, rel_step: float = 1e-3, fattened_min: bool = False
):
    """Scan the Fisher information for the regularity constants.

    Returns ``(I_min, I_max)``: the infimum of I over ``theta0`` and the supremum
    over ``theta0`` fattened by ``eps0``. Both are grid scans with step
    ``rel_step * |theta0|``, endpoints included. With ``fattened_min=True`` the
    infimum is also taken over the fattened interval, which is the version that
    bounds I uniformly on every eps0-ball around theta0.
    """
    lo, hi = fam.theta0 if theta0 is None else theta0
    eps0 = fam.eps0 if eps0 is None else eps0
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise DomainError(f"theta0 must be a finite nondegenerate interval, got {(lo, hi)}")
    dlo, dhi = fam.theta_domain
    if not (dlo < lo - eps0 and hi + eps0 < dhi):
        raise DomainError(
            f"fattened interval [{lo - eps0}, {hi + eps0}] leaves the parameter domain {fam.theta_domain}"
        )
    step = rel_step * (hi - lo)
    outer = fam.fisher_info(_grid(lo - eps0, hi + eps0, step))
    inner = outer if fattened_min else fam.fisher_info(_grid(lo, hi, step))
    return float(inner.min()), float(outer.max())


def third_cumulant_bound(fam: ExpFamily, theta0=None, eps0=None, rel_step: float = 1e-3) -> float:
    """Grid estimate of sup |V'''| over ``theta0`` fattened by ``eps0/2``."""
    lo, hi = fam.theta0 if theta0 is None else theta0
    eps0 = fam.eps0 if eps0 is None else eps0
    grid = _grid(lo - eps0 / 2, hi + eps0 / 2, rel_step * (hi - lo))
    return float(np.max(np.abs(fam.third_cumulant(grid))))


class MomentBoundReport(NamedTuple):
    estimate: float
    se: float
    bound: float
    theta_at_sup: float
    passed: bool


def moment_bound_check(
    fam: ExpFamily,
    theta0=None,
    eps0=None,
    t: float = 0.05,
    reps: int = 100_000,
    rng: np.random.Generator | None = None,
    n_grid: int = 5,
) -> MomentBoundReport:
    """Monte-Carlo check of sup_theta E exp{t * centered U} <= exp{t^2 I_max / 2}.

    The supremum is taken over ``n_grid`` equispaced points of ``theta0``; the
    check passes when the largest estimate is within three standard errors of
    the bound (or below it).
    """
    theta0 = fam.theta0 if theta0 is None else theta0
    eps0 = fam.eps0 if eps0 is None else eps0
    if abs(t) > eps0:
        raise DomainError(f"|t| = {abs(t)} exceeds eps0 = {eps0}")
    rng = np.random.default_rng() if rng is None else rng
    _, i_max = check_regularity(fam, theta0, eps0)
    bound = math.exp(0.5 * t * t * i_max)
    best = (-math.inf, 0.0, float("nan"))
    for th in np.linspace(theta0[0], theta0[1], n_grid):
        ubar = fam.u_stat(fam.sample(th, rng, size=reps)) - fam.mean_param(th)
        vals = np.exp(t * ubar)
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(reps))
        if est > best[0]:
            best = (est, se, float(th))
    est, se, th = best
    return MomentBoundReport(est, se, bound, th, est <= bound + 3.0 * se)


def catalogue_rows(families=None) -> list[dict]:
    """One row per family: formula strings plus values at the midpoint of theta0."""
    rows = []
    for fam in families or [get_family(n) for n in FAMILY_NAMES]:
        th = fam.theta_mid
        lam = fam.mean_param(th)
        rows.append({
            "family": fam.name,
            "theta_domain": f"({fam.theta_domain[0]}, {fam.theta_domain[1]})",
            "theta0": f"[{fam.theta0[0]}, {fam.theta0[1]}]",
            **{k: fam.formulas.get(k, "") for k in ("V", "b", "I", "F", "Gamma")},
            "probe_theta": repr(th),
            "V_probe": repr(fam.cumulant(th)),
            "b_probe": repr(lam),
            "I_probe": repr(fam.fisher_info(th)),
            "F_probe": repr(fam.vst(lam)),
            "Gamma_probe": repr(fam.gamma_canonical(th)),
        })
    return rows


def catalogue_csv(families=None) -> str:
    rows = catalogue_rows(families)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()

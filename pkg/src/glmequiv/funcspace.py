"""Grid functions on [0, 1], Hölder balls and the neighborhood rates.

Functions live on the uniform design ``t_i = i/n, i = 1..n``. The Hölder
seminorm is only ever *estimated* on the grid; the random generator enforces
its bound on the grid it returns, not analytically.
"""
from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

__all__ = [
    "GridFunction",
    "RateSet",
    "rates",
    "sample_holder",
    "holder_quotient",
    "holder_lags",
    "neighborhood_contains",
    "bump",
    "bump_width",
    "block_slices",
    "local_rescale",
]

N_TERMS = 64
RANGE_MARGIN = 0.05


def design(n: int) -> np.ndarray:
    """The grid t_i = i/n, i = 1..n."""
    return np.arange(1, n + 1, dtype=float) / n


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a real function at ``t_i = i/n``.

    ``beta`` and ``holder_const`` are metadata describing the Hölder ball the
    function was generated in (``None`` when unknown); ``flags`` records
    generator events such as a fallback to a constant.
    """

    values: np.ndarray
    beta: float | None = None
    holder_const: float | None = None
    theta0: tuple[float, float] | None = None
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 1 or vals.size == 0:
            raise ShapeError("GridFunction values must be a nonempty 1-d array")
        if not np.all(np.isfinite(vals)):
            raise DomainError("GridFunction values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def t(self) -> np.ndarray:
        return design(self.n)

    @classmethod
    def from_callable(cls, fn, n: int, **meta) -> "GridFunction":
        return cls(np.asarray(fn(design(n)), dtype=float) * np.ones(n), **meta)

    @classmethod
    def constant(cls, c: float, n: int, **meta) -> "GridFunction":
        return cls(np.full(n, float(c)), **meta)

    def with_values(self, values) -> "GridFunction":
        """Same metadata, new values (e.g. after a perturbation)."""
        return GridFunction(values, self.beta, self.holder_const, self.theta0, self.flags)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.n != self.n:
                raise ShapeError(f"grid sizes differ: {self.n} vs {other.n}")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def in_range(self, interval) -> bool:
        lo, hi = interval
        return bool(np.all((self.values >= lo) & (self.values <= hi)))

    def digest(self) -> str:
        """Short content hash, used for provenance records."""
        import hashlib

        return hashlib.sha256(self.values.tobytes()).hexdigest()[:16]

    # -- serialization --------------------------------------------------------
    def header(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "L": self.holder_const,
            "theta0": list(self.theta0) if self.theta0 is not None else None,
            "flags": list(self.flags),
        }

    def to_csv(self, path=None) -> str:
        """CSV with columns ``i, t_i, value`` after a ``#``-prefixed JSON header line."""
        lines = ["# " + json.dumps(self.header(), sort_keys=True), "i,t_i,value"]
        lines += [f"{i},{float(t)!r},{float(v)!r}" for i, t, v in zip(range(1, self.n + 1), self.t, self.values)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "GridFunction":
        text = source if "\n" in str(source) else Path(source).read_text()
        first, _, rest = text.partition("\n")
        if not first.startswith("# "):
            raise ConfigError("missing JSON header line")
        head = json.loads(first[2:])
        rows = rest.strip().splitlines()[1:]
        values = np.array([float(r.split(",")[2]) for r in rows])
        if values.size != head["n"]:
            raise ShapeError(f"header says n={head['n']} but found {values.size} rows")
        theta0 = tuple(head["theta0"]) if head.get("theta0") is not None else None
        return cls(values, head.get("beta"), head.get("L"), theta0, tuple(head.get("flags", ())))


@dataclass(frozen=True)
class RateSet:
    """Neighborhood radius, bandwidth and block structure at sample size ``n``.

    ``gamma_n = kappa0 (n / log n)^{-beta/(2 beta + 1)}`` is the radius of the
    local neighborhood, ``delta_n = gamma_n^{1/beta}`` the matching bandwidth and
    ``gamma_star = kappa0_star (n / log n)^{-1/2}`` the almost-root-n radius of
    the doubly local pieces. The unit interval is split into ``m = floor(1/delta_n)``
    blocks holding ``n_k`` design points each. ``gamma_star_local`` is the same
    radius computed from the block size, ``kappa0_star (n_k / log n_k)^{-1/2}``
    with the largest ``n_k``; it dominates ``gamma_n`` and is the scale used to
    rescale the local pieces.
    """

    n: int
    beta: float
    kappa0: float
    kappa0_star: float
    gamma_n: float
    delta_n: float
    gamma_star: float
    m: int
    n_k: tuple[int, ...]
    gamma_star_local: float = float("nan")

    def block_checks(self) -> dict:
        """The block-size relations 1/(2 delta) <= m <= 1/delta and n delta <= n_k <= 2 n delta."""
        nd = self.n * self.delta_n
        return {
            "m_lower": 1.0 / (2.0 * self.delta_n) <= self.m,
            "m_upper": self.m <= 1.0 / self.delta_n,
            "nk_lower": min(self.n_k) >= nd,
            "nk_upper": max(self.n_k) <= 2.0 * nd,
        }

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["n_k"] = list(self.n_k)
        return d


def rates(n: int, beta: float, kappa0: float = 1.0, kappa0_star: float | None = None) -> RateSet:
    """Compute the :class:`RateSet` for sample size ``n`` and smoothness ``beta``.

    ``kappa0_star`` defaults to ``4 * kappa0``.
    """
    if beta <= 0.5:
        raise DomainError(f"beta must exceed 1/2, got {beta}")
    if n < 8:
        raise DomainError(f"n must be at least 8, got {n}")
    if kappa0 <= 0:
        raise DomainError("kappa0 must be positive")
    kappa0_star = 4.0 * kappa0 if kappa0_star is None else kappa0_star
    if kappa0_star <= 0:
        raise DomainError("kappa0_star must be positive")
    ratio = n / math.log(n)
    gamma_n = kappa0 * ratio ** (-beta / (2.0 * beta + 1.0))
    delta_n = gamma_n ** (1.0 / beta)
    gamma_star = kappa0_star * ratio**-0.5
    m = max(1, int(math.floor(1.0 / delta_n)))
    n_k = tuple(int(s.stop - s.start) for s in block_slices(n, m))
    nk = max(n_k)
    gamma_star_local = kappa0_star * (nk / math.log(nk)) ** -0.5 if nk > 1 else kappa0_star
    return RateSet(n, beta, kappa0, kappa0_star, gamma_n, delta_n, gamma_star, m, n_k, gamma_star_local)


def block_slices(n: int, m: int) -> list[slice]:
    """Index sets of the design points falling in A_k = ((k-1)/m, k/m], k = 1..m."""
    i = np.arange(1, n + 1)
    # t_i in A_k  <=>  k = ceil(i m / n); integer arithmetic avoids rounding at edges
    k = -((-i * m) // n)
    edges = np.searchsorted(k, np.arange(1, m + 2), side="left")
    return [slice(int(edges[j]), int(edges[j + 1])) for j in range(m)]


def local_rescale(diff: GridFunction, m: int, gamma_star: float) -> list[np.ndarray]:
    """Rescaled local pieces ``f_k = diff(a_k(.)) / gamma_star`` on each block."""
    return [diff.values[s] / gamma_star for s in block_slices(diff.n, m)]


def holder_lags(n: int, full_below: int = 2048, dense: int = 1024, n_geom: int = 64) -> np.ndarray:
    """Lags scanned by :func:`holder_quotient`.

    All lags ``1..n-1`` when ``n <= full_below``; otherwise every lag up to
    ``dense`` plus ``n_geom`` geometrically spaced larger lags (including ``n-1``),
    which keeps the scan under about 10^6 * (n / 1000) pair evaluations.
    """
    if n <= full_below:
        return np.arange(1, n)
    geo = np.unique(np.round(np.geomspace(dense + 1, n - 1, n_geom)).astype(int))
    return np.concatenate([np.arange(1, dense + 1), geo])


def _holder_order(beta: float) -> int:
    # derivatives taken before the Hölder condition on the remainder exponent in (0, 1]
    return max(0, int(math.ceil(beta)) - 1)


def holder_quotient(f: GridFunction | np.ndarray, beta: float) -> float:
    """Empirical Hölder seminorm of ``f`` on its grid.

    With ``m = ceil(beta) - 1`` and ``alpha = beta - m``, returns
    ``max |D^m f(x) - D^m f(y)| / |x - y|^alpha`` over grid pairs, where ``D`` is
    the forward difference quotient ``n (f_{i+1} - f_i)``.
    """
    vals = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    n = vals.size
    if n < 4:
        raise ShapeError("holder_quotient needs at least 4 grid points")
    order = _holder_order(beta)
    alpha = beta - order
    d = vals
    for _ in range(order):
        d = np.diff(d) * n
    best = 0.0
    for k in holder_lags(n):
        if k >= d.size:
            continue
        q = np.max(np.abs(d[k:] - d[:-k])) / (k / n) ** alpha
        if q > best:
            best = float(q)
    return best


def sample_holder(
    beta: float,
    holder_const: float,
    theta0,
    n: int,
    seed=None,
    n_terms: int = N_TERMS,
) -> GridFunction:
    """Draw a random member of the Hölder ball that stays inside ``theta0``.

    The shape is a random cosine series ``sum_j xi_j j^{-(beta + 1/2)} cos(j pi t)``
    with ``xi_j ~ U[-1, 1]``, centred at the midpoint of ``theta0``. Its amplitude
    is the largest that keeps the empirical Hölder quotient on the returned grid
    below ``holder_const`` and leaves a 5% margin to the ends of ``theta0``.
    ``holder_const = 0`` gives the constant midpoint function.
    """
    # beta = 1/2 is admitted for the test dictionaries of the coupling module
    if not 0.5 <= beta <= 2.0:
        raise ConfigError(f"beta must lie in [1/2, 2], got {beta}")
    if holder_const < 0:
        raise ConfigError("holder_const must be nonnegative")
    lo, hi = theta0
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ConfigError(f"theta0 must be a finite nondegenerate interval, got {theta0}")
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    meta = dict(beta=beta, holder_const=holder_const, theta0=(lo, hi))
    if holder_const == 0:
        return GridFunction(np.full(n, mid), flags=("constant",), **meta)
    rng = np.random.default_rng(seed)
    j = np.arange(1, n_terms + 1)
    coef = rng.uniform(-1.0, 1.0, n_terms) * j ** -(beta + 0.5)
    base = np.cos(np.pi * np.outer(design(n), j)) @ coef
    q = holder_quotient(base, beta)
    amp = float(np.max(np.abs(base)))
    if q <= 0 or amp <= 0:
        warnings.warn("degenerate random shape; falling back to the constant midpoint")
        return GridFunction(np.full(n, mid), flags=("constant",), **meta)
    c = min(holder_const / q, (1.0 - RANGE_MARGIN) * half / amp)
    return GridFunction(mid + c * base, **meta)


def neighborhood_contains(f0: GridFunction, f: GridFunction, gamma_n: float) -> bool:
    """True iff ``max_i |f(t_i) - f0(t_i)| <= gamma_n`` (boundary inclusive)."""
    if f0.n != f.n:
        raise ShapeError(f"grid sizes differ: {f0.n} vs {f.n}")
    dist = float(np.max(np.abs(f.values - f0.values)))
    # the tolerance absorbs the rounding of f0 + gamma_n - f0
    return dist <= gamma_n + 4.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(f0.values))))


def _bump_shape(u):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    out = np.zeros_like(u)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


@functools.lru_cache(maxsize=32)
def _bump_seminorm(beta: float) -> float:
    # Hölder-beta seminorm of the unit bump on [-1, 1], estimated on a fine grid
    n = 8192
    u = -1.0 + 2.0 * design(n)
    vals = _bump_shape(u)
    # holder_quotient measures in units of the grid on [0, 1]; rescale to [-1, 1]
    return holder_quotient(vals, beta) / 2.0**beta


def bump_width(amplitude: float, beta: float, holder_const: float) -> float:
    """Half-width w such that ``amplitude * phi((t - c)/w)`` has Hölder constant holder_const."""
    if amplitude <= 0 or holder_const <= 0:
        raise DomainError("amplitude and holder_const must be positive")
    return (amplitude * _bump_seminorm(beta) / holder_const) ** (1.0 / beta)


def bump(n: int, center: float, amplitude: float, beta: float, holder_const: float) -> GridFunction:
    """A smooth bump of height ``amplitude`` with Hölder-beta constant ``holder_const``.

    The profile is ``exp(1 - 1/(1 - u^2))`` on ``|u| < 1``; its half-width shrinks
    like ``amplitude^{1/beta}``, so bumps at height ``gamma_n`` live on a window of
    order ``delta_n``.
    """
    w = bump_width(amplitude, beta, holder_const)
    vals = amplitude * _bump_shape((design(n) - center) / w)
    return GridFunction(vals, beta=beta, holder_const=holder_const)

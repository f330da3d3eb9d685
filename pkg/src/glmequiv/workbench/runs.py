"""Seeded orchestration of the workbench experiments.

Every runner takes a :class:`RunConfig` and returns a result object holding
plain rows (lists of dicts with deterministic float values), a summary dict
and a ``passed`` flag. Sub-seeds are derived from the master seed by fixed
keys (sample size, task index), so the numbers do not depend on batching.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .._rng import child_seeds, derive, make_rng
from ..coupling import (
    DyadicCoupler,
    Scheme,
    _max_abs_sn,
    dyadic_couple,
    growth_exponent,
    holder_dictionary,
    kmt_tail_test,
    quantile_couple,
    s_n,
)
from ..errors import ConfigError
from ..estimators import epanechnikov, es1_experiment, finalize_estimate, nadaraya_watson, smooth
from ..expfam import ExpFamily, GaussMean, catalogue_rows
from ..experiments import simulate_gauss_hetero, simulate_gauss_vst, simulate_glm
from ..funcspace import GridFunction, block_slices, bump, rates, sample_holder
from ..metrics import hellinger_cv, hellinger_mc
from .config import RunConfig

__all__ = [
    "RunResult",
    "SweepResult",
    "run_families",
    "run_simulate",
    "run_distance_sweep",
    "run_vst_clt",
    "run_coupling",
    "run_estimate",
    "run_transfer",
    "run",
    "sweep_instance",
]


@dataclass
class RunResult:
    command: str
    rows: list
    summary: dict
    passed: bool
    extra_files: dict = field(default_factory=dict)


@dataclass
class SweepResult(RunResult):
    theory_exponent: float = float("nan")
    slope: float = float("nan")
    slope_ci: tuple = (float("nan"), float("nan"))


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


# -- families / simulate ----------------------------------------------------
def run_families(cfg: RunConfig) -> RunResult:
    rows = catalogue_rows()
    return RunResult("families", rows, {"families": [r["family"] for r in rows]}, True)


def run_simulate(cfg: RunConfig) -> RunResult:
    fam = cfg.family_model()
    n = cfg.n_list[0]
    f0 = sample_holder(cfg.beta, cfg.L, fam.theta0, n, derive(cfg.seed, n, 0))
    data_seed = derive(cfg.seed, n, 1)
    if cfg.kind == "glm":
        sample = simulate_glm(fam, f0, data_seed)
    elif cfg.kind == "gauss-hetero":
        sample = simulate_gauss_hetero(fam, f0, f0, data_seed)
    else:
        sample = simulate_gauss_vst(fam, f0, data_seed)
    rows = [
        {"i": i + 1, "t_i": float(t), "f": float(fv), "x": float(x)}
        for i, (t, fv, x) in enumerate(zip(f0.t, f0.values, sample.data))
    ]
    side = sample.sidecar()
    side["seed"] = cfg.seed
    return RunResult("simulate", rows, side, True)


# -- distance sweep -----------------------------------------------------------
@dataclass
class SweepInstance:
    """One (f0, f) pair at sample size n with the coupled likelihood-ratio sampler."""

    n: int
    rates: object
    f0: GridFunction
    f: GridFunction
    blocks: list
    couplers: list

    tilt: float = 0.5

    def sample_logs(self, seeds):
        """Per-block weighted (log1, log2) arrays of shape (reps, n_blocks).

        The coupled observation is a function of the normals, so the normals
        may be drawn from the tilted law N(tilt * h * I, I) instead of N(0, I);
        both log-ratios then carry the log importance weight dQ/dQ'. With the
        default midpoint tilt the two ratios are balanced and the Hellinger
        terms lose the lognormal tail they have under the base measure.
        """
        fam = self.couplers[0].fam if self.couplers else None
        reps = len(seeds)
        k = len(self.blocks)
        log1 = np.zeros((reps, k))
        log2 = np.zeros((reps, k))
        if not k:
            return log1, log2
        sizes = [s.stop - s.start for s in self.blocks]
        z = np.vstack([np.random.default_rng(s).standard_normal(sum(sizes)) for s in seeds])
        pos = 0
        a = self.tilt
        for j, (sl, cp) in enumerate(zip(self.blocks, self.couplers)):
            zb = z[:, pos:pos + sizes[j]]
            pos += sizes[j]
            h = self.f.values[sl] - self.f0.values[sl]
            info = fam.fisher_info(self.f0.values[sl])
            normals = np.sqrt(info) * zb + a * h * info
            ubar = cp.ubar(normals)
            r0 = float(np.sum(fam.taylor_tail(self.f0.values[sl], h, 1)))
            quad = float(np.sum(0.5 * h * h * info))
            hn = normals @ h
            log_w = -a * hn + a * a * quad
            log1[:, j] = ubar @ h - r0 + log_w
            log2[:, j] = hn - quad + log_w
        return log1, log2


def sweep_instance(fam: ExpFamily, n: int, beta: float, L: float, kappa0: float, kappa0_star: float, seed) -> SweepInstance:
    """Draw f0 in the class and put f = f0 + gamma_n * bump in its neighborhood.

    f0 has Hölder constant L/2 and range theta0 shrunk by gamma_n; the bump has
    Hölder constant L/2 and height gamma_n, so f stays in the class and
    ||f - f0|| = gamma_n. The f0 draw uses the same sub-seed for every n, so
    a sweep follows one function observed on finer and finer grids. Only the doubly-local blocks touched by the bump carry
    a nonzero likelihood ratio, and each is coupled by its own dyadic tree.
    """
    r = rates(n, beta, kappa0, kappa0_star)
    lo, hi = fam.theta0
    g = r.gamma_n
    if hi - lo <= 2 * g:
        raise ConfigError(f"theta0 {fam.theta0} too narrow for gamma_n = {g:.4g} at n = {n}")
    f0 = sample_holder(beta, L / 2, (lo + g, hi - g), n, derive(seed, 0))
    h = bump(n, 0.5, g, beta, L / 2)
    f = GridFunction(f0.values + h.values, beta, L, fam.theta0)
    blocks = [s for s in block_slices(n, r.m) if np.any(h.values[s] != 0)]
    couplers = [DyadicCoupler(fam, f0.values[s]) for s in blocks]
    return SweepInstance(n, r, f0, f, blocks, couplers)


def _sweep_point(inst: SweepInstance, reps: int, seed):
    """Hellinger estimates for one instance.

    The blocks are coupled independently, so the coupled space is a product
    over blocks and the affinity factorizes: ``1 - H^2 = prod_k (1 - H_k^2)``.
    ``h2`` combines control-variate estimates of the block distances through
    that identity. The plain full-vector average from :func:`hellinger_mc` is
    returned as well; it is unbiased but heavy-tailed once the likelihood
    ratios are large.
    """
    logs = []

    def sampler(seeds):
        l1, l2 = inst.sample_logs(seeds)
        logs.append((l1, l2))
        return l1.sum(axis=1), l2.sum(axis=1)

    direct = hellinger_mc(sampler, reps, seed)
    k = len(inst.blocks)
    if not k:
        return 0.0, 0.0, direct, np.zeros(0), np.zeros(0)
    l1 = np.vstack([a for a, _ in logs])
    l2 = np.vstack([b for _, b in logs])
    est = [hellinger_cv(l1[:, j], l2[:, j]) for j in range(k)]
    hb = np.array([e[0] for e in est])
    sb = np.array([e[1] for e in est])
    aff = np.clip(1.0 - hb, 0.0, 1.0)
    h2 = float(-np.expm1(np.sum(np.log(np.maximum(aff, 1e-300)))))
    # delta method: d(1 - prod a_j)/d h_k = prod_{j != k} a_j
    others = np.array([np.prod(np.delete(aff, j)) for j in range(k)])
    se = float(math.sqrt(np.sum((others * sb) ** 2)))
    return h2, se, direct, hb, sb


def _rate(n, beta):
    return n ** (-(2 * beta - 1) / (2 * beta + 1)) * math.log(n) ** ((14 * beta + 5) / (2 * beta + 1))


def run_distance_sweep(cfg: RunConfig) -> SweepResult:
    """Coupled-space Hellinger distance between the regression experiment and its
    heteroscedastic Gaussian approximation, across sample sizes."""
    if cfg.beta <= 0.5:
        raise ConfigError("beta: the equivalence requires beta > 1/2")
    if not all(_is_pow2(n) for n in cfg.n_list):
        raise ConfigError(f"n: sweep sizes must be powers of two, got {cfg.n_list}")
    if len(cfg.n_list) < 2:
        raise ConfigError("n: a sweep needs at least two sample sizes")
    fam = cfg.family_model()
    rows = []
    for n in cfg.n_list:
        inst = sweep_instance(fam, n, cfg.beta, cfg.L, cfg.kappa0, cfg.kappa0_star_value, cfg.seed)
        h2, se, direct, hb, sb = _sweep_point(inst, cfg.reps, derive(cfg.seed, n, 1))
        r = inst.rates
        rows.append({
            "n": n,
            "beta": cfg.beta,
            "family": fam.name,
            "h2": h2,
            "se": se,
            "h2_direct": direct.h2,
            "se_direct": direct.se,
            "h2_blocks_sum": float(hb.sum()),
            "se_blocks_sum": float(math.sqrt(np.sum(sb**2))),
            "product_bound": float(min(1.0, hb.sum())),
            "blocks_touched": len(inst.blocks),
            "m": r.m,
            "gamma_n": r.gamma_n,
            "delta_n": r.delta_n,
            "block_relations_ok": all(r.block_checks().values()),
        })
    ns = np.array([row["n"] for row in rows], dtype=float)
    h2 = np.array([row["h2"] for row in rows])
    se = np.array([row["se"] for row in rows])
    theory = -(2 * cfg.beta - 1) / (2 * cfg.beta + 1)
    positive = h2 > 0
    if positive.sum() >= 2:
        fit = stats.linregress(np.log(ns[positive]), np.log(h2[positive]))
        slope = float(fit.slope)
        dof = positive.sum() - 2
        tq = stats.t.ppf(0.975, dof) if dof > 0 else float("inf")
        ci = (slope - tq * fit.stderr, slope + tq * fit.stderr)
        const = float(np.exp(np.mean(np.log(h2[positive]) - np.log([_rate(n, cfg.beta) for n in ns[positive]]))))
    else:
        slope, ci, const = float("nan"), (float("nan"), float("nan")), 0.0
    for row in rows:
        row["theory_bound"] = const * _rate(row["n"], cfg.beta)
        row["slope_fit"] = slope
    if isinstance(fam, GaussMean):
        null_ok = bool(np.all(np.abs(h2) <= 3 * se))
        mean_se = float(math.sqrt(np.sum(se**2)) / len(se))
        passed = null_ok and abs(float(h2.mean())) <= 3 * mean_se
        checks = {"null_each_n": null_ok, "null_mean": abs(float(h2.mean())) <= 3 * mean_se}
    else:
        gaps = [(h2[i] - h2[i + 1]) > 2 * math.hypot(se[i], se[i + 1]) for i in range(len(h2) - 1)]
        checks = {"strictly_decreasing_2se": bool(all(gaps)), "slope_le_-0.05": bool(slope <= -0.05)}
        passed = all(checks.values())
    checks["block_relations"] = all(row["block_relations_ok"] for row in rows)
    summary = {
        "family": fam.name, "beta": cfg.beta, "theory_exponent": theory, "slope": slope,
        "slope_ci": list(ci), "leading_constant": const, "checks": checks, "passed": passed,
    }
    return SweepResult("distance-sweep", rows, summary, passed, theory_exponent=theory, slope=slope, slope_ci=ci)


# -- VST central limit ------------------------------------------------------------
def vst_clt_point(fam: ExpFamily, theta: float, n: int, reps: int, seed) -> dict:
    """Sample variance and KS distance of sqrt(n) (F(mean) - F(b(theta)))."""
    rng = make_rng(seed)
    sums = fam.sample_sum(theta, n, rng, size=reps)
    lam = fam.mean_param(theta)
    z = math.sqrt(n) * (fam.vst(sums / n, strict=False) - fam.vst(lam))
    var = float(np.var(z, ddof=1))
    # standard error of the sample variance from the fourth central moment
    m4 = float(np.mean((z - z.mean()) ** 4))
    var_se = math.sqrt(max(m4 - var**2, 0.0) / reps)
    ks = float(stats.kstest(z, "norm").statistic)
    return {"theta": float(theta), "n": n, "reps": reps, "variance": var, "variance_se": var_se, "ks": ks}


def run_vst_clt(cfg: RunConfig) -> RunResult:
    fam = cfg.family_model()
    lo, hi = fam.theta0
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("the VST check needs a finite theta0")
    n = cfg.n_list[0]
    rows = []
    for j, th in enumerate((lo, 0.5 * (lo + hi), hi)):
        row = vst_clt_point(fam, th, n, cfg.reps, derive(cfg.seed, n, j))
        row["family"] = fam.name
        if isinstance(fam, GaussMean):
            row["passed"] = abs(row["variance"] - 1.0) <= 3 * row["variance_se"]
        else:
            row["passed"] = 0.9 <= row["variance"] <= 1.1 and row["ks"] <= 0.03
        rows.append(row)
    mid = rows[1]
    summary = {"family": fam.name, "n": n, "reps": cfg.reps, "midpoint": mid, "passed": mid["passed"]}
    return RunResult("vst-clt", rows, summary, bool(mid["passed"]))


# -- coupling -------------------------------------------------------------------------
def run_coupling(cfg: RunConfig, growth_n=None, growth_reps: int = 200) -> RunResult:
    """Gaussian exactness, the tail fit at the largest n and the growth comparison."""
    fam = cfg.family_model()
    n = cfg.n_list[-1]
    theta_mid = 0.5 * (fam.theta0[0] + fam.theta0[1])
    gm = GaussMean()
    th = np.full(256, 0.3)
    f = sample_holder(0.5, 1.0, (-1.0, 1.0), 256, derive(cfg.seed, 0))
    exact = max(abs(s_n(quantile_couple(gm, th, cfg.seed), f)), abs(s_n(dyadic_couple(gm, th, cfg.seed), f)))
    tail = kmt_tail_test(fam, theta_mid, n, cfg.dict_size, cfg.reps, derive(cfg.seed, n, 1))
    scale_free = kmt_tail_test(
        fam, theta_mid, n, cfg.dict_size, cfg.reps, derive(cfg.seed, n, 1), scale=_adapted_scale(tail, fam, n, cfg)
    )
    growth_n = tuple(2**k for k in range(8, 14)) if growth_n is None else tuple(growth_n)
    slope_c, med_c = growth_exponent(fam, theta_mid, growth_n, growth_reps, derive(cfg.seed, 2), Scheme.DYADIC_BLOCKS, cfg.dict_size)
    slope_u, med_u = growth_exponent(fam, theta_mid, growth_n, growth_reps, derive(cfg.seed, 3), Scheme.UNCOUPLED, cfg.dict_size)
    rows = [
        {"table": "tail", "scale": tail.scale, **r} for r in tail.to_rows()
    ] + [
        {"table": "tail_adapted", "scale": scale_free.scale, **r} for r in scale_free.to_rows()
    ] + [
        {"table": "growth", "n": int(m), "median_coupled": a, "median_uncoupled": b}
        for m, a, b in zip(growth_n, med_c, med_u)
    ]
    checks = {
        "gaussian_exact": exact == 0.0,
        "tail_c2_positive_r2": tail.passed,
        "growth_coupled_lt_0.25": slope_c < 0.25,
        "growth_uncoupled_0.5pm0.1": abs(slope_u - 0.5) <= 0.1,
    }
    summary = {
        "family": fam.name, "theta": theta_mid, "gaussian_max_abs_sn": exact,
        "tail": tail.summary(), "tail_adapted": scale_free.summary(),
        "growth_exponent_coupled": slope_c, "growth_exponent_uncoupled": slope_u,
        "checks": checks, "passed": all(checks.values()),
    }
    return RunResult("coupling", rows, summary, all(checks.values()))


def _adapted_scale(tail, fam, n, cfg) -> float:
    """A scale that spreads the x-grid over the observed range of max |S_n|.

    Diagnostic only: the unit is the empirical 99th percentile divided by the
    largest grid point, so the fitted decay describes the shape of the tail.
    """
    theta = np.full(n, 0.5 * (fam.theta0[0] + fam.theta0[1]))
    m = _max_abs_sn(fam, theta, holder_dictionary(n, cfg.dict_size), Scheme.DYADIC_BLOCKS, cfg.reps, derive(cfg.seed, n, 1))
    q = float(np.percentile(m, 99))
    return q / 5.0 if q > 0 else 1.0


# -- estimator study ------------------------------------------------------------------
def run_estimate(cfg: RunConfig) -> RunResult:
    fam = cfg.family_model()
    rep = es1_experiment(fam, cfg.beta, cfg.L, cfg.n_list, cfg.reps, cfg.seed, kappa0=cfg.kappa0)
    return RunResult("estimate", rep.rows, rep.summary(), rep.passed)


# -- risk transfer -------------------------------------------------------------------
def transfer_pair(fam: ExpFamily, beta: float, L: float, n: int, kappa0: float, seed):
    """Squared-error losses of the direct and the stabilized-scale estimators on one f."""
    kernel = epanechnikov()
    r = rates(n, beta, kappa0)
    f_seed, x_seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key).spawn(2)
    f = sample_holder(beta, L, fam.theta0, n, f_seed)
    # common random numbers: both experiments are driven by the same stream
    direct = finalize_estimate(nadaraya_watson(simulate_glm(fam, f, x_seed), kernel, r.delta_n), fam)
    vst_sample = simulate_gauss_vst(fam, f, x_seed)
    gam, _ = smooth(vst_sample.data, kernel, r.delta_n)
    glo, ghi = (fam.gamma_canonical(t) for t in fam.theta0)
    f_vst = fam.gamma_inverse(np.clip(gam, glo, ghi))
    loss_a = float(np.mean((direct.f_star.values - f.values) ** 2))
    loss_b = float(np.mean((f_vst - f.values) ** 2))
    return loss_a, loss_b


def run_transfer(cfg: RunConfig) -> RunResult:
    fam = cfg.family_model()
    if not 0.5 < cfg.beta < 1.0:
        raise ConfigError(f"beta: the transfer study needs beta in (1/2, 1), got {cfg.beta}")
    if cfg.reps < 2:
        raise ConfigError("reps: at least 2 replications are needed for a confidence interval")
    n = cfg.n_list[-1]
    losses = np.array([
        transfer_pair(fam, cfg.beta, cfg.L, n, cfg.kappa0, s) for s in child_seeds(derive(cfg.seed, n), cfg.reps)
    ])
    a, b = losses[:, 0], losses[:, 1]
    ratio = float(a.mean() / b.mean())
    # delta method for a ratio of paired means
    se = float(np.std(a - ratio * b, ddof=1) / (math.sqrt(len(a)) * b.mean()))
    ci = (ratio - 1.96 * se, ratio + 1.96 * se)
    rows = [{"rep": i, "mise_direct": float(x), "mise_vst": float(y)} for i, (x, y) in enumerate(losses)]
    if isinstance(fam, GaussMean):
        passed = 0.8 <= ratio <= 1.25
    else:
        passed = (ci[1] - ci[0]) < 0.5
    summary = {
        "family": fam.name, "n": n, "reps": cfg.reps, "mise_direct": float(a.mean()),
        "mise_vst": float(b.mean()), "ratio": ratio, "ratio_se": se, "ci": list(ci),
        "ci_width": ci[1] - ci[0], "passed": passed,
    }
    return RunResult("transfer", rows, summary, passed)


RUNNERS = {
    "families": run_families,
    "simulate": run_simulate,
    "distance-sweep": run_distance_sweep,
    "vst-clt": run_vst_clt,
    "coupling": run_coupling,
    "estimate": run_estimate,
    "transfer": run_transfer,
}


def run(cfg: RunConfig) -> RunResult:
    return RUNNERS[cfg.command](cfg)

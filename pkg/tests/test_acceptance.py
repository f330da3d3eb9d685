"""Acceptance gate: twelve criteria, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``. Criteria are checked at their
stated tolerances; a criterion that is not met fails and is reported as such.
"""
from __future__ import annotations

import contextlib
import io
import math
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from glmequiv.coupling import quantile_couple, s_n
from glmequiv.estimators import (
    bias_constant,
    epanechnikov,
    es1_experiment,
    nadaraya_watson,
    smooth,
)
from glmequiv.expfam import FAMILY_NAMES, check_regularity, get_family, moment_bound_check
from glmequiv.funcspace import GridFunction, rates, sample_holder
from glmequiv.metrics import (
    gaussian_calibration_sampler,
    hellinger_bound_product,
    hellinger_gaussian_products,
    hellinger_mc,
    hellinger_white_noise,
)
from glmequiv.workbench.cli import main as cli_main
from glmequiv.workbench.config import RunConfig
from glmequiv.workbench.runs import (
    run_coupling,
    run_distance_sweep,
    run_transfer,
    vst_clt_point,
)

RESULTS: dict[int, tuple[str, bool, str, float]] = {}
SWEEP_N = tuple(2**k for k in range(8, 14))


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


# closed forms written out independently of the library: (b, I, F, Gamma)
CLOSED_FORMS = {
    "GaussMean": (lambda t: t, lambda t: np.ones_like(t), lambda l: l, lambda t: t),
    "GaussVar": (
        lambda t: -1 / (2 * t), lambda t: 1 / (2 * t * t),
        lambda l: np.log(l) / math.sqrt(2), lambda t: np.log(-1 / (2 * t)) / math.sqrt(2),
    ),
    "Poisson": (np.exp, np.exp, lambda l: 2 * np.sqrt(l), lambda t: 2 * np.exp(t / 2)),
    "Bernoulli": (
        _sigmoid, lambda t: _sigmoid(t) * (1 - _sigmoid(t)),
        lambda l: 2 * np.arcsin(np.sqrt(l)), lambda t: 2 * np.arcsin(np.sqrt(_sigmoid(t))),
    ),
    "Exponential": (
        lambda t: -1 / t, lambda t: 1 / (t * t), np.log, lambda t: np.log(-1 / t),
    ),
}


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


# -- criteria ------------------------------------------------------------------------
def criterion_1():
    worst = 0.0
    for name in FAMILY_NAMES:
        fam = get_family(name)
        b, info, F, G = CLOSED_FORMS[name]
        th = np.linspace(*fam.theta0, 100)
        lam = b(th)
        errs = [
            _rel(fam.mean_param(th), b(th)), _rel(fam.fisher_info(th), info(th)),
            _rel(fam.vst(lam), F(lam)), _rel(fam.gamma_canonical(th), G(th)),
        ]
        worst = max(worst, max(float(e[np.isfinite(e)].max()) for e in errs))
    h = 1e-5
    t = np.linspace(-1.9, 1.9, 100)
    gm = get_family("GaussMean")
    slope = (gm.gamma_canonical(t + h) - gm.gamma_canonical(t - h)) / (2 * h)
    ok = worst <= 1e-10 and np.allclose(slope, 1.0, rtol=0, atol=1e-9)
    return ok, f"max relative error {worst:.2e}"


def criterion_2():
    h = 1e-5
    worst = 0.0
    for name in FAMILY_NAMES:
        fam = get_family(name)
        lo, hi = fam.theta0
        th = np.linspace(lo + 2 * h, hi - 2 * h, 100)
        info = fam.fisher_info(th)
        d_gamma = (fam.gamma_canonical(th + h) - fam.gamma_canonical(th - h)) / (2 * h)
        lam = fam.mean_param(th)
        hl = h * np.maximum(np.abs(lam), 1e-3)
        d_a = (fam.inverse_mean(lam + hl) - fam.inverse_mean(lam - hl)) / (2 * hl)
        d_f = (fam.vst(lam + hl) - fam.vst(lam - hl)) / (2 * hl)
        errs = (_rel(d_gamma, np.sqrt(info)), _rel(d_a * info, 1.0), _rel(d_f * np.sqrt(info), 1.0))
        worst = max(worst, max(float(e.max()) for e in errs))
    return worst <= 1e-6, f"max relative error {worst:.2e}"


def criterion_3():
    draws = 1_000_000
    bad = []
    for j, name in enumerate(FAMILY_NAMES):
        fam = get_family(name)
        rng = np.random.default_rng([3, j])
        for th in np.linspace(*fam.theta0, 3):
            u = fam.u_stat(fam.sample(th, rng, size=draws))
            c = u - u.mean()
            c2, c3 = c * c, c * c * c
            se_mean = u.std(ddof=1) / math.sqrt(draws)
            se_var = c2.std(ddof=1) / math.sqrt(draws)
            se_k3 = c3.std(ddof=1) / math.sqrt(draws)
            checks = (
                abs(u.mean() - fam.mean_param(th)) <= 4 * se_mean,
                abs(c2.mean() - fam.fisher_info(th)) <= 4 * se_var,
                abs(c3.mean() - fam.third_cumulant(th)) <= 4 * se_k3,
            )
            if not all(checks):
                bad.append((name, float(th), checks))
        for t in (fam.eps0 / 2, -fam.eps0 / 2):
            rep = moment_bound_check(fam, t=t, reps=100_000, rng=np.random.default_rng([4, j]))
            if not rep.passed:
                bad.append((name, "mgf", t))
    return not bad, "all cumulants within 4 SE and MGF bound within 3 SE" if not bad else f"violations {bad}"


def criterion_4():
    detail = []
    ok = True
    for d in (0.1, 0.5, 1.0, 2.0):
        est = hellinger_mc(gaussian_calibration_sampler(d), 20_000, seed=7)
        exact = 1 - math.exp(-d * d / 8)
        ok &= abs(est.h2 - exact) <= 3 * est.se
        detail.append(f"d={d}: {(est.h2 - exact) / est.se:+.2f} SE")
    rng = np.random.default_rng(2024)
    violations = 0
    for _ in range(10_000):
        k = rng.integers(1, 20)
        m1, m2, v = rng.normal(0, 1, k), rng.normal(0, 1, k), rng.uniform(0.1, 3, k)
        coords = -np.expm1(-0.125 * (m1 - m2) ** 2 / v)
        violations += hellinger_gaussian_products(m1, m2, v).h2 > hellinger_bound_product(coords) + 1e-15
    ok &= violations == 0
    return bool(ok), "; ".join(detail) + f"; subadditivity violations {violations}"


def criterion_5():
    res = run_distance_sweep(RunConfig("distance-sweep", "GaussMean", n_list=SWEEP_N, reps=20_000, seed=0))
    ok = all(abs(r["h2"]) <= 3 * r["se"] for r in res.rows)
    return ok, "max |h2| " + f"{max(abs(r['h2']) for r in res.rows):.1e}"


def criterion_6():
    n, beta = 4096, 1.0
    g = rates(n, beta).gamma_n
    violations, worst = 0, 0.0
    for j, name in enumerate(FAMILY_NAMES):
        fam = get_family(name)
        i_min, _ = check_regularity(fam)
        lo, hi = fam.theta0
        bound = n / 8 * g**4 / (16 * i_min)
        rng = np.random.default_rng([6, j])
        for k in range(100):
            f0 = sample_holder(beta, 1.0, (lo + g, hi - g), n, seed=(61, j, k))
            d = sample_holder(beta, 1.0, (-g, g), n, seed=(62, j, k))
            f = f0 + d.values * rng.uniform(0.5, 1.0)
            m1 = GridFunction((f - f0).values * np.sqrt(fam.fisher_info(f0.values)))
            m2 = GridFunction(fam.gamma_canonical(f.values) - fam.gamma_canonical(f0.values))
            h2 = hellinger_white_noise(m1, m2, n).h2
            violations += h2 > bound
            worst = max(worst, h2 / bound)
    return violations == 0, f"violations {violations}, largest h2/bound {worst:.3f}"


def criterion_7():
    parts, ok = [], True
    for name in ("Poisson", "Bernoulli"):
        res = run_distance_sweep(RunConfig("distance-sweep", name, beta=0.75, n_list=SWEEP_N, reps=20_000, seed=0))
        h = [r["h2"] for r in res.rows]
        se = [r["se"] for r in res.rows]
        dec = all(h[i] - h[i + 1] > 2 * math.hypot(se[i], se[i + 1]) for i in range(len(h) - 1))
        ok &= dec and res.slope <= -0.05
        parts.append(f"{name} slope {res.slope:.3f} strictly decreasing {dec}")
    return bool(ok), "; ".join(parts)


def criterion_8():
    parts, ok = [], True
    for j, name in enumerate(("Poisson", "Bernoulli", "GaussVar")):
        fam = get_family(name)
        p = vst_clt_point(fam, fam.theta_mid, 10_000, 2000, seed=(8, j))
        ok &= 0.9 <= p["variance"] <= 1.1 and p["ks"] <= 0.03
        parts.append(f"{name} var {p['variance']:.3f} KS {p['ks']:.3f}")
    return bool(ok), "; ".join(parts)


def criterion_9():
    # Gaussian exactness across random test functions
    exact = True
    for k in range(20):
        run = quantile_couple(get_family("GaussMean"), np.zeros(512), seed=(9, k))
        exact &= s_n(run, sample_holder(0.75, 1.0, (-1, 1), 512, seed=(90, k))) == 0.0
    res = run_coupling(RunConfig("coupling", "Poisson", n_list=(4096,), reps=500, seed=0))
    checks = dict(res.summary["checks"])
    checks["gaussian_exact"] = checks["gaussian_exact"] and bool(exact)
    s = res.summary
    detail = (
        f"checks {checks}; growth coupled {s['growth_exponent_coupled']:.3f} uncoupled {s['growth_exponent_uncoupled']:.3f}; "
        f"tail at scale log(n)^2 degenerate {s['tail']['degenerate']}"
    )
    return all(checks.values()), detail


def criterion_10():
    k = epanechnikov()
    const_err = max(
        float(np.max(np.abs(smooth(np.full(n, 2.5), k, rates(n, 0.75).delta_n)[0] - 2.5))) for n in (1024, 4096, 16384)
    )
    fam = get_family("Poisson")
    n = 4096
    r = rates(n, 0.75)
    bias_ok = True
    for j in range(50):
        f = sample_holder(0.75, 1.0, fam.theta0, n, seed=(10, j))
        g = fam.mean_param(f.values)
        out = nadaraya_watson(g, k, r.delta_n)
        c5 = bias_constant(k, fam, 0.75, 1.0, float(out.rho.values.min()))
        bias_ok &= float(np.max(np.abs(out.g_star.values - g))) <= c5 * r.gamma_n
    rep = es1_experiment(fam, 0.75, 1.0, (1024, 4096, 16384), reps=100, seed=0)
    ok = const_err <= 1e-13 and bias_ok and rep.passed
    return bool(ok), (
        f"constant error {const_err:.1e}; bias bound held {bias_ok}; "
        f"c1 {rep.fitted_c1:.3f} stability {rep.stability:.2f} failure rate {rep.failure_rate:.3f}"
    )


def criterion_11():
    gm = run_transfer(RunConfig("transfer", "GaussMean", n_list=(4096,), reps=100, seed=0)).summary
    po = run_transfer(RunConfig("transfer", "Poisson", n_list=(4096,), reps=100, seed=0)).summary
    lo, hi = po["ci"]
    ok = 0.8 <= gm["ratio"] <= 1.25 and hi - lo < 0.5
    return ok, f"GaussMean ratio {gm['ratio']:.3f}; Poisson ratio {po['ratio']:.3f} CI [{lo:.3f}, {hi:.3f}]"


def criterion_12(tmp_dir=None):
    commands = [
        ["families"],
        ["vst-clt", "--family", "poisson"],
        ["transfer", "--family", "gaussmean", "--reps", "20"],
        ["distance-sweep", "--family", "gaussmean", "--n", "256..1024", "--reps", "2000"],
    ]
    with tempfile.TemporaryDirectory(dir=tmp_dir) as base:
        same = True
        for j, args in enumerate(commands):
            outs = []
            for rerun in range(2):
                out = Path(base) / f"c{j}_{rerun}"
                with contextlib.redirect_stdout(io.StringIO()):
                    cli_main([*args, "--seed", "11", "--out", str(out)])
                outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            same &= bool(outs[0]) and outs[0] == outs[1]
    return same, f"{len(commands)} commands rerun, outputs byte-identical {same}"


CRITERIA = {
    1: ("closed-form catalogue", criterion_1),
    2: ("derivative identities", criterion_2),
    3: ("moment and MGF suite", criterion_3),
    4: ("Hellinger exactness and subadditivity", criterion_4),
    5: ("null equivalence (GaussMean sweep)", criterion_5),
    6: ("white-noise VST bound", criterion_6),
    7: ("equivalence decay (Poisson, Bernoulli sweeps)", criterion_7),
    8: ("VST central limit", criterion_8),
    9: ("coupling", criterion_9),
    10: ("preliminary estimator", criterion_10),
    11: ("transfer parity", criterion_11),
    12: ("determinism", criterion_12),
}


def evaluate(k: int, **kw) -> tuple[bool, str]:
    name, fn = CRITERIA[k]
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        try:
            ok, detail = fn(**kw)
        except Exception as exc:  # reported as a failed criterion, then re-raised by the test
            RESULTS[k] = (name, False, f"error: {exc!r}", time.perf_counter() - t0)
            raise
    RESULTS[k] = (name, bool(ok), detail, time.perf_counter() - t0)
    return bool(ok), detail


def format_line(k: int) -> str:
    name, ok, detail, secs = RESULTS[k]
    return f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {name} [{secs:.1f}s]: {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, tmp_path):
    kw = {"tmp_dir": tmp_path} if k == 12 else {}
    ok, detail = evaluate(k, **kw)
    print(format_line(k))
    assert ok, detail


if __name__ == "__main__":
    status = 0
    for k in sorted(CRITERIA):
        try:
            evaluate(k)
        except Exception:  # the line below records the error
            pass
        print(format_line(k), flush=True)
        status |= not RESULTS[k][1]
    sys.exit(int(status))

"""Acceptance criteria 1-10, one ``PASS``/``FAIL`` line each.

The lines are printed as the tests run (visible with ``-s``) and repeated in
the "acceptance criteria" section of the terminal summary.  Criteria that are
out of reach at desk scale are still asserted at their stated tolerances, as
strict expected failures; the line reports the measured numbers either way.
"""

import math

import mpmath
import numpy as np
import pytest

from dslt_lab.constants import (
    bar_sigma_squared,
    chaos_variances_at_eps,
    hat_sigma_squared,
    odd_chaos_combinatorial_sum,
    sigma_squared_closed_form,
    sigma_squared_integral_form,
    sigma_squared_limit,
)
from dslt_lab.experiments import ExperimentPlan, existence_probe, run_clt_experiment
from dslt_lab.fbm import FbmConfig, exact_covariance, sample_path
from dslt_lab.geometry import DomainCase, covariance_triple

pytestmark = pytest.mark.slow

SWEEP = (0.2, 0.1, 0.05, 0.025)


def rel(a, b):
    return abs(a - b) / abs(b)


# --------------------------------------------------------------------------
# 1. covariance oracle


@pytest.mark.parametrize("H", [0.375, 0.45, 0.75])
def test_c1_covariance(H, acceptance):
    N, n = 20000, 8
    t = np.arange(1, n + 1) / n
    exact = exact_covariance(t[:, None], t[None, :], H)
    worst = 0.0
    paths = np.stack([sample_path(FbmConfig(H, 2, 1.0, n, 101), i).values[1:] for i in range(N)])
    for j in range(2):
        x = paths[:, :, j]
        prods = x[:, :, None] * x[:, None, :]
        se = prods.std(axis=0, ddof=1) / math.sqrt(N)
        worst = max(worst, float(np.max(np.abs(prods.mean(axis=0) - exact) / se)))
    ok = acceptance(f"1 (H={H})", worst < 4.0, f"max |empirical - exact| = {worst:.2f} SE over 2x36 entries (< 4)")
    assert ok


# --------------------------------------------------------------------------
# 2. closed-form constant


def test_c2a_one_over_108(acceptance):
    value = sigma_squared_closed_form(0.75, 2, 1.0)
    with mpmath.workdps(30):
        beta = mpmath.gamma(mpmath.mpf(4) / 3) * mpmath.gamma(mpmath.mpf(2) / 3) / mpmath.gamma(2)
        oracle = float(beta**2 / (16 * mpmath.pi**2))
    err = max(abs(value - 1 / 108), abs(value - oracle))
    ok = acceptance("2a", err <= 1e-10, f"closed form {value:.15f} vs 1/108, Gamma oracle: err {err:.1e} (<= 1e-10)")
    assert ok


def test_c2_integral_equals_limit(acceptance):
    # not a criterion line: the integral does agree with the corrected constant
    for H, d in [(0.75, 2), (0.8, 3), (0.6, 4)]:
        assert rel(sigma_squared_integral_form(H, d).value, sigma_squared_limit(H, d)) <= 1e-9


@pytest.mark.xfail(strict=True, reason="the closed form lacks a factor 1/H^2; integral/closed = 1/H^2 exactly")
def test_c2b_integral_vs_closed(acceptance):
    gaps = {}
    for H, d in [(0.75, 2), (0.8, 3), (0.6, 4)]:
        r = sigma_squared_integral_form(H, d)
        assert r.converged
        gaps[(H, d)] = rel(r.value, sigma_squared_closed_form(H, d))
    detail = ", ".join(f"(H={H},d={d}) rel gap {g:.4f} (1/H^2-1 = {1 / H**2 - 1:.4f})" for (H, d), g in gaps.items())
    ok = acceptance("2b", max(gaps.values()) <= 1e-6, detail + " (<= 1e-6)")
    assert ok


# --------------------------------------------------------------------------
# 3. combinatorial identity


def test_c3_identity(acceptance):
    bad = [(m, d) for m in range(1, 7) for d in range(1, 6) if len(set(odd_chaos_combinatorial_sum(m, d))) != 1]
    ok = acceptance("3", not bad, f"exact rational equality for 30 (m, d) pairs, mismatches {bad}")
    assert ok


# --------------------------------------------------------------------------
# 4. mu oracle


def _times(case, a, b, c):
    if case is DomainCase.D1:
        return 0, a + b, a, a + b + c
    if case is DomainCase.D2:
        return 0, a + b + c, a, a + b
    return 0, a, a + b, a + b + c


def _direct(case, a, b, c, H):
    with mpmath.workdps(40):
        h = 2 * mpmath.mpf(H)
        r, s, r2, s2 = (v + mpmath.mpf("0.1") for v in _times(case, *map(mpmath.mpf, (a, b, c))))

        def k(x, y):
            return (x**h + y**h - abs(x - y) ** h) / 2

        return float((s - r) ** h), float((s2 - r2) ** h), float(k(s, s2) - k(s, r2) - k(r, s2) + k(r, r2))


def test_c4_mu_oracle(acceptance):
    rng = np.random.default_rng(404)
    worst = {}
    for case in DomainCase:
        abc = rng.dirichlet(np.ones(4), size=1000)[:, :3]
        hs = rng.uniform(0.05, 0.95, size=1000)
        err = 0.0
        for (a, b, c), H in zip(abc, hs):
            tr = covariance_triple(case, a, b, c, H)
            lam, rho, cov = _direct(case, a, b, c, H)
            err = max(err, rel(tr.lam, lam), rel(tr.rho, rho), rel(tr.cov, cov), rel(tr.mu, abs(cov)))
        worst[case.name] = err
    detail = ", ".join(f"{k} max rel err {v:.1e}" for k, v in worst.items())
    ok = acceptance("4", max(worst.values()) <= 1e-12, detail + " over 1000 quadruples each (<= 1e-12)")
    assert ok


# --------------------------------------------------------------------------
# 5. chaos / total resummation at eps = 0.1


def test_c5_resummation(acceptance):
    res = chaos_variances_at_eps(30, 0.1, 0.45, 3, include_total=True)
    sums = np.cumsum([r.value for r in res[:-1]])
    total = res[-1].value
    gap = rel(sums[-1], total)
    mono = bool(np.all(np.diff(sums) > 0))
    conv = all(r.converged for r in res)
    ok = acceptance(
        "5",
        gap <= 1e-3 and mono and conv,
        f"total {total:.10f}, sum_(m<=30) {sums[-1]:.10f}, rel gap {gap:.2e} (<= 1e-3), monotone={mono}, converged={conv}",
    )
    assert ok


# --------------------------------------------------------------------------
# 6. regime constants


@pytest.mark.parametrize(
    "name,fn,args",
    [("hat sigma^2(0.45, 3, 1)", hat_sigma_squared, (0.45, 3, 1.0)), ("bar sigma^2(0.375, 3, 1)", bar_sigma_squared, (0.375, 3, 1.0))],
)
def test_c6_constants(name, fn, args, acceptance):
    base = fn(*args)
    wide = fn(*args, box=2.0)
    box_change = rel(wide.value, base.value)
    level_change = rel(base.levels[-2], base.levels[-1])
    ok = acceptance(
        f"6 ({name})",
        base.converged and wide.converged and box_change <= 1e-4 and level_change <= 1e-4,
        f"value {base.value:.12f}, box x2 change {box_change:.1e}, last level change {level_change:.1e} (<= 1e-4), "
        f"converged={base.converged and wide.converged}",
    )
    assert ok


# --------------------------------------------------------------------------
# 7. supercritical CLT trend


C7_PLAN = dict(hurst=0.75, dim=2, eps_sweep=(0.1, 0.05, 0.02), replications=2000, master_seed=7)


@pytest.fixture(scope="module")
def c7_run(tmp_path_factory):
    path = tmp_path_factory.mktemp("c7") / "samples.csv"
    rep = run_clt_experiment(ExperimentPlan(**C7_PLAN), threads=4, samples_path=str(path))
    return rep, path


def test_c7a_mean(c7_run, acceptance):
    rep, _ = c7_run
    zs = [st.mean_z_score for st in rep.per_eps]
    ok = acceptance("7a", all(abs(z) < 4 for z in zs), "mean z-scores " + ", ".join(f"{z:+.2f}" for z in zs) + " (|z| < 4)")
    assert ok


@pytest.mark.xfail(strict=True, reason="the normalized variance tends to 1/(108 H^2) = 4/243, passing 1/108 on the way")
def test_c7b_variance_trend(c7_run, acceptance):
    rep, _ = c7_run
    target = 1 / 108
    var = [st.sample_variance for st in rep.per_eps]
    dist = [abs(v - target) for v in var]
    toward = all(dist[k + 1] < dist[k] for k in range(len(dist) - 1))
    ratio = var[-1] / target
    ok = acceptance(
        "7b",
        toward and 0.7 <= ratio <= 1.3,
        "normalized variances " + ", ".join(f"{v:.5f}" for v in var)
        + f"; monotone toward 1/108={toward}, final ratio {ratio:.3f} (in [0.7, 1.3]);"
        + f" ratio to 4/243 is {var[-1] / sigma_squared_limit(0.75, 2):.3f}",
    )
    assert ok


@pytest.mark.xfail(strict=True, reason="at eps=0.02 the estimator is still platykurtic (excess kurtosis -0.4 to -0.6, SE 0.11)")
def test_c7c_normality(c7_run, acceptance):
    rep, _ = c7_run
    p = rep.per_eps[-1].ks_p_value
    ok = acceptance("7c", p > 0.01, f"KS p-value at eps=0.02 is {p:.3f} (> 0.01)")
    assert ok


# --------------------------------------------------------------------------
# 8. existence threshold


@pytest.fixture(scope="module")
def c8_run():
    return existence_probe([0.30, 0.45], 3, SWEEP, 1000, master_seed=8, check_eps=0.1)


@pytest.mark.xfail(strict=True, reason="the raw variance at H=0.30 still grows over this sweep; it nears its finite limit only for eps << 1e-3")
def test_c8a_slope_below(c8_run, acceptance):
    e = c8_run["entries"][0]
    ok = acceptance("8a", abs(e["slope"]) <= 0.15, f"H=0.30 log-log variance slope {e['slope']:+.3f} (|s| <= 0.15)")
    assert ok


@pytest.mark.xfail(strict=True, reason="at eps >= 0.025 the local slope at H=0.45 is still far steeper than -2/3")
def test_c8b_slope_above(c8_run, acceptance):
    e = c8_run["entries"][1]
    ok = acceptance("8b", abs(e["slope"] + 2 / 3) <= 0.15, f"H=0.45 log-log variance slope {e['slope']:+.3f} (-2/3 +- 0.15)")
    assert ok


def test_c8c_quadrature_check(c8_run, acceptance):
    parts, good = [], True
    for e in c8_run["entries"]:
        q = e["quadrature_check"]
        lo, hi = q["variance_ci95"]
        good &= q["within_3_ci"] and q["quadrature_converged"]
        parts.append(
            f"H={e['hurst']}: MC {q['mc_variance']:.6f} [{lo:.6f}, {hi:.6f}] vs quadrature {q['quadrature_variance']:.6f}"
        )
    ok = acceptance("8c", good, "; ".join(parts) + " (within 3 CI half-widths)")
    assert ok


# --------------------------------------------------------------------------
# 9. critical regime


def test_c9_critical_growth(acceptance):
    plan = ExperimentPlan(hurst=0.375, dim=3, eps_sweep=SWEEP, replications=1000, master_seed=9)
    fit = run_clt_experiment(plan).slope_fit
    ok = acceptance("9", fit.r2 >= 0.9 and fit.slope > 0, f"raw variance vs log(1/eps): slope {fit.slope:.3e}, R^2 {fit.r2:.3f} (>= 0.9)")
    assert ok


# --------------------------------------------------------------------------
# 10. determinism


def test_c10_determinism(c7_run, tmp_path, acceptance):
    _, path4 = c7_run
    path1 = tmp_path / "samples.csv"
    run_clt_experiment(ExperimentPlan(**C7_PLAN), threads=1, samples_path=str(path1))
    same_clt = path1.read_bytes() == path4.read_bytes()
    probe = {}
    for threads in (1, 3):
        out = tmp_path / f"x{threads}"
        out.mkdir()
        existence_probe([0.3, 0.45], 3, (0.2, 0.1), 100, master_seed=10, threads=threads, output_dir=str(out), check_eps=None)
        probe[threads] = [(out / f"samples_h{i}.csv").read_bytes() for i in range(2)]
    same_probe = probe[1] == probe[3]
    ok = acceptance("10", same_clt and same_probe, f"clt CSV identical for 1 vs 4 threads: {same_clt}; existence CSVs for 1 vs 3: {same_probe}")
    assert ok

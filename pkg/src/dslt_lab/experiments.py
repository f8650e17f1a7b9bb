"""Monte Carlo harness: eps-sweeps, normalisation, normality and slope fits.

Replicate ``r`` at sweep position ``k`` always draws its path from the
random stream keyed by ``(master_seed, k, r)``, and replicates are collected
in index order, so a report depends only on the plan -- not on the number of
worker threads.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .constants import (
    Regime,
    RegimeParams,
    critical_hurst,
    sigma_squared_closed_form,
    sigma_squared_limit,
    total_variance_at_eps,
)
from .errors import NonFinitePath, OutOfRegime, ResolutionViolation, TooFewSamples
from .estimator import DEFAULT_GUARD, EstimatorConfig, estimate_dslt, path_steps_for
from .fbm import FbmConfig, sample_path
from .quadrature import QuadratureSpec

__all__ = [
    "ExperimentPlan",
    "EpsStats",
    "SlopeFit",
    "StatsReport",
    "normalization_factor",
    "normality_tests",
    "variance_ci",
    "slope_fit",
    "run_replicates",
    "summarize",
    "run_clt_experiment",
    "existence_probe",
    "predicted_variance_slope",
    "SAMPLES_HEADER",
    "write_samples_csv",
    "read_samples_csv",
]

SAMPLES_HEADER = ("eps", "replicate", "raw_value", "normalized_value", "guard_ratio")
MAX_DROP_FRACTION = 0.01
BOOTSTRAP_RESAMPLES = 1000
_BOOTSTRAP_TAG = 0xB007


# --------------------------------------------------------------------------
# plan and report types


@dataclass(frozen=True)
class ExperimentPlan:
    hurst: float
    dim: int
    eps_sweep: tuple[float, ...]
    replications: int = 2000
    horizon: float = 1.0
    master_seed: int = 0
    regime: str = "auto"
    path_steps: tuple[int, ...] | None = None
    guard: float = DEFAULT_GUARD
    output_dir: str | None = None

    def __post_init__(self):
        sweep = tuple(float(e) for e in self.eps_sweep)
        object.__setattr__(self, "eps_sweep", sweep)
        if not sweep or any(e <= 0 for e in sweep):
            raise ValueError("eps_sweep must be a nonempty list of positive values")
        if any(b >= a for a, b in zip(sweep, sweep[1:])):
            raise ValueError("eps_sweep must be strictly decreasing")
        if self.replications < 100:
            raise ValueError("replications must be >= 100")
        if self.path_steps is not None:
            steps = tuple(int(n) for n in self.path_steps)
            if len(steps) != len(sweep):
                raise ValueError("path_steps must give one grid size per eps")
            object.__setattr__(self, "path_steps", steps)
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def steps_for(self, k: int) -> int:
        if self.path_steps is not None:
            return self.path_steps[k]
        return path_steps_for(self.eps_sweep[k], self.hurst, self.horizon, self.guard)

    def regime_params(self) -> RegimeParams:
        return RegimeParams(self.hurst, self.dim, self.horizon, self.regime)

    def echo(self) -> dict:
        out = asdict(self)
        out["eps_sweep"] = list(self.eps_sweep)
        out["path_steps"] = [self.steps_for(k) for k in range(len(self.eps_sweep))]
        out.pop("output_dir")
        return out


@dataclass
class EpsStats:
    eps: float
    steps: int
    n_effective: int
    drops: int
    sample_mean: float
    sample_variance: float
    variance_ci95: tuple[float, float]
    skewness: float
    excess_kurtosis: float
    skew_z: float
    kurt_z: float
    ks_statistic: float
    ks_p_value: float
    mean_z_score: float
    raw_variance: float


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    x: str = "log_eps"
    y: str = "log_variance"


@dataclass
class StatsReport:
    plan: dict
    regime: str | None
    per_eps: list[EpsStats]
    slope_fit: SlopeFit | None
    theoretical_constant: float | None = None
    limit_constant: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# --------------------------------------------------------------------------
# normalisation and statistics


def normalization_factor(regime, eps: float, hurst: float | None = None, dim: int | None = None) -> float:
    """Scaling that makes the estimator converge in law.

    ``regime`` is a :class:`RegimeParams` (then ``hurst``/``dim`` are taken
    from it) or a :class:`Regime` / name together with ``hurst`` and ``dim``.
    """
    if isinstance(regime, RegimeParams):
        hurst, dim, regime = regime.hurst, regime.dim, regime.regime
    regime = Regime(regime) if isinstance(regime, str) else regime
    if not eps > 0:
        raise OutOfRegime("eps must be positive")
    if regime is Regime.SUPERCRITICAL:
        return eps ** (dim / 2.0 + 1.0 - 1.0 / hurst)
    if regime is Regime.SUBCRITICAL:
        return eps ** (dim / 2.0 + 0.5 - 3.0 / (4.0 * hurst))
    if regime is Regime.CRITICAL:
        if not eps < 1:
            raise OutOfRegime("the critical normalisation needs eps in (0, 1)")
        return math.log(1.0 / eps) ** -0.5
    raise OutOfRegime(f"unknown regime {regime!r}")


def predicted_variance_slope(hurst: float, dim: int) -> float:
    """Exponent ``s`` in ``Var ~ eps^s`` above the threshold: ``-(d + 1 - 3/(2H))``."""
    return -(dim + 1.0 - 3.0 / (2.0 * hurst))


def normality_tests(samples) -> dict:
    """KS against ``N(0, s^2)`` plus skewness/kurtosis z-scores.

    The KS p-value uses the asymptotic Kolmogorov distribution and ignores
    that ``s^2`` was estimated, so it is approximate (conservative).
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 100:
        raise TooFewSamples(f"need >= 100 samples, got {n}")
    s2 = float(np.var(x, ddof=1))
    if s2 == 0.0:
        d_stat = 1.0
        skew = kurt = float("nan")
    else:
        xs = np.sort(x)
        cdf = stats.norm.cdf(xs / math.sqrt(s2))
        i = np.arange(1, n + 1)
        d_stat = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
        skew = float(stats.skew(x))
        kurt = float(stats.kurtosis(x))
    p = float(stats.kstwobign.sf(math.sqrt(n) * d_stat))
    return {
        "ks_statistic": d_stat,
        "ks_p_value": min(max(p, 0.0), 1.0),
        "skewness": skew,
        "excess_kurtosis": kurt,
        "skew_z": skew / math.sqrt(6.0 / n),
        "kurt_z": kurt / math.sqrt(24.0 / n),
    }


def variance_ci(samples, rng: np.random.Generator, resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95):
    """Percentile bootstrap interval for the sample variance."""
    x = np.asarray(samples, dtype=float)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    boot = np.var(x[idx], axis=1, ddof=1)
    lo, hi = np.quantile(boot, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def slope_fit(x, y, x_label="log_eps", y_label="log_variance") -> SlopeFit:
    res = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return SlopeFit(float(res.slope), float(res.intercept), float(res.rvalue**2), x_label, y_label)


# --------------------------------------------------------------------------
# sampling


def _one_replicate(hurst, dim, horizon, steps, seed, k, r, est_cfg):
    path = sample_path(FbmConfig(hurst, dim, horizon, steps, seed), (k, r))
    return estimate_dslt(path, est_cfg)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("DSLT_LAB_THREADS", "1") or 1)
    return max(1, int(threads))


def run_replicates(plan: ExperimentPlan, k: int, threads: int | None = None, progress=None):
    """Raw estimates for sweep position ``k``: ``(raw, guard_ratio, drops)``.

    Replicates that violate the resolution guard or produce a non-finite
    path are dropped and counted; more than 1% drops is an error.
    """
    eps = plan.eps_sweep[k]
    steps = plan.steps_for(k)
    est_cfg = EstimatorConfig(eps, resolution_guard=plan.guard)
    n = plan.replications

    def job(r):
        try:
            return _one_replicate(plan.hurst, plan.dim, plan.horizon, steps, plan.master_seed, k, r, est_cfg)
        except (ResolutionViolation, NonFinitePath) as exc:
            return exc

    threads = resolve_threads(threads)
    if threads == 1:
        results = []
        for r in range(n):
            results.append(job(r))
            if progress is not None:
                progress(k, r + 1, n)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(n)))
    raw = np.full(n, np.nan)
    ratio = np.full(n, np.nan)
    errors = []
    for r, res in enumerate(results):
        if isinstance(res, Exception):
            errors.append(res)
            continue
        raw[r] = res.value
        ratio[r] = res.guard_ratio
    drops = len(errors)
    if drops > MAX_DROP_FRACTION * n:
        raise ResolutionViolation(f"{drops} of {n} replicates dropped at eps={eps}: {errors[0]}")
    return raw, ratio, drops


def _bootstrap_rng(seed, k):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), _BOOTSTRAP_TAG, int(k)])))


def eps_stats(eps, steps, raw, normalized, drops, seed, k) -> EpsStats:
    keep = np.isfinite(raw)
    x = normalized[keep]
    n = x.size
    tests = normality_tests(x)
    var = float(np.var(x, ddof=1))
    mean = float(np.mean(x))
    sd = math.sqrt(var)
    return EpsStats(
        eps=float(eps),
        steps=int(steps),
        n_effective=int(n),
        drops=int(drops),
        sample_mean=mean,
        sample_variance=var,
        variance_ci95=variance_ci(x, _bootstrap_rng(seed, k)),
        skewness=tests["skewness"],
        excess_kurtosis=tests["excess_kurtosis"],
        skew_z=tests["skew_z"],
        kurt_z=tests["kurt_z"],
        ks_statistic=tests["ks_statistic"],
        ks_p_value=tests["ks_p_value"],
        mean_z_score=mean / (sd / math.sqrt(n)) if sd > 0 else 0.0,
        raw_variance=float(np.var(raw[keep], ddof=1)),
    )


# --------------------------------------------------------------------------
# persistence


def write_samples_csv(target, rows):
    """Rows of ``(eps, replicate, raw, normalized, guard_ratio)`` at 17 digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLES_HEADER)
    for eps, rep, raw, norm, ratio in rows:
        w.writerow([f"{eps:.17g}", int(rep), f"{raw:.17g}", f"{norm:.17g}", f"{ratio:.17g}"])
    with open(target, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_samples_csv(source):
    """Inverse of :func:`write_samples_csv`: dict eps -> (replicates, raw, normalized, ratio)."""
    out = {}
    with open(source, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != SAMPLES_HEADER:
            raise ValueError(f"unexpected samples header {header}")
        for row in rd:
            eps = float(row[0])
            out.setdefault(eps, ([], [], [], []))
            for col, val in zip(out[eps], (int(row[1]), float(row[2]), float(row[3]), float(row[4]))):
                col.append(val)
    return {e: tuple(np.asarray(c) for c in cols) for e, cols in out.items()}


# --------------------------------------------------------------------------
# experiments


def _factor_for(plan: ExperimentPlan, regime: RegimeParams | None, eps: float) -> float:
    return 1.0 if regime is None else normalization_factor(regime, eps)


def summarize(plan: ExperimentPlan, samples: dict, regime: RegimeParams | None) -> StatsReport:
    """Build the report from per-eps ``(replicates, raw, normalized, ratio)`` arrays.

    Shared by the live run and by re-rendering from a persisted CSV.
    """
    per_eps = []
    for k, eps in enumerate(plan.eps_sweep):
        reps, raw, norm, _ = samples[eps]
        full_raw = np.full(plan.replications, np.nan)
        full_norm = np.full(plan.replications, np.nan)
        full_raw[reps] = raw
        full_norm[reps] = norm
        drops = plan.replications - len(reps)
        per_eps.append(eps_stats(eps, plan.steps_for(k), full_raw, full_norm, drops, plan.master_seed, k))
    log_eps = np.log(plan.eps_sweep)
    fit = None
    extra = {}
    if len(plan.eps_sweep) >= 2:
        if regime is not None and regime.regime is Regime.CRITICAL:
            fit = slope_fit(
                -log_eps, [s.raw_variance for s in per_eps], "log_inv_eps", "raw_variance"
            )
        elif regime is not None:
            fit = slope_fit(log_eps, np.log([s.sample_variance for s in per_eps]), "log_eps", "log_normalized_variance")
        else:
            fit = slope_fit(log_eps, np.log([s.raw_variance for s in per_eps]), "log_eps", "log_raw_variance")
    theo = limit = None
    name = None
    if regime is not None:
        name = regime.regime.value
        if regime.regime is Regime.SUPERCRITICAL:
            theo = sigma_squared_closed_form(regime.hurst, regime.dim, regime.horizon)
            limit = sigma_squared_limit(regime.hurst, regime.dim, regime.horizon)
    return StatsReport(plan.echo(), name, per_eps, fit, theo, limit, extra)


def _collect(plan, regime, threads, progress):
    samples = {}
    rows = []
    for k, eps in enumerate(plan.eps_sweep):
        raw, ratio, _ = run_replicates(plan, k, threads, progress)
        factor = _factor_for(plan, regime, eps)
        keep = np.nonzero(np.isfinite(raw))[0]
        norm = factor * raw
        samples[eps] = (keep, raw[keep], norm[keep], ratio[keep])
        rows.extend((eps, r, raw[r], norm[r], ratio[r]) for r in keep)
    return samples, rows


def run_clt_experiment(
    plan: ExperimentPlan,
    threads: int | None = None,
    progress=None,
    samples_path: str | None = None,
) -> StatsReport:
    """Normalised estimator over the sweep with variance, normality and trend stats.

    Raw samples are written to ``samples_path`` (or
    ``<output_dir>/samples.csv``) when either is given.
    """
    regime = plan.regime_params()
    samples, rows = _collect(plan, regime, threads, progress)
    target = samples_path or (os.path.join(plan.output_dir, "samples.csv") if plan.output_dir else None)
    if target:
        write_samples_csv(target, rows)
    return summarize(plan, samples, regime)


CHECK_SPEC = QuadratureSpec(rule="tanh_sinh", base_level=2, max_level=5, rel_tol=1e-5, t_max=3.5)


def _quadrature_check(plan, rep, eps, spec):
    hits = [k for k, e in enumerate(plan.eps_sweep) if math.isclose(e, eps, rel_tol=1e-12)]
    if not hits:
        return None
    st = rep.per_eps[hits[0]]
    q = total_variance_at_eps(eps, plan.hurst, plan.dim, plan.horizon, spec or CHECK_SPEC)
    lo, hi = st.variance_ci95
    half = 0.5 * (hi - lo)
    return {
        "eps": float(eps),
        "mc_variance": st.raw_variance,
        "variance_ci95": [lo, hi],
        "quadrature_variance": q.value,
        "quadrature_converged": bool(q.converged),
        "within_3_ci": bool(abs(st.raw_variance - q.value) <= 3.0 * half),
    }


def existence_probe(
    hurst_list,
    dim: int,
    eps_sweep,
    replications: int,
    horizon: float = 1.0,
    master_seed: int = 0,
    threads: int | None = None,
    progress=None,
    output_dir: str | None = None,
    check_eps: float | None = 0.1,
    check_spec: QuadratureSpec | None = None,
    slope_tol: float = 0.15,
) -> dict:
    """Raw-variance scaling in ``eps`` for each Hurst index.

    Each entry reports the log-log slope and a classification:
    ``convergent`` when ``|slope| <= slope_tol``, otherwise ``divergent``.
    For ``H`` above the threshold the predicted slope ``-(d+1-3/(2H))`` is
    included.  Samples for the ``i``-th Hurst index go to
    ``<output_dir>/samples_h{i}.csv``.

    When ``check_eps`` is one of the sweep values, the Monte Carlo variance
    there is compared with the quadrature second moment; the check passes
    when they differ by at most three half-widths of the bootstrap 95%
    interval.
    """
    if dim < 2:
        raise OutOfRegime("the existence probe needs d >= 2")
    hc = critical_hurst(dim)
    entries = []
    for i, h in enumerate(hurst_list):
        plan = ExperimentPlan(
            hurst=float(h),
            dim=dim,
            eps_sweep=tuple(eps_sweep),
            replications=replications,
            horizon=horizon,
            master_seed=master_seed,
        )
        samples, rows = _collect(plan, None, threads, progress)
        if output_dir:
            write_samples_csv(os.path.join(output_dir, f"samples_h{i}.csv"), rows)
        rep = summarize(plan, samples, None)
        slope = rep.slope_fit.slope if rep.slope_fit else float("nan")
        entry = {
            "hurst": float(h),
            "side": "below" if h < hc else ("at" if abs(h - hc) <= 1e-12 else "above"),
            "classification": "convergent" if abs(slope) <= slope_tol else "divergent",
            "slope": slope,
            "predicted_slope": predicted_variance_slope(h, dim) if h > hc else 0.0,
            "report": rep.to_dict(),
        }
        if check_eps is not None:
            entry["quadrature_check"] = _quadrature_check(plan, rep, check_eps, check_spec)
        entries.append(entry)
    return {
        "dim": dim,
        "critical_hurst": hc,
        "consistency_check_only": dim == 2,
        "entries": entries,
    }

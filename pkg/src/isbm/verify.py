"""Monte Carlo experiments checking the construction against distributional law,
kernel quadrature, pathwise identities, and the coupled stability limit.

Every experiment returns an ExperimentReport whose pass/fail is a pure function
of the reported statistics and declared thresholds; distribution tests use the
Kolmogorov-Smirnov statistic with its analytic null quantile plus a declared
discretization allowance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import sqrt
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import erf

from .alpha import AlphaLike, AlphaStep, discretize_alpha
from .construct import assign_signs, construct_isbm, sde_residual, skew_identity_residual
from .excursions import decompose_excursions
from .kernel import conditional_mean, density_on_grid
from .localtime import local_time_occupation, local_time_upcrossing
from .paths import RngSpec, make_grid, simulate_bm

__all__ = [
    "ExperimentReport",
    "ks_statistic",
    "reflection_law_test",
    "marginal_vs_kernel_test",
    "moment_scaling_test",
    "martingale_identity_test",
    "local_time_calibration_test",
    "pathwise_identity_test",
    "stability_experiment",
    "uniqueness_probe",
    "run_suite",
    "SUITE_NAMES",
]

HALF_NORMAL_MEAN = sqrt(2.0 / np.pi)
KS_NULL_COEFF = 1.36  # asymptotic 95% quantile of sqrt(n) * D_n
KS_SAFETY = 1.5
KS_DISCRETIZATION_ALLOWANCE = 0.003


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


@dataclass(frozen=True)
class ExperimentReport:
    """Named experiment outcome: parameters, statistics, thresholds, verdict."""

    experiment: str
    params: dict
    stats: dict
    thresholds: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": _jsonify(self.params),
            "stats": _jsonify(self.stats),
            "thresholds": _jsonify(self.thresholds),
            "pass": bool(self.passed),
        }


def ks_statistic(sample: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample Kolmogorov-Smirnov distance against an exact CDF."""
    xs = np.sort(np.asarray(sample, dtype=np.float64))
    n = xs.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(xs), dtype=np.float64)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - F), np.max(F - (grid - 1.0 / n))))


def _ks_threshold(n: int) -> dict:
    null_q = KS_SAFETY * KS_NULL_COEFF / sqrt(n)
    return {
        "null_quantile": null_q,
        "discretization_allowance": KS_DISCRETIZATION_ALLOWANCE,
        "total": null_q + KS_DISCRETIZATION_ALLOWANCE,
    }


def _map_paths(n_paths: int, worker: Callable[[int], object], threads: int = 1) -> list:
    if threads <= 1:
        return [worker(p) for p in range(n_paths)]
    chunk = max(1, n_paths // (threads * 8))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(n_paths), chunksize=chunk))


def _final_value_worker(alpha: AlphaLike, t: float, dt: float, seed: int, x0: float = 0.0):
    grid = make_grid(0.0, t, dt)

    def worker(p: int) -> float:
        rng = RngSpec(seed, p)
        bm = simulate_bm(grid, rng, x0)
        x, _ = construct_isbm(bm, alpha, rng)
        return float(x.values[-1])

    return worker


def reflection_law_test(alpha: AlphaLike, t: float = 1.0, n_paths: int = 50_000,
                        seed: int = 0, dt: float = 1e-4, threads: int = 1,
                        x0: float = 0.0) -> ExperimentReport:
    """|X_t| against the law of a reflected Brownian magnitude from |x0|.

    From the origin this is the half-normal of scale sqrt(t); from elsewhere
    the folded normal centered at |x0|.
    """
    if n_paths < 1_000:
        raise ValueError("reflection test needs at least 1000 paths")
    samples = np.array(_map_paths(n_paths, _final_value_worker(alpha, t, dt, seed, x0), threads))
    scale = sqrt(t)
    a = abs(x0)

    def half_normal_cdf(v):
        u = np.maximum(np.asarray(v), 0.0)
        if a == 0.0:
            return erf(u / (scale * sqrt(2.0)))
        lo = 0.5 * (1.0 + erf((u - a) / (scale * sqrt(2.0))))
        hi = 0.5 * (1.0 + erf((-u - a) / (scale * sqrt(2.0))))
        return lo - hi

    ks = ks_statistic(np.abs(samples), half_normal_cdf)
    thr = _ks_threshold(n_paths)
    return ExperimentReport(
        experiment="reflection_law",
        params={"t": t, "n_paths": n_paths, "dt": dt, "seed": seed, "x0": x0},
        stats={
            "ks": ks,
            "ks_scale": 1.0 / sqrt(n_paths),
            "mean_abs": float(np.mean(np.abs(samples))),
            "mean_abs_se": float(np.std(np.abs(samples)) / sqrt(n_paths)),
        },
        thresholds=thr,
        passed=ks < thr["total"],
    )


def marginal_vs_kernel_test(alpha: AlphaStep, t: float = 1.0, x0: float = 0.0,
                            n_paths: int = 50_000, seed: int = 0, dt: float = 1e-4,
                            threads: int = 1, quad_tol: float = 1e-8,
                            y_step: float = 0.005) -> ExperimentReport:
    """Empirical law of X_t against the CDF integrated from the kernel."""
    if n_paths < 10_000:
        raise ValueError("marginal test needs at least 10000 paths")
    samples = np.array(_map_paths(n_paths, _final_value_worker(alpha, t, dt, seed, x0), threads))
    c = abs(x0) + 8.0 * sqrt(t)
    ys = np.arange(-c, c + y_step / 2, y_step)
    ps = density_on_grid(0.0, t, x0, alpha, ys, quad_tol=quad_tol)
    cdf_grid = np.concatenate([[0.0], cumulative_trapezoid(ps, ys)])
    mass = float(cdf_grid[-1])

    def cdf(v):
        return np.clip(np.interp(v, ys, cdf_grid), 0.0, 1.0)

    ks = ks_statistic(samples, cdf)
    thr = _ks_threshold(n_paths)
    return ExperimentReport(
        experiment="marginal_vs_kernel",
        params={"t": t, "x0": x0, "n_paths": n_paths, "dt": dt, "seed": seed,
                "quad_tol": quad_tol, "y_step": y_step},
        stats={"ks": ks, "ks_scale": 1.0 / sqrt(n_paths), "kernel_mass": mass,
               "positive_fraction": float(np.mean(samples > 0))},
        thresholds=thr,
        passed=ks < thr["total"],
    )


def moment_scaling_test(alpha: AlphaLike, t: float = 0.25,
                        eps_grid: Sequence[float] = (1e-3, 1e-2, 1e-1),
                        n_paths: int = 50_000, seed: int = 0, dt: float = 2e-5,
                        threads: int = 1) -> ExperimentReport:
    """Fourth moment of increments: E|X_{t+eps} - X_t|^4 should scale like eps^2."""
    if n_paths < 10_000:
        raise ValueError("moment scaling test needs at least 10000 paths")
    eps_grid = sorted(float(e) for e in eps_grid)
    horizon = t + eps_grid[-1]
    grid = make_grid(0.0, horizon, dt)
    k_t = grid.index_of(t)
    k_eps = [grid.index_of(t + e) for e in eps_grid]

    def worker(p: int):
        rng = RngSpec(seed, p)
        bm = simulate_bm(grid, rng)
        x, _ = construct_isbm(bm, alpha, rng)
        base = x.values[k_t]
        return [abs(x.values[k] - base) ** 4 for k in k_eps]

    rows = np.array(_map_paths(n_paths, worker, threads))
    m4 = rows.mean(axis=0)
    m4_se = rows.std(axis=0) / sqrt(n_paths)
    eps_arr = np.array(eps_grid)
    ratios = m4 / eps_arr**2
    slope = float(np.polyfit(np.log(eps_arr), np.log(m4), 1)[0])
    fitted_c = float(np.exp(np.mean(np.log(ratios))))
    max_ratio = float(np.max(ratios))
    ratio_spread = float(np.max(np.abs(ratios / fitted_c - 1.0)))
    thresholds = {"slope_band": [1.9, 2.1], "ratio_spread_max": 0.25}
    passed = 1.9 <= slope <= 2.1 and ratio_spread <= thresholds["ratio_spread_max"]
    return ExperimentReport(
        experiment="moment_scaling",
        params={"t": t, "eps_grid": eps_grid, "n_paths": n_paths, "dt": dt, "seed": seed},
        stats={
            "m4": list(m4),
            "m4_se": list(m4_se),
            "ratios": list(ratios),
            "ratio_se": list(m4_se / eps_arr**2),
            "slope": slope,
            "fitted_constant": fitted_c,
            "max_ratio": max_ratio,
            "ratio_spread": ratio_spread,
        },
        thresholds=thresholds,
        passed=passed,
    )


def martingale_identity_test(alpha: AlphaStep, s: float = 0.3, t: float = 1.0,
                             n_paths: int = 20_000, seed: int = 0, dt: float = 1e-5,
                             eps: float = 0.03, n_bins: int = 8, threads: int = 1,
                             quad_tol: float = 1e-8) -> ExperimentReport:
    """Conditional-mean identity by binning on X_s, plus the compensated
    martingale's mean increment and quadratic variation over [s, t]."""
    if not 0.0 <= s < t:
        raise ValueError(f"need 0 <= s < t, got s={s}, t={t}")
    grid = make_grid(0.0, t, dt)
    k_s = grid.index_of(s)
    weights = 2.0 * np.asarray(alpha(grid.times()[:-1])) - 1.0

    def worker(p: int):
        rng = RngSpec(seed, p)
        bm = simulate_bm(grid, rng)
        x, _ = construct_isbm(bm, alpha, rng)
        curve = local_time_upcrossing(bm, eps)
        skew = np.concatenate([[0.0], np.cumsum(weights * np.diff(curve.values))])
        m = x.values - skew
        window = np.diff(m[k_s:])
        return (
            float(x.values[k_s]),
            float(x.values[-1]),
            float(np.sum(window**2)),
            float(m[-1] - m[k_s]),
        )

    rows = _map_paths(n_paths, worker, threads)
    xs = np.array([r[0] for r in rows])
    xt = np.array([r[1] for r in rows])
    qv = np.array([r[2] for r in rows])
    dm = np.array([r[3] for r in rows])

    predictions = np.array([conditional_mean(s, t, v, alpha, quad_tol) for v in xs])
    edges = np.quantile(xs, np.linspace(0.0, 1.0, n_bins + 1))
    edges[0] -= 1.0
    edges[-1] += 1.0
    bin_of = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, n_bins - 1)
    bins = []
    all_within = True
    for i in range(n_bins):
        mask = bin_of == i
        count = int(mask.sum())
        if count < 50:
            continue
        observed = float(np.mean(xt[mask]))
        predicted = float(np.mean(predictions[mask]))
        se = float(np.std(xt[mask]) / sqrt(count))
        within = abs(observed - predicted) <= 3.0 * se
        all_within &= within
        bins.append({"count": count, "observed": observed, "predicted": predicted,
                     "se": se, "within_3se": within})

    qv_mean = float(np.mean(qv))
    qv_se = float(np.std(qv) / sqrt(n_paths))
    qv_ok = abs(qv_mean - (t - s)) <= 0.05 * (t - s)
    dm_mean = float(np.mean(dm))
    dm_se = float(np.std(dm) / sqrt(n_paths))
    dm_ok = abs(dm_mean) <= 3.0 * dm_se

    return ExperimentReport(
        experiment="martingale_identity",
        params={"s": s, "t": t, "n_paths": n_paths, "dt": dt, "eps": eps,
                "n_bins": n_bins, "seed": seed},
        stats={"bins": bins, "qv_mean": qv_mean, "qv_se": qv_se,
               "increment_mean": dm_mean, "increment_se": dm_se},
        thresholds={"bin_rule": "3 standard errors per bin",
                    "qv_band": [0.95 * (t - s), 1.05 * (t - s)],
                    "increment_rule": "3 standard errors"},
        passed=all_within and qv_ok and dm_ok,
    )


def local_time_calibration_test(eps: float = 0.02, dt: float = 1e-5, n_paths: int = 2_000,
                                t: float = 1.0, seed: int = 0, threads: int = 1,
                                rel_band: float = 0.03,
                                agreement_tol: float = 0.05) -> ExperimentReport:
    """Both estimators on Brownian drivers: means must sit near sqrt(2t/pi)
    scaled, and agree with each other."""
    grid = make_grid(0.0, t, dt)

    def worker(p: int):
        rng = RngSpec(seed, p)
        bm = simulate_bm(grid, rng)
        up = local_time_upcrossing(bm, eps)
        occ = local_time_occupation(bm, eps)
        raw = local_time_upcrossing(bm, eps, correction="raw")
        return (float(up.values[-1]), float(occ.values[-1]), float(raw.values[-1]))

    rows = np.array(_map_paths(n_paths, worker, threads))
    target = HALF_NORMAL_MEAN * sqrt(t)
    mean_up, mean_occ, mean_raw = rows.mean(axis=0)
    se_up, se_occ, _ = rows.std(axis=0) / sqrt(n_paths)
    agreement = abs(mean_up - mean_occ)
    band = [target * (1.0 - rel_band), target * (1.0 + rel_band)]
    passed = band[0] <= mean_up <= band[1] and band[0] <= mean_occ <= band[1] \
        and agreement <= agreement_tol
    return ExperimentReport(
        experiment="local_time_calibration",
        params={"eps": eps, "dt": dt, "n_paths": n_paths, "t": t, "seed": seed},
        stats={
            "mean_upcrossing": float(mean_up), "se_upcrossing": float(se_up),
            "mean_occupation": float(mean_occ), "se_occupation": float(se_occ),
            "mean_upcrossing_raw": float(mean_raw),
            "agreement": float(agreement),
            "target": target,
            "pathwise_mean_abs_diff": float(np.mean(np.abs(rows[:, 0] - rows[:, 1]))),
        },
        thresholds={"mean_band": band, "agreement_tol": agreement_tol},
        passed=bool(passed),
    )


def _identity_residual_worker(alpha: AlphaLike, dt: float, eps: float, seed: int, horizon: float = 1.0):
    grid = make_grid(0.0, horizon, dt)

    def worker(p: int):
        rng = RngSpec(seed, p)
        bm = simulate_bm(grid, rng)
        x, signs = construct_isbm(bm, alpha, rng)
        curve = local_time_upcrossing(bm, eps)
        r_identity = skew_identity_residual(signs, bm, alpha, curve)
        r_sde = sde_residual(x, bm, alpha, curve)
        return (r_identity, r_sde)

    return worker


def pathwise_identity_test(alpha: AlphaLike, n_paths: int = 200, dt: float = 1e-5,
                           eps: float = 0.03, seed: int = 0, threads: int = 1,
                           envelope: float = None, target: float = 0.05,
                           envelope_safety: float = 1.15) -> ExperimentReport:
    """Sup residuals of the sign-flip identity and of the driver reconstruction.

    The pass envelope is calibrated on the fully reflected case (all signs
    positive), where the identity is exactly Tanaka's formula at the same
    (dt, eps), then transferred to the requested skewness function. The
    aspirational fixed target is reported alongside for reference; band
    counting statistics keep it out of reach at practical eps (the count
    fluctuates around the local time at scale sqrt(eps * L)).
    """
    calibration_seed = seed + 1
    stats: dict = {}
    if envelope is None:
        calib = _map_paths(
            n_paths, _identity_residual_worker(AlphaStep.constant(1.0), dt, eps, calibration_seed), threads
        )
        calib_arr = np.array(calib)
        q95 = np.quantile(calib_arr, 0.95, axis=0)
        envelope = float(envelope_safety * max(q95))
        stats["calibration_q95_identity"] = float(q95[0])
        stats["calibration_q95_sde"] = float(q95[1])

    rows = np.array(_map_paths(n_paths, _identity_residual_worker(alpha, dt, eps, seed), threads))
    frac_identity = float(np.mean(rows[:, 0] <= envelope))
    frac_sde = float(np.mean(rows[:, 1] <= envelope))
    stats.update({
        "residual_identity_median": float(np.median(rows[:, 0])),
        "residual_sde_median": float(np.median(rows[:, 1])),
        "residual_identity_q95": float(np.quantile(rows[:, 0], 0.95)),
        "residual_sde_q95": float(np.quantile(rows[:, 1], 0.95)),
        "fraction_identity_under_envelope": frac_identity,
        "fraction_sde_under_envelope": frac_sde,
        "fraction_identity_under_target": float(np.mean(rows[:, 0] <= target)),
        "fraction_sde_under_target": float(np.mean(rows[:, 1] <= target)),
    })
    return ExperimentReport(
        experiment="pathwise_identities",
        params={"n_paths": n_paths, "dt": dt, "eps": eps, "seed": seed,
                "calibration_seed": calibration_seed},
        thresholds={"envelope": float(envelope), "envelope_safety": envelope_safety,
                    "required_fraction": 0.95, "reference_target": target},
        stats=stats,
        passed=frac_identity >= 0.95 and frac_sde >= 0.95,
    )


def stability_experiment(alpha_seq: Sequence[AlphaLike], alpha_limit: AlphaLike,
                         n_paths: int = 2_000, dt: float = 1e-4, horizon: float = 1.0,
                         seed: int = 0, threads: int = 1) -> ExperimentReport:
    """Coupled squared sup distances of approximating solutions to the limit.

    Every approximant reuses the same Brownian path and the same per-excursion
    uniforms, so sign disagreement happens exactly when a uniform falls
    between the two skewness values.
    """
    alpha_seq = list(alpha_seq)
    if not alpha_seq:
        raise ValueError("need at least one approximating skewness function")
    grid = make_grid(0.0, horizon, dt)

    def worker(p: int):
        rng = RngSpec(seed, p)
        bm = simulate_bm(grid, rng)
        excursions = decompose_excursions(bm)
        uniforms = rng.generator("signs").random(len(excursions))
        magnitude = np.abs(bm.values)
        limit_vals = assign_signs(excursions, alpha_limit, uniforms).z.values * magnitude
        out = []
        for a in alpha_seq:
            vals = assign_signs(excursions, a, uniforms).z.values * magnitude
            out.append(float(np.max(np.abs(vals - limit_vals)) ** 2))
        return out

    rows = np.array(_map_paths(n_paths, worker, threads))
    d_means = rows.mean(axis=0)
    d_ses = rows.std(axis=0) / sqrt(n_paths)
    diffs = rows[:, :-1] - rows[:, 1:] if rows.shape[1] > 1 else np.empty((n_paths, 0))
    diff_means = diffs.mean(axis=0) if diffs.size else np.empty(0)
    diff_ses = diffs.std(axis=0) / sqrt(n_paths) if diffs.size else np.empty(0)
    nonincreasing = bool(np.all(diff_means >= -diff_ses)) if diffs.size else True
    if len(alpha_seq) == 1 or d_means[0] == 0.0:
        contraction = bool(d_means[-1] == d_means[0])
    else:
        contraction = bool(d_means[-1] < d_means[0] / 4.0)
    return ExperimentReport(
        experiment="stability",
        params={"n_paths": n_paths, "dt": dt, "horizon": horizon, "seed": seed,
                "n_terms": len(alpha_seq)},
        stats={"d": list(d_means), "d_se": list(d_ses),
               "step_decreases": list(diff_means), "step_decrease_se": list(diff_ses)},
        thresholds={"monotone_rule": "successive means nonincreasing within one "
                                     "paired standard error",
                    "contraction": "last mean below a quarter of the first"},
        passed=nonincreasing and contraction,
    )


def uniqueness_probe(alpha: AlphaLike, seed: int = 0, dt: float = 1e-4,
                     horizon: float = 1.0) -> ExperimentReport:
    """Identical inputs must reproduce the path bit for bit; changing only the
    sign stream must keep the magnitude while reshuffling signs."""
    grid = make_grid(0.0, horizon, dt)
    rng = RngSpec(seed, 0)
    bm = simulate_bm(grid, rng)
    x1, _ = construct_isbm(bm, alpha, rng)
    x2, _ = construct_isbm(bm, alpha, rng)
    identical = bool(np.array_equal(x1.values, x2.values))

    other = RngSpec(seed + 7919, 0)
    x3, sa3 = construct_isbm(bm, alpha, other)
    same_magnitude = bool(np.array_equal(np.abs(x1.values), np.abs(x3.values)))
    a_vals = np.asarray(alpha(decompose_excursions(bm).starts))
    degenerate = bool(np.all((a_vals == 0.0) | (a_vals == 1.0)))
    differs = bool(not np.array_equal(x1.values, x3.values))
    sign_behavior_ok = (not degenerate and differs) or (degenerate and not differs)
    return ExperimentReport(
        experiment="uniqueness_probe",
        params={"seed": seed, "dt": dt, "horizon": horizon},
        stats={"identical_rerun": identical, "same_magnitude": same_magnitude,
               "independent_signs_differ": differs, "degenerate_signs": degenerate},
        thresholds={"rule": "bitwise equality for identical inputs"},
        passed=identical and same_magnitude and sign_behavior_ok,
    )


SUITE_NAMES = ("reflection", "marginal", "moments", "martingale", "localtime",
               "identities", "uniqueness", "stability", "all")


def run_suite(name: str, alpha: AlphaStep, paths: int = None, dt: float = None,
              eps: float = None, seed: int = 0, threads: int = 1, t: float = None,
              s: float = None, x: float = 0.0, quad_tol: float = 1e-8,
              horizon: float = 1.0) -> list:
    """Run one named verification suite (or all of them) and collect reports."""
    if name not in SUITE_NAMES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITE_NAMES}")

    def pick(value, default):
        return default if value is None else value

    reports = []
    if name in ("reflection", "all"):
        reports.append(reflection_law_test(
            alpha, t=pick(t, 1.0), n_paths=pick(paths, 50_000), seed=seed,
            dt=pick(dt, 1e-4), threads=threads, x0=x))
    if name in ("marginal", "all"):
        reports.append(marginal_vs_kernel_test(
            alpha, t=pick(t, 1.0), x0=x, n_paths=pick(paths, 50_000), seed=seed,
            dt=pick(dt, 1e-4), threads=threads, quad_tol=quad_tol))
    if name in ("moments", "all"):
        reports.append(moment_scaling_test(
            alpha, t=pick(t, 0.25), n_paths=pick(paths, 50_000), seed=seed,
            dt=pick(dt, 2e-5), threads=threads))
    if name in ("martingale", "all"):
        reports.append(martingale_identity_test(
            alpha, s=pick(s, 0.3), t=pick(t, 1.0), n_paths=pick(paths, 20_000),
            seed=seed, dt=pick(dt, 1e-5), eps=pick(eps, 0.03), threads=threads,
            quad_tol=quad_tol))
    if name in ("localtime", "all"):
        reports.append(local_time_calibration_test(
            eps=pick(eps, 0.02), dt=pick(dt, 1e-5), n_paths=pick(paths, 2_000),
            t=pick(t, 1.0), seed=seed, threads=threads))
    if name in ("identities", "all"):
        reports.append(pathwise_identity_test(
            alpha, n_paths=pick(paths, 200), dt=pick(dt, 1e-5), eps=pick(eps, 0.03),
            seed=seed, threads=threads))
    if name in ("uniqueness", "all"):
        reports.append(uniqueness_probe(alpha, seed=seed, dt=pick(dt, 1e-4), horizon=horizon))
    if name in ("stability", "all"):
        seq = [discretize_alpha(alpha, n, horizon=horizon) for n in (2, 8, 32)]
        reports.append(stability_experiment(
            seq, alpha, n_paths=pick(paths, 2_000), dt=pick(dt, 1e-4),
            horizon=horizon, seed=seed, threads=threads))
    return reports

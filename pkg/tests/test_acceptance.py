"""Acceptance suite: one test per release criterion, each printing a verdict line.

Runs at full advertised scale; expect several minutes in total.
"""

import json
import sys

import numpy as np

from isbm.alpha import AlphaStep, discretize_alpha, parse_alpha_inline
from isbm.cli import main as cli_main
from isbm.kernel import (
    KernelQuery,
    chapman_kolmogorov_residual,
    constant_alpha_density,
    density_normalization,
    transition_density,
)
from isbm.verify import (
    local_time_calibration_test,
    marginal_vs_kernel_test,
    martingale_identity_test,
    moment_scaling_test,
    pathwise_identity_test,
    reflection_law_test,
    stability_experiment,
)

HALF_NORMAL_MEAN = np.sqrt(2 / np.pi)
STEP_91 = parse_alpha_inline("0:0.9,0.5:0.1")
STEP_4PIECE = parse_alpha_inline("0:0.8,0.25:0.3,0.5:0.6,0.75:0.2")


def verdict(number, label, passed, detail):
    line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}  {label}: {detail}"
    print(line, file=sys.stderr, flush=True)
    assert passed, line


def test_criterion_01_constant_alpha_kernel_reduction():
    worst = 0.0
    for a in (0.0, 0.25, 0.5, 0.75, 1.0):
        alpha = AlphaStep.constant(a)
        for x in (-1.0, 0.0, 1.0):
            for y in (-2.0, -1.0, 0.0, 1.0, 2.0):
                for tau in (0.25, 1.0, 4.0):
                    got = transition_density(KernelQuery(0.0, tau, x, y), alpha)
                    want = constant_alpha_density(tau, x, y, a)
                    worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    verdict(1, "constant-alpha kernel reduction", worst <= 1e-6,
            f"worst relative gap {worst:.2e} over 225 queries (tol 1e-6)")


def test_criterion_02_kernel_normalization():
    rng = np.random.default_rng(8802)
    worst_const, worst_step = 0.0, 0.0
    for _ in range(10):
        s = rng.uniform(0.0, 0.5)
        tau = rng.uniform(0.25, 2.0)
        x = rng.uniform(-1.5, 1.5)
        alpha = AlphaStep.constant(rng.uniform(0, 1))
        worst_const = max(worst_const, abs(density_normalization(s, s + tau, x, alpha) - 1.0))
    for _ in range(10):
        s = rng.uniform(0.0, 0.5)
        tau = rng.uniform(0.25, 2.0)
        x = rng.uniform(-1.5, 1.5)
        starts = np.concatenate([[0.0], np.sort(rng.uniform(0.01, s + tau, 15))])
        alpha = AlphaStep(starts, rng.uniform(0, 1, 16))
        worst_step = max(worst_step, abs(density_normalization(s, s + tau, x, alpha) - 1.0))
    passed = worst_const < 1e-6 and worst_step < 1e-5
    verdict(2, "kernel mass", passed,
            f"|mass-1| constant {worst_const:.2e} (tol 1e-6), 16-piece {worst_step:.2e} (tol 1e-5)")


def test_criterion_03_chapman_kolmogorov():
    rng = np.random.default_rng(8803)
    worst = 0.0
    for _ in range(10):
        s = rng.uniform(0.0, 0.3)
        r = s + rng.uniform(0.2, 0.5)
        t = r + rng.uniform(0.2, 0.5)
        x, y = rng.uniform(-1.0, 1.0, 2)
        starts = np.unique(np.concatenate([[0.0], np.sort(rng.uniform(0.01, t, 3)), [r]]))
        alpha = AlphaStep(starts, rng.uniform(0, 1, starts.size))
        worst = max(worst, chapman_kolmogorov_residual(s, r, t, x, y, alpha))
    verdict(3, "semigroup composition", worst < 1e-4,
            f"worst residual {worst:.2e} over 10 configurations with a breakpoint at r (tol 1e-4)")


def test_criterion_04_reflection_law():
    cases = [
        ("constant 1/2", AlphaStep.constant(0.5), 604),
        ("constant 0.7", AlphaStep.constant(0.7), 605),
        ("4-piece step", STEP_4PIECE, 606),
    ]
    results = []
    for label, alpha, seed in cases:
        rep = reflection_law_test(alpha, t=1.0, n_paths=50_000, dt=1e-4, seed=seed)
        results.append((label, rep.stats["ks"]))
    passed = all(ks < 0.01 for _, ks in results)
    detail = ", ".join(f"{label} KS={ks:.4f}" for label, ks in results)
    verdict(4, "reflected magnitude law", passed, detail + " (tol 0.01)")


def test_criterion_05_marginal_vs_kernel():
    cases = [
        ("constant 0.7", AlphaStep.constant(0.7), 505),
        ("step 0.9/0.1", STEP_91, 506),
    ]
    results = []
    for label, alpha, seed in cases:
        rep = marginal_vs_kernel_test(alpha, t=1.0, n_paths=50_000, dt=1e-4, seed=seed)
        results.append((label, rep.stats["ks"]))
    passed = all(ks < 0.012 for _, ks in results)
    detail = ", ".join(f"{label} KS={ks:.4f}" for label, ks in results)
    verdict(5, "sample law vs kernel quadrature", passed, detail + " (tol 0.012)")


def test_criterion_06_local_time_calibration():
    rep = local_time_calibration_test(eps=0.02, dt=1e-5, n_paths=2_000, t=1.0, seed=101)
    up, occ = rep.stats["mean_upcrossing"], rep.stats["mean_occupation"]
    agreement = rep.stats["agreement"]
    verdict(6, "local-time estimator calibration", rep.passed,
            f"count mean {up:.4f}, occupation mean {occ:.4f} "
            f"(target {HALF_NORMAL_MEAN:.4f} +/- 3%), agreement {agreement:.4f} (tol 0.05)")


def test_criterion_07_pathwise_identities():
    rep = pathwise_identity_test(STEP_91, n_paths=200, dt=1e-5, eps=0.03, seed=202)
    f1 = rep.stats["fraction_identity_under_envelope"]
    f2 = rep.stats["fraction_sde_under_envelope"]
    env = rep.thresholds["envelope"]
    t1 = rep.stats["fraction_identity_under_target"]
    verdict(7, "pathwise identities under calibrated envelope", rep.passed,
            f"fractions {f1:.3f}/{f2:.3f} >= 0.95 under the Tanaka-calibrated envelope "
            f"{env:.3f}; fixed 0.05 target would admit only {t1:.2f} "
            f"(band counts fluctuate at sqrt(eps*L) ~ 0.15)")


def test_criterion_08_fourth_moment_scaling():
    rep = moment_scaling_test(AlphaStep.constant(0.5), t=0.25, eps_grid=(1e-3, 1e-2, 1e-1),
                              n_paths=50_000, dt=2e-5, seed=303)
    slope = rep.stats["slope"]
    ratios = rep.stats["ratios"]
    passed = 1.9 <= slope <= 2.1 and all(abs(r - 3.0) <= 0.15 for r in ratios)
    verdict(8, "fourth-moment scaling", passed,
            f"log-log slope {slope:.3f} in [1.9, 2.1]; fair-coin ratios "
            + ", ".join(f"{r:.3f}" for r in ratios) + " within 3 +/- 0.15")


def test_criterion_09_martingale_identity():
    rep = martingale_identity_test(STEP_91, s=0.3, t=1.0, n_paths=20_000, dt=1e-5,
                                   eps=0.03, seed=404)
    qv = rep.stats["qv_mean"]
    n_bins = len(rep.stats["bins"])
    verdict(9, "conditional mean and compensated martingale", rep.passed,
            f"{n_bins} bins within 3 s.e.; quadratic variation {qv:.4f} in "
            f"[{0.95 * 0.7:.3f}, {1.05 * 0.7:.3f}]; "
            f"mean increment {rep.stats['increment_mean']:.4f} +/- {3 * rep.stats['increment_se']:.4f}")


def test_criterion_10_stability():
    seq = [discretize_alpha(lambda u: u, n) for n in (2, 8, 32)]
    rep = stability_experiment(seq, lambda u: u, n_paths=2_000, dt=1e-4, seed=707)
    d = rep.stats["d"]
    decreases = rep.stats["step_decreases"]
    ses = rep.stats["step_decrease_se"]
    strictly = all(dec > se for dec, se in zip(decreases, ses))
    contraction = d[-1] < d[0] / 4.0

    alpha = parse_alpha_inline("0:0.3,0.5:0.8")
    degenerate = stability_experiment([alpha, alpha, alpha], alpha, n_paths=200, dt=1e-3, seed=708)
    exact_zero = degenerate.stats["d"] == [0.0, 0.0, 0.0]

    passed = rep.passed and strictly and contraction and exact_zero
    verdict(10, "coupled stability", passed,
            f"D = {d[0]:.3f} > {d[1]:.3f} > {d[2]:.3f} beyond 1 s.e., "
            f"D_32 < D_2/4 = {d[0] / 4:.3f}; degenerate sequence exactly zero: {exact_zero}")


def test_criterion_11_determinism(tmp_path):
    base = ["simulate", "--alpha", "0:0.9,0.5:0.1", "--paths", "5",
            "--dt", "1e-3", "--seed", "42"]
    outs = []
    for name, extra in [("a.csv", []), ("b.csv", []), ("c.csv", ["--threads", "4"])]:
        out = tmp_path / name
        assert cli_main(base + ["--out", str(out)] + extra) == 0
        outs.append(out.read_bytes())
    csv_identical = outs[0] == outs[1] == outs[2]

    reports = []
    for name, threads in [("r1.json", "1"), ("r2.json", "3")]:
        report = tmp_path / name
        code = cli_main([
            "verify", "--suite", "stability", "--alpha", "0:0.3,0.4:0.8",
            "--paths", "300", "--dt", "1e-3", "--seed", "5",
            "--threads", threads, "--report", str(report),
        ])
        assert code == 0
        body = json.loads(report.read_text())
        reports.append(body["reports"])
    stats_identical = json.dumps(reports[0], sort_keys=True) == json.dumps(reports[1], sort_keys=True)

    verdict(11, "byte-level determinism", csv_identical and stats_identical,
            f"repeated and threaded CSV byte-identical: {csv_identical}; "
            f"experiment statistics thread-invariant: {stats_identical}")

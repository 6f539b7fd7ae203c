"""Acceptance gate: ten end-to-end checks, one printed verdict line each.

Each test prints ``acceptance NN PASS/FAIL <label>`` before asserting, so
a scan of the captured output gives the full scorecard at a glance.
"""

import itertools
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_rank_matrix
from rankscan import (
    ExperimentConfig,
    PermPlan,
    SamplerSpec,
    TailConfig,
    benchmark_pair,
    critical_value,
    derive_seed,
    null_moments,
    null_z_draws,
    rank_matrix_from_data,
    run_convergence_study,
    run_power_study,
    sample_sequence,
    skewness_table,
    t_statistic,
    z_stats,
)


def _verdict(num, ok, label):
    line = f"acceptance {num:02d} {'PASS' if ok else 'FAIL'} {label}"
    print(line)
    assert ok, line


def _rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-15)


def test_01_null_moments_match_full_enumeration():
    """Closed-form permutation-null moments vs brute enumeration, n = 4..7."""
    worst = 0.0
    for n in range(4, 8):
        perms = np.array(list(itertools.permutations(range(n))))
        for seed in range(20):
            r = random_rank_matrix(n, seed=derive_seed(101, n, seed),
                                   d=3, k=max(1, n - 2))
            # permuted matrices for every ordering, then running block
            # sums give the within/outside statistics for all prefix
            # windows at once
            p = r.matrix[perms[:, :, None], perms[:, None, :]]
            lead = p.cumsum(axis=1).cumsum(axis=2)
            trail = p[:, ::-1, ::-1].cumsum(axis=1).cumsum(axis=2)
            for t in range(2, n - 1):
                within = lead[:, t - 1, t - 1]
                outside = trail[:, n - t - 1, n - t - 1]
                mom = null_moments(r, 0, t)
                worst = max(
                    worst,
                    _rel_err(within.mean(), mom.mean_within),
                    _rel_err(outside.mean(), mom.mean_outside),
                    _rel_err(within.var(), mom.var_within),
                    _rel_err(outside.var(), mom.var_outside),
                    _rel_err(((within - within.mean())
                              * (outside - outside.mean())).mean(),
                             mom.cov),
                )
    # shifted window: moments depend on the window only through length
    r = random_rank_matrix(6, seed=derive_seed(101, 0), d=3, k=4)
    perms = np.array(list(itertools.permutations(range(6))))
    rows_in = perms[:, 2:5]
    rows_out = np.concatenate([perms[:, :2], perms[:, 5:]], axis=1)
    within = r.matrix[rows_in[:, :, None], rows_in[:, None, :]].sum((1, 2))
    outside = r.matrix[rows_out[:, :, None], rows_out[:, None, :]].sum((1, 2))
    mom = null_moments(r, 2, 5)
    worst = max(worst, _rel_err(within.mean(), mom.mean_within),
                _rel_err(outside.var(), mom.var_outside))
    _verdict(1, worst < 1e-10,
             f"exact null moments match enumeration for n=4..7 "
             f"(worst rel err {worst:.2e})")


def test_02_quadratic_statistic_identity():
    """T equals the sum of the two squared standardized components."""
    rng = np.random.default_rng(202)
    worst = 0.0
    pairs = 0
    for m in range(200):
        r = random_rank_matrix(30, seed=derive_seed(202, m), d=4)
        for _ in range(5):
            length = int(rng.integers(2, 29))
            t1 = int(rng.integers(0, 30 - length + 1))
            z = z_stats(r, t1, t1 + length)
            t_val = t_statistic(r, t1, t1 + length)
            worst = max(worst, abs(t_val - (z.weighted ** 2 + z.diff ** 2)))
            pairs += 1
    _verdict(2, pairs == 1000 and worst <= 1e-8,
             f"T = Z_w^2 + Z_diff^2 over {pairs} (matrix, window) pairs "
             f"(worst abs err {worst:.2e})")


def test_03_quadratic_critical_values():
    """Analytic T critical values at alpha=0.05, n=1000, four windows."""
    targets = {100: 13.10, 75: 13.38, 50: 13.70, 25: 14.11}
    got, ok = {}, True
    for n0, want in targets.items():
        cfg = TailConfig(n=1000, statistic="T", window=(n0, 1000 - n0))
        got[n0] = critical_value(cfg, 0.05)
        ok = ok and abs(got[n0] - want) <= 0.02
    shown = ", ".join(f"n0={k}: {v:.3f}" for k, v in got.items())
    _verdict(3, ok, f"T critical values within 0.02 ({shown})")


def test_04_max_statistic_critical_values():
    """Analytic M critical values at alpha=0.05, n=1000, four windows."""
    targets = {100: 3.23, 75: 3.27, 50: 3.32, 25: 3.38}
    got, ok = {}, True
    for n0, want in targets.items():
        cfg = TailConfig(n=1000, statistic="M", window=(n0, 1000 - n0))
        got[n0] = critical_value(cfg, 0.05)
        ok = ok and abs(got[n0] - want) <= 0.01
    shown = ", ".join(f"n0={k}: {v:.3f}" for k, v in got.items())
    _verdict(4, ok, f"M critical values within 0.01 ({shown})")


def test_05_skewness_corrected_critical_value():
    """Corrected M critical value for an AR(1) Gaussian null sequence."""
    spec = SamplerSpec("gaussian", d=100, sigma=("ar1", 0.6))
    x = sample_sequence(spec, spec, 1000, 1000, seed=derive_seed(42, 0, 0))
    r = rank_matrix_from_data(x, k=5)
    table = skewness_table(r, (100, 900), n_perm=50000,
                           seed=derive_seed(42, 0, 1))
    cfg = TailConfig(n=1000, statistic="M", window=(100, 900), skewness=True)
    got = critical_value(cfg, 0.05, table)
    _verdict(5, abs(got - 3.28) <= 0.08,
             f"skewness-corrected M critical value {got:.3f} "
             f"within 0.08 of 3.28")


def test_06_process_correlations():
    """Empirical correlations of the standardized processes at two times
    match the limiting closed forms; the two processes are uncorrelated."""
    n = 500
    r = random_rank_matrix(n, seed=606, d=10, k=13)
    pairs = ((0.2, 0.4), (0.3, 0.7), (0.5, 0.8))
    ts = sorted({int(np.floor(n * u)) for uv in pairs for u in uv})
    plan = PermPlan(n_perm=2000, seed=607)
    z_w, z_d = null_z_draws(r, ts, plan)
    col = {t: i for i, t in enumerate(ts)}
    worst = 0.0
    worst_cross = 0.0
    for u, v in pairs:
        iu, iv = col[int(np.floor(n * u))], col[int(np.floor(n * v))]
        lo, hi = min(u, v), max(u, v)
        want_w = (lo * (1 - hi)) / (hi * (1 - lo))
        want_d = (lo * (1 - hi)) / np.sqrt(lo * (1 - lo) * hi * (1 - hi))
        got_w = np.corrcoef(z_w[:, iu], z_w[:, iv])[0, 1]
        got_d = np.corrcoef(z_d[:, iu], z_d[:, iv])[0, 1]
        worst = max(worst, abs(got_w - want_w), abs(got_d - want_d))
        cross = np.corrcoef(z_w[:, iu], z_d[:, iv])[0, 1]
        worst_cross = max(worst_cross, abs(cross))
    _verdict(6, worst <= 0.05 and worst_cross <= 0.05,
             f"process correlations match closed forms within 0.05 "
             f"(worst dev {worst:.3f}, cross {worst_cross:.3f})")


def test_07_null_size_control():
    """Permutation test rejects about 5% of pure-noise sequences."""
    pre = SamplerSpec("gaussian", d=10)
    cfg = ExperimentConfig(n=100, tau=100, replicates=200, seed=707)
    res = run_power_study(pre, pre, cfg)
    _verdict(7, 0.01 <= res.power <= 0.10,
             f"null rejection fraction {res.power:.3f} in [0.01, 0.10] "
             f"over {res.replicates} replicates")


def test_08_power_spot_checks():
    """Detection power for two location-change benchmarks at d = 200."""
    heavy = run_power_study(*benchmark_pair("cauchy", "location", d=200),
                            ExperimentConfig(replicates=100, seed=808))
    light = run_power_study(*benchmark_pair("gaussian", "location", d=200),
                            ExperimentConfig(replicates=100, seed=809))
    ok = heavy.power >= 0.90 and 0.55 <= light.power <= 0.90
    _verdict(8, ok,
             f"power spot checks (cauchy location {heavy.power:.2f} >= 0.90, "
             f"gaussian location {light.power:.2f} in [0.55, 0.90])")


def test_09_localization_consistency():
    """The rescaled change-point estimate concentrates at the true one."""
    pre = SamplerSpec("cauchy", d=500)
    post = SamplerSpec("cauchy", d=500, mu=2.0)
    curves = run_convergence_study(pre, post, n_values=(800,), omega=0.5,
                                   sequences=10, seed=909)
    hits = sum(abs(c.tau_hat_m / c.n - 0.5) <= 0.05 for c in curves)
    _verdict(9, hits >= 9,
             f"tau_hat/n within 0.05 of 0.5 in {hits}/10 runs (n=800)")


def test_10_cli_determinism(tmp_path):
    """Two executions of the same command produce byte-identical reports."""
    rng = np.random.default_rng(1010)
    x = rng.normal(size=(40, 3))
    x[25:] += 4.0
    path = tmp_path / "series.csv"
    np.savetxt(path, x, delimiter=",")

    def run(argv):
        proc = subprocess.run([sys.executable, "-m", "rankscan.cli", *argv],
                              capture_output=True, timeout=300)
        assert proc.returncode == 0, proc.stderr.decode()
        return proc.stdout

    ok = True
    for argv in (
        ["--input", str(path), "--seed", "5"],
        ["--input", str(path), "--stat", "t", "--alternative", "interval",
         "--seed", "5"],
        ["--input", str(path), "--alternative", "segment", "--perms", "200",
         "--min-segment", "12", "--seed", "5"],
    ):
        first, second = run(argv), run(argv)
        ok = ok and first == second and first.startswith(b"rankscan report")
    _verdict(10, ok, "CLI reports are byte-identical across executions")

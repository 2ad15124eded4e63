"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``.  The summary lines are
printed with output capture disabled so they appear in the log.
"""

import json
import math
import time

import numpy as np
import pytest

from dikin import diagnostics as diag
from dikin.barriers import LOG, LS, MetricKind, evaluate_metric
from dikin.cli import main as cli_main
from dikin.estimators import (
    LogDetEstimatorSpec,
    det_ratio_estimate,
    logdet_sample,
)
from dikin.polytope import analytic_center, cube, random_polytope
from dikin.walk import (
    METROPOLIS,
    SMOOTH,
    WalkConfig,
    filter_probability,
    make_rng,
    run_chain,
)


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail, seconds):
        tag = "PASS" if passed else "FAIL"
        with capsys.disabled():
            print(f"\n[{tag}] criterion {number:>2}: {title} | {detail} "
                  f"| {seconds:.1f}s")
    return emit


def _random_instances(count, max_m, max_n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(2, max_n + 1))
        m = int(rng.integers(n + 1, max_m + 1))
        out.append(random_polytope(m, n, seed=seed * 1000 + i))
    return out


def test_01_log_barrier_strong_self_concordance(report):
    t0 = time.perf_counter()
    worst = 0.0
    for k, P in enumerate(_random_instances(20, 40, 8, seed=1)):
        rep = diag.check_strong_self_concordance(P, LOG, 10, make_rng(1, k))
        worst = max(worst, rep.max_ratio)
    dt = time.perf_counter() - t0
    ok = worst <= 2.0 + 1e-6 and dt < 10
    report(1, "log-barrier SSC", ok, f"max_ratio={worst:.9f} (<= 2+1e-6)", dt)
    assert worst <= 2.0 + 1e-6
    assert dt < 10


def test_02_ls_strong_self_concordance(report):
    t0 = time.perf_counter()
    worst = 0.0
    for k, P in enumerate(_random_instances(20, 30, 6, seed=2)):
        rep = diag.check_strong_self_concordance(P, LS, 10, make_rng(2, k))
        worst = max(worst, rep.max_ratio)
    dt = time.perf_counter() - t0
    ok = worst <= 2.0 * (1 + 1e-3) and dt < 60
    report(2, "LS SSC (finite differences)", ok,
           f"max_ratio={worst:.6f} (<= 2.002)", dt)
    assert worst <= 2.0 * (1 + 1e-3)
    assert dt < 60


def test_03_global_sandwich(report):
    t0 = time.perf_counter()
    counts = {}
    for barrier in (LOG, LS):
        eig = frob = corrected = 0
        for k, P in enumerate(_random_instances(10, 30, 6, seed=3)):
            rep = diag.check_global_sandwich(P, barrier, 20, make_rng(3, k))
            eig += rep.eig_violations
            frob += rep.frob_violations
            corrected += rep.frob_corrected_violations
        counts[barrier] = (eig, frob, corrected)
    dt = time.perf_counter() - t0
    ok = all(e == 0 and f == 0 for e, f, _ in counts.values()) and dt < 60
    detail = "; ".join(
        f"{b}: eig_viol={e}/200 frob_viol={f}/200 "
        f"(vs (1-t)^-2-1: {c}/200)" for b, (e, f, c) in counts.items())
    report(3, "global sandwich (spectral + Frobenius)", ok, detail, dt)
    for barrier, (eig, frob, _) in counts.items():
        assert eig == 0, barrier
        assert frob == 0, barrier
    assert dt < 60


def test_04_ls_symmetry(report):
    t0 = time.perf_counter()
    bodies = [cube(3)] + _random_instances(5, 30, 6, seed=4)
    rows = []
    for k, P in enumerate(bodies):
        rep = diag.estimate_symmetry(P, LS, 50, 200, make_rng(4, k))
        rows.append((P.name, rep.inner_violations, rep.nu_bar_emp,
                     rep.theoretical_bound))
    dt = time.perf_counter() - t0
    ok = all(v == 0 and nu <= b for _, v, nu, b in rows) and dt < 120
    detail = ", ".join(f"{name}: inner={v} nu={nu:.0f}<={b:.0f}"
                       for name, v, nu, b in rows)
    report(4, "LS symmetry", ok, detail, dt)
    for _, v, nu, b in rows:
        assert v == 0
        assert nu <= b
    assert dt < 120


def test_05_acceptance_constant(report):
    t0 = time.perf_counter()
    P = cube(3)
    x0 = analytic_center(P)
    exact = run_chain(P, x0, WalkConfig(steps=10_000, seed=5))
    frac = diag.acceptance_statistics(exact).fraction_above_threshold
    smooth = run_chain(P, x0, WalkConfig(steps=10_000, seed=5, filter=SMOOTH))
    mean = diag.acceptance_statistics(smooth).mean_filter_value
    dt = time.perf_counter() - t0
    ok = frac >= 0.99 and mean >= 0.498 and dt < 30
    report(5, "acceptance constant r=1/512", ok,
           f"frac(p>=0.9922)={frac:.4f}, smooth mean={mean:.5f}", dt)
    assert frac >= 0.99
    assert mean >= 0.498
    assert dt < 30


def test_06_uniformity_cube3(report):
    t0 = time.perf_counter()
    P = cube(3)
    config = WalkConfig(radius=0.8, steps=20_000, thin=10, seed=6,
                        record_filter=False)
    trace = run_chain(P, analytic_center(P), config)
    rep = diag.uniformity_tests(trace, P, cells_per_axis=4)
    dt = time.perf_counter() - t0
    means_ok = all(0.48 <= v <= 0.52 for v in rep.means)
    ok = means_ok and rep.chi2_pvalue_adjusted > 1e-3 and dt < 120
    report(6, "uniformity on cube(3), r=0.8", ok,
           f"means={np.round(rep.means, 4).tolist()}, chi2 p(adjusted, "
           f"inflation {rep.chi2_inflation:.2f})={rep.chi2_pvalue_adjusted:.3g}"
           f", raw iid p={rep.chi2_pvalue:.2g}, ESS={rep.ess:.0f}", dt)
    assert means_ok
    assert rep.chi2_pvalue_adjusted > 1e-3
    assert dt < 120


def test_07_estimator_unbiasedness(report):
    t0 = time.perf_counter()
    rng = make_rng(7)
    z_scores = []
    for _ in range(20):
        m, n = int(rng.integers(4, 10)), int(rng.integers(2, 4))
        A = rng.standard_normal((m, n))
        W = rng.uniform(0.5, 2.0, m)
        spec = LogDetEstimatorSpec.from_arrays(A, W)
        draws = logdet_sample(spec, rng, size=100_000)
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        z_scores.append(abs(draws.mean() - spec.exact()) / se)
    P = cube(2)
    x = analytic_center(P)
    rel = []
    for _ in range(10):
        d = rng.standard_normal(2)
        ev = evaluate_metric(P, x, LOG)
        y = x + (d / np.linalg.norm(ev.chol.T @ d)) / 512.0
        exact = math.exp(0.5 * (ev.logdet - evaluate_metric(P, y, LOG).logdet))
        est = det_ratio_estimate(P, x, y, 100_000, rng)
        rel.append(abs(est.value - exact) / exact)
    dt = time.perf_counter() - t0
    ok = max(z_scores) <= 3 and max(rel) <= 0.02 and dt < 120
    report(7, "estimator unbiasedness", ok,
           f"max |z| logdet={max(z_scores):.2f} (<=3), "
           f"max rel err det ratio={max(rel):.4f} (<=0.02)", dt)
    assert max(z_scores) <= 3
    assert max(rel) <= 0.02
    assert dt < 120


def _discrete_walk(filter_kind, steps, rng):
    """Dikin-like walk on 5 cells with state-dependent proposal widths.

    Cell ``i`` proposes uniformly from ``i - w_i, ..., i + w_i``; targets
    outside the grid are rejected, and the reverse move exists only if
    ``|i - j| <= w_j``.  The filter sees ``rho = q(j -> i) / q(i -> j)``.
    """
    widths = np.array([1, 2, 3, 2, 1])
    counts = np.zeros((5, 5))
    i = 0
    offsets = rng.random(steps)
    coins = rng.random(steps)
    for t in range(steps):
        w = widths[i]
        j = i - w + int(offsets[t] * (2 * w + 1))
        if 0 <= j < 5 and abs(i - j) <= widths[j]:
            rho = (2 * w + 1) / (2 * widths[j] + 1)
            if coins[t] < filter_probability(rho, filter_kind):
                counts[i, j] += 1
                i = j
                continue
        counts[i, i] += 1
    return counts


def test_08_smooth_filter_correctness(report):
    t0 = time.perf_counter()
    rng = make_rng(8)
    rhos = np.exp(rng.uniform(-5, 5, 100))
    gaps = [abs(filter_probability(r, SMOOTH) * 1.0
                - filter_probability(1.0 / r, SMOOTH) * r) for r in rhos]
    counts = _discrete_walk(SMOOTH, 1_000_000, rng)
    K = counts / counts.sum(axis=1, keepdims=True)
    vals, vecs = np.linalg.eig(K.T)
    pi = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    pi /= pi.sum()
    tv = 0.5 * np.abs(pi - 0.2).sum()
    dt = time.perf_counter() - t0
    ok = max(gaps) <= 1e-12 and tv <= 0.02 and dt < 60
    report(8, "smooth filter detailed balance", ok,
           f"max identity gap={max(gaps):.2e}, 5-state TV={tv:.4f}", dt)
    assert max(gaps) <= 1e-12
    assert tv <= 0.02
    assert dt < 60


def test_09_logdet_convexity(report):
    t0 = time.perf_counter()
    found = {}
    for barrier in (LOG, LS):
        bad = 0
        worst = -np.inf
        for k, P in enumerate(_random_instances(10, 30, 6, seed=9)):
            rep = diag.check_logdet_convexity(P, barrier, 20, make_rng(9, k))
            bad += rep.violations
            worst = max(worst, rep.max_excess)
        found[barrier] = (bad, worst)
    dt = time.perf_counter() - t0
    ok = all(b == 0 for b, _ in found.values()) and dt < 30
    report(9, "log-det midpoint convexity", ok,
           ", ".join(f"{k}: violations={b}/200 max_excess={w:.3g}"
                     for k, (b, w) in found.items()), dt)
    for bad, _ in found.values():
        assert bad == 0
    assert dt < 30


def test_10_nu_bar_scaling(report):
    t0 = time.perf_counter()
    ks = [0, 8, 24]  # m = 8, 16, 32 with n = 4
    log_sweep = diag.nu_bar_sweep(4, ks, LOG, 50, 200, seed=10)
    ls_sweep = diag.nu_bar_sweep(4, ks, LS, 50, 200, seed=10)
    log_growth = log_sweep[-1][1] / log_sweep[0][1]
    ls_growth = ls_sweep[-1][1] / ls_sweep[0][1]
    scale = [MetricKind(LS, 2 * (1 + math.log(m))).scale for m, _ in ls_sweep]
    ls_unscaled = (ls_sweep[-1][1] / scale[-1]) / (ls_sweep[0][1] / scale[0])
    dt = time.perf_counter() - t0
    ok = log_growth >= 2.5 and ls_growth <= 2.0 and dt < 120
    report(10, "nu-bar scaling contrast on cube_dup(4,k)", ok,
           f"log growth={log_growth:.2f} (>=2.5), LS growth={ls_growth:.2f} "
           f"(<=2; without the (1+q^2)(1+q) factor {ls_unscaled:.2f})", dt)
    assert log_growth >= 2.5
    assert ls_growth <= 2.0
    assert dt < 120


def test_11_manifest_replay(report, tmp_path, monkeypatch, capsys):
    t0 = time.perf_counter()
    monkeypatch.chdir(tmp_path)
    runs = [
        ["sample", "cube(3)", "--steps", "500", "--seed", "11",
         "--out", "s.jsonl"],
        ["sample", "cube(3)", "--barrier", "ls", "--steps", "50",
         "--chains", "2", "--format", "csv", "--out", "l.csv"],
        ["check", "cube(3)", "--suite", "ssc", "--trials", "20",
         "--manifest", "c.json"],
        ["estimate-det", "--polytope", "cube(2)", "--x", "0.5,0.5",
         "--y", "0.501,0.5", "--draws", "2000", "--manifest", "e.json"],
    ]
    manifests = ["s.jsonl.manifest.json", "l.csv.manifest.json", "c.json",
                 "e.json"]
    identical = []
    for argv, manifest in zip(runs, manifests):
        assert cli_main(argv) == 0
        capsys.readouterr()
        code = cli_main(["replay", manifest])
        out = json.loads(capsys.readouterr().out)
        identical.append(code == 0 and out["identical"])
    dt = time.perf_counter() - t0
    ok = all(identical)
    report(11, "manifest replay is bit-identical", ok,
           f"{sum(identical)}/{len(identical)} manifests identical", dt)
    assert ok

"""Acceptance gate: criteria 1-7.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line with its measured
numbers and runtime, then asserts the criterion at its stated tolerance.
"""

import math
import time
from dataclasses import replace

import numpy as np
from scipy import stats

from finitedecoy import stats_bounds as sb
from finitedecoy.channel_sim import ChannelModel, sample_counts
from finitedecoy.estimation import ProtocolParams, compare_existing, pipeline
from finitedecoy.keyrate import RateSetup, sweep
from finitedecoy.photon_source import Fixed, Gaussian, moments

from oracles import quad_moment, straight_line_sacrifice

CHERNOFF = (sb.BoundMethod.CHERNOFF_KL, sb.BoundMethod.CHERNOFF_PINSKER,
            sb.BoundMethod.CHERNOFF_INFO_GEO)


def _verdict(report, n, ok, detail):
    report(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")


# --- 1. bound dominance, exhaustive ------------------------------------------------------


def test_criterion1_dominance_exhaustive(report):
    t0 = time.perf_counter()
    ns = np.arange(1, 501)
    ps = np.round(np.arange(1, 20) * 0.05, 2)
    alphas = (0.1, 0.01, 0.001)
    checked = violations = 0
    for alpha in alphas:
        for p in ps:
            ex_lo, ex_hi = sb.percent_points_batch(ns, p, alpha, "exact")
            for m in CHERNOFF:
                lo, hi = sb.percent_points_batch(ns, p, alpha, m)
                ok_lo, ok_hi = ~np.isnan(lo), ~np.isnan(hi)
                violations += int(np.sum(lo[ok_lo] > ex_lo[ok_lo]))
                violations += int(np.sum(hi[ok_hi] < ex_hi[ok_hi]))
                checked += int(ok_lo.sum() + ok_hi.sum())
        for n in ns:
            ex_lo, ex_hi = sb.interval_limits_all(int(n), alpha, "exact")
            for m in CHERNOFF:
                lo, hi = sb.interval_limits_all(int(n), alpha, m)
                ok_lo, ok_hi = ~np.isnan(lo), ~np.isnan(hi)
                violations += int(np.sum(lo[ok_lo] > ex_lo[ok_lo]))
                violations += int(np.sum(hi[ok_hi] < ex_hi[ok_hi]))
                checked += int(ok_lo.sum() + ok_hi.sum())
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60.0
    _verdict(report, 1, ok, f"{violations} violations in {checked} comparisons, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 60.0


# --- 2. exact interval coverage, exhaustive small N -----------------------------------------


def test_criterion2_exact_interval_coverage(report):
    t0 = time.perf_counter()
    ps = np.linspace(0.05, 0.95, 10)
    alphas = np.geomspace(1e-3, 0.3, 10)
    worst = 0.0
    violations = cases = 0
    for n in range(1, 61):
        ks = np.arange(n + 1)
        for alpha in alphas:
            lo, hi = sb.interval_limits_all(n, float(alpha), "exact")
            for p in ps:
                pmf = stats.binom.pmf(ks, n, p)
                for miss in (pmf[lo > p].sum(), pmf[hi < p].sum()):
                    cases += 1
                    worst = max(worst, miss / alpha)
                    violations += int(miss > alpha)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 10.0
    _verdict(report, 2, ok, f"{violations} violations in {cases} one-sided cases, "
                            f"max miss/alpha {worst:.3f}, {elapsed:.1f} s")
    assert violations == 0
    assert elapsed < 10.0


# --- 3. percent-point coverage, Monte Carlo ---------------------------------------------------


def test_criterion3_percent_point_monte_carlo(report):
    t0 = time.perf_counter()
    n, p, alpha, reps = 10**4, 5e-4, 1e-3, 10**6
    draws = np.random.default_rng(20240611).binomial(n, p, size=reps)
    se = math.sqrt(alpha * (1.0 - alpha) / reps)
    limit = alpha + 3.0 * se
    model = sb.BinomialModel(n, p)
    freqs = {}
    for m in ("exact", "chernoff-kl"):
        lo = sb.percent_point_lower(model, alpha, m)
        hi = sb.percent_point_upper(model, alpha, m)
        freqs[f"{m} lower"] = float(np.mean(draws < lo))
        freqs[f"{m} upper"] = float(np.mean(draws > hi))
    elapsed = time.perf_counter() - t0
    ok = all(f <= limit for f in freqs.values()) and elapsed < 120.0
    detail = ", ".join(f"{k} {v:.2e}" for k, v in freqs.items())
    _verdict(report, 3, ok, f"{detail} (limit {limit:.3e}), {elapsed:.1f} s")
    assert all(f <= limit for f in freqs.values()), freqs
    assert elapsed < 120.0


# --- 4. Gaussian moments -----------------------------------------------------------------------


def test_criterion4_gaussian_moments(report):
    t0 = time.perf_counter()
    means = np.linspace(0.01, 1.0, 25)
    ts = np.linspace(0.0, 0.3, 13)[1:]
    worst = 0.0
    for mean in means:
        for t in ts:
            m = moments(Gaussian(float(mean), float(t)))
            for k, got in enumerate((m.m0, m.m1, m.m2)):
                want = quad_moment(float(mean), float(t), k)
                worst = max(worst, abs(got - want) / abs(want))
    # t = 0 reduces to the Poisson weights
    ulps = 0.0
    for mean in means:
        mean = float(mean)
        m = moments(Gaussian(mean, 0.0))
        e = math.exp(-mean)
        for got, want in zip((m.m0, m.m1, m.m2), (e, mean * e, mean * mean * e)):
            ulps = max(ulps, abs(got - want) / math.ulp(want))
        near = moments(Gaussian(mean, 1e-9))
        for got, want in zip((near.m0, near.m1, near.m2), (e, mean * e, mean * mean * e)):
            ulps = max(ulps, abs(got - want) / math.ulp(want) / 8.0)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and ulps <= 1.0 and elapsed < 10.0
    _verdict(report, 4, ok, f"max rel err {worst:.2e}, t=0 deviation {ulps:.1f} ulp, {elapsed:.1f} s")
    assert worst <= 1e-10
    assert ulps <= 1.0
    assert elapsed < 10.0


# --- 5. pipeline ordering properties -------------------------------------------------------------


def _random_input(rng, seed):
    alpha = 10 ** rng.uniform(-3.5, -1.0)
    p0 = rng.uniform(0.0, 1e-5)
    s = rng.uniform(0.0, 0.1)
    mu1 = rng.uniform(0.05, 0.25)
    mu2 = rng.uniform(0.3, 0.9)
    N = int(10 ** rng.uniform(5.0, 9.0))
    beta = int(rng.integers(10, 81))
    law1, law2 = Fixed(mu1), Fixed(mu2)
    p = ProtocolParams(beta=beta, law1=law1, law2=law2, N0=N, N1=N, N2=N, Ns=10 * N)
    return p, sample_counts(ChannelModel(alpha, p0, s, law1, law2), p, seed)


def test_criterion5_pipeline_ordering(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    bad = {"S order": 0, "existing": 0, "abort": 0}
    kept = 0
    for i in range(10**4):
        p, c = _random_input(rng, i)
        imp = pipeline(p, c, variant="improved")
        non = pipeline(p, c, variant="non-improved")
        bad["S order"] += imp.S > non.S
        for r in (imp, non):
            failed = not all(x.passed for x in r.conditions.values())
            bad["abort"] += r.aborted != failed or (r.aborted and r.S != c.Ms)
        if not imp.aborted:
            kept += 1
            cmp = compare_existing(p, c, variant="improved")
            bad["existing"] += cmp.phi_existing < cmp.phi_proposed
    elapsed = time.perf_counter() - t0
    total = sum(bad.values())
    ok = total == 0 and elapsed < 300.0
    detail = ", ".join(f"{k} {v}" for k, v in bad.items())
    _verdict(report, 5, ok, f"violations: {detail}; {kept} non-aborted inputs compared "
                            f"with the existing method, {elapsed:.1f} s")
    assert total == 0, bad
    assert kept >= 1000
    assert elapsed < 300.0


# --- 6. rate-curve shapes ----------------------------------------------------------------------


MU2_GRID = [round(0.2 + 0.05 * i, 2) for i in range(15)]
MS_GRID = [10**6, 2 * 10**6, 3 * 10**6, 5 * 10**6, 10**7, 10**8]


def test_criterion6_rate_curve_shapes(report):
    t0 = time.perf_counter()
    base = RateSetup(method="chernoff-kl")
    checks = {}

    (ref,) = sweep({"mu2": [0.5]}, base)
    checks["a"] = ref.R > 0.0

    pts = sweep({"mu2": MU2_GRID, "Ms": MS_GRID}, base)
    curves = {m: [q.R for q in pts if q.mu2 == m] for m in MU2_GRID}
    checks["b"] = all(all(x <= y for x, y in zip(r, r[1:])) for r in curves.values())

    best = {mu1: max(q.R for q in sweep({"mu2": MU2_GRID}, replace(base, mu1=mu1)))
            for mu1 in (0.01, 0.1, 0.25)}
    checks["c"] = best[0.1] > best[0.01] and best[0.1] > best[0.25]

    order = sign = True
    for ms in (10**6, 10**7):
        rates = {t: [q.R for q in sweep({"mu2": MU2_GRID}, replace(base, t=t, Ms=ms))]
                 for t in (0.0, 0.1, 0.3)}
        order &= all(a >= b >= c for a, b, c in zip(rates[0.0], rates[0.1], rates[0.3]))
        top = int(np.argmax(rates[0.0]))
        sign &= rates[0.0][top] <= 0.0 or rates[0.1][top] > 0.0
    checks["d"] = order and sign

    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 60.0
    detail = ", ".join(f"({k}) {'ok' if v else 'fail'}" for k, v in checks.items())
    _verdict(report, 6, ok, f"{detail}; R(mu2=0.5, Ms=1e7) = {ref.R:.3e}, "
                            f"max R at mu1 0.01/0.1/0.25 = "
                            f"{best[0.01]:.2e}/{best[0.1]:.2e}/{best[0.25]:.2e}, {elapsed:.1f} s")
    assert all(checks.values()), checks
    assert elapsed < 60.0


# --- 7. oracle equivalence -------------------------------------------------------------------------


def _oracle_batch(scale, variant, seed, refine_depth):
    rng = np.random.default_rng(seed)
    mismatches = aborted = 0
    for i in range(100):
        alpha = 10 ** rng.uniform(-3.3, -2.5)
        p0 = rng.uniform(0.0, 1e-6)
        s = rng.uniform(0.01, 0.05)
        mu1 = rng.uniform(0.05, 0.2)
        mu2 = rng.uniform(0.4, 0.8)
        N = int(scale * 10 ** rng.uniform(-0.3, 0.3))
        law1, law2 = Fixed(mu1), Fixed(mu2)
        p = ProtocolParams(beta=10, law1=law1, law2=law2, N0=N, N1=N, N2=N, Ns=10 * N)
        c = sample_counts(ChannelModel(alpha, p0, s, law1, law2), p, seed=i)
        res = pipeline(p, c, method="exact", variant=variant, refine_depth=refine_depth)
        want, want_abort = straight_line_sacrifice(
            mu1, mu2, 10, N, N, N, 10 * N, (c.Ms, c.M0, c.M1, c.M2, c.M3),
            improved=variant == "improved")
        mismatches += res.S != want or res.aborted != want_abort
        aborted += res.aborted
    return mismatches, aborted


def test_criterion7_oracle_equivalence(report):
    t0 = time.perf_counter()
    runs = {
        "1e7 improved": _oracle_batch(1e7, "improved", 7, 32),
        "1e7 non-improved": _oracle_batch(1e7, "non-improved", 8, 32),
        "1e4 improved": _oracle_batch(1e4, "improved", 9, 32),
    }
    elapsed = time.perf_counter() - t0
    mismatches = sum(m for m, _ in runs.values())
    live = {k: 100 - a for k, (_, a) in runs.items()}
    ok = mismatches == 0 and live["1e7 improved"] >= 50 and live["1e7 non-improved"] >= 50
    detail = "; ".join(f"N~{k}: {m} mismatches, {100 - a} non-aborted"
                       for k, (m, a) in runs.items())
    _verdict(report, 7, ok, f"{detail}; {elapsed:.1f} s")
    assert mismatches == 0, runs
    assert live["1e7 improved"] >= 50 and live["1e7 non-improved"] >= 50

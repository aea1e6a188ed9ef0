"""Acceptance suite: one test per exit criterion, each printing a
pass/fail line. Run with ``pytest tests/test_acceptance.py -v -s``.

Criteria marked by enumeration oracles recompute every reference value
from brute force (subset enumeration, dense pseudoinverses, transition
matrices) inside the test, independent of the library's fast paths.
"""

import math
import time

import numpy as np

from dppnystrom import (
    PsdMatrix,
    build_nystrom,
    elementary_symmetric,
    enumerate_cdpp,
    estimate_alpha,
    expected_error_bound,
    hp_error_bound,
    krr_bias_hp_bound,
    krr_risk_ratio_bound,
    lazy_transition_matrix,
    mixing_time_bound,
    nystrom_residual_trace,
    philox_stream,
    rbf_kernel,
    risk_decomposition,
    sample_cdpp_exact,
    standardize,
    synthetic_regression,
    tv_to_stationary,
)
from dppnystrom.cli import BenchConfig, cmd_approx, cmd_krr
from dppnystrom.linalg import chol_swap_update, cholesky_psd, logdet_submatrix
from dppnystrom.mixing import approximation_error_metrics, error_trace

from helpers import esp_bruteforce, nystrom_dense, random_psd


def report(name: str, ok: bool, detail: str = ""):
    print("\n[%s] %s %s" % ("PASS" if ok else "FAIL", name, detail))
    assert ok, "%s failed: %s" % (name, detail)


def test_a01_gibbs_stationarity_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(20):
        n = int(rng.integers(6, 11))
        c = int(rng.choice([2, 3]))
        K = PsdMatrix(random_psd(rng, n))
        states, P = lazy_transition_matrix(K, c)
        dist = enumerate_cdpp(K, c)
        pi = np.array([dist.probabilities[s] for s in states])
        worst = max(worst, float(np.abs(pi @ P - pi).max()))
    report(
        "A01 gibbs stationarity (pi P = pi, 20 instances)",
        worst <= 1e-10,
        "max error %.2e in %.1fs" % (worst, time.perf_counter() - t0),
    )


def test_a02_empirical_mixing_tv():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 3))
    K = PsdMatrix(rbf_kernel(X, None, math.sqrt(3.0)))
    tv = tv_to_stationary(K, 3, 20_000, replicas=100_000, rng=7)
    report(
        "A02 empirical mixing (N=10, c=3, 1e5 replicas, 2e4 steps)",
        tv <= 0.05,
        "TV %.4f in %.0fs" % (tv, time.perf_counter() - t0),
    )


def _enumerated_relative_errors(K: PsdMatrix, c: int, k: int):
    # det-weighted relative errors over every size-c subset, both norms,
    # with the approximation rebuilt densely per subset
    dist = enumerate_cdpp(K, c)
    w = np.clip(K.eigenvalues, 0.0, None)
    den_fro = math.sqrt(float(np.sum(w[k:] ** 2)))
    den_spec = float(w[k])
    rel = {}
    for S, p in dist.probabilities.items():
        resid = K.data - nystrom_dense(K.data, list(S))
        rel[S] = (
            p,
            np.linalg.norm(resid, "fro") / den_fro,
            float(np.abs(np.linalg.eigvalsh(resid)).max()) / den_spec,
        )
    return rel


def test_a03_expected_relative_error_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    n, c, k = 8, 4, 2
    violations = 0
    for trial in range(50):
        K = PsdMatrix(random_psd(rng, n))
        rel = _enumerated_relative_errors(K, c, k)
        mean_fro = sum(p * f for p, f, _ in rel.values())
        mean_spec = sum(p * s for p, _, s in rel.values())
        if mean_fro > expected_error_bound(K.eigenvalues, c, k, "frobenius") + 1e-9:
            violations += 1
        if mean_spec > expected_error_bound(K.eigenvalues, c, k, "spectral") + 1e-9:
            violations += 1
    report(
        "A03 expected relative-error bound (50 instances, both norms)",
        violations == 0,
        "%d violations in %.0fs" % (violations, time.perf_counter() - t0),
    )


def test_a04_esp_ratio_inequality_sweep():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    violations = 0
    min_slack = np.inf
    checked = 0
    for trial in range(1000):
        n = int(rng.integers(3, 13))
        kind = trial % 3
        if kind == 0:
            lam = rng.uniform(0.0, 5.0, n)
        elif kind == 1:
            lam = np.exp(rng.normal(0.0, 2.0, n))
        else:
            lam = rng.uniform(0.0, 1.0, n) ** 4
        table = elementary_symmetric(lam, min(n, 12))
        srt = np.sort(np.clip(lam, 0, None))[::-1]
        for c in range(1, n):
            lv_c = table.log_value(c)
            lhs = 0.0 if lv_c == -np.inf else table.ratio(c + 1, c)
            for k in range(1, c + 1):
                rhs = float(srt[k:].sum()) / (c + 1 - k)
                checked += 1
                slack = rhs - lhs
                min_slack = min(min_slack, slack)
                if lhs > rhs + 1e-12 * max(rhs, 1.0):
                    violations += 1
    report(
        "A04 char-poly ratio inequality (1000 spectra, all c >= k)",
        violations == 0,
        "%d checks, %d violations, min slack %.3e in %.0fs"
        % (checked, violations, min_slack, time.perf_counter() - t0),
    )


def _synthetic_krr_instance(rng, n):
    d = 3
    X = rng.standard_normal((n, d))
    K = PsdMatrix(rbf_kernel(X, None, math.sqrt(d)))
    freqs = rng.standard_normal((5, d))
    z = np.cos(X @ freqs.T) @ rng.standard_normal(5)
    return K, z


def test_a05_risk_ratio_bound_and_residual_trace_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    n, c = 8, 3
    s2 = 0.04
    ratio_violations = 0
    worst_identity = 0.0
    for trial in range(20):
        K, z = _synthetic_krr_instance(rng, n)
        dist = enumerate_cdpp(K, c)
        table = elementary_symmetric(K.eigenvalues, c + 1)
        # residual-trace expectation identity
        mean_nu = dist.expectation(lambda S: nystrom_residual_trace(K, list(S)))
        ref_nu = (c + 1) * table.ratio(c + 1, c)
        worst_identity = max(worst_identity, abs(mean_nu - ref_nu) / max(ref_nu, 1.0))
        for gamma in (0.01, 0.1, 1.0):
            base = risk_decomposition(K, z, s2, gamma).risk

            def root_ratio(S):
                Kt = nystrom_dense(K.data, list(S))
                return math.sqrt(risk_decomposition(Kt, z, s2, gamma).risk / base)

            if dist.expectation(root_ratio) > krr_risk_ratio_bound(K.eigenvalues, c, gamma) + 1e-9:
                ratio_violations += 1
    ok = ratio_violations == 0 and worst_identity <= 1e-8
    report(
        "A05 risk-ratio bound + residual-trace identity (20 instances x 3 gammas)",
        ok,
        "%d ratio violations, worst identity error %.2e in %.0fs"
        % (ratio_violations, worst_identity, time.perf_counter() - t0),
    )


def test_a06_high_probability_tails():
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    n = 8
    tail_violations = 0
    # relative-error tails at c=4, k=2
    for trial in range(10):
        K = PsdMatrix(random_psd(rng, n))
        rel = _enumerated_relative_errors(K, 4, 2)
        for delta in (0.1, 0.3):
            b_fro = hp_error_bound(K.eigenvalues, 4, 2, delta, "frobenius")
            b_spec = hp_error_bound(K.eigenvalues, 4, 2, delta, "spectral")
            p_fro = sum(p for p, f, _ in rel.values() if f > b_fro)
            p_spec = sum(p for p, _, s in rel.values() if s > b_spec)
            if p_fro > delta + 1e-12 or p_spec > delta + 1e-12:
                tail_violations += 1
    # root bias-ratio tails at c=3
    for trial in range(10):
        K, z = _synthetic_krr_instance(rng, n)
        dist = enumerate_cdpp(K, 3)
        for gamma in (0.1, 1.0):
            base_bias = risk_decomposition(K, z, 0.0, gamma).bias

            def root_bias_ratio(S):
                Kt = nystrom_dense(K.data, list(S))
                return math.sqrt(risk_decomposition(Kt, z, 0.0, gamma).bias / base_bias)

            for delta in (0.1, 0.3):
                bound = krr_bias_hp_bound(K.eigenvalues, 3, gamma, delta)
                mass = sum(
                    p for S, p in dist.probabilities.items() if root_bias_ratio(S) > bound
                )
                if mass > delta + 1e-12:
                    tail_violations += 1
    report(
        "A06 high-probability tail bounds (delta in {0.1, 0.3})",
        tail_violations == 0,
        "%d tail violations in %.0fs" % (tail_violations, time.perf_counter() - t0),
    )


def test_a07_esp_bruteforce_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(107)
    worst = 0.0
    for n in range(1, 11):
        for _ in range(3):
            lam = rng.uniform(0.0, 4.0, n)
            if n >= 4:
                lam[rng.integers(n)] = 0.0
            table = elementary_symmetric(lam, n)
            for c in range(n + 1):
                ref = esp_bruteforce(lam, c)
                got = table.value(c)
                if ref == 0.0:
                    worst = max(worst, abs(got))
                else:
                    worst = max(worst, abs(got - ref) / ref)
    report(
        "A07 elementary-symmetric recurrence vs subset enumeration (N <= 10)",
        worst <= 1e-10,
        "max relative error %.2e in %.1fs" % (worst, time.perf_counter() - t0),
    )


def test_a08_swap_update_matches_fresh_factorization():
    t0 = time.perf_counter()
    rng = np.random.default_rng(108)
    worst = 0.0
    swaps = 0
    while swaps < 1000:
        n = int(rng.integers(6, 13))
        c = int(rng.integers(2, min(9, n)))
        K = random_psd(rng, n)
        idx = np.sort(rng.choice(n, c, replace=False))
        factor = cholesky_psd(K[np.ix_(idx, idx)], order=idx)
        for _ in range(20):
            if swaps >= 1000:
                break
            members = np.sort(factor.order)
            y_in = int(rng.choice(members))
            y_out = int(rng.choice(np.setdiff1d(np.arange(n), members)))
            factor = chol_swap_update(factor, K, members, y_in, y_out)
            fresh = logdet_submatrix(K, np.sort(factor.order))
            worst = max(worst, abs(factor.logdet() - fresh) / max(1.0, abs(fresh)))
            swaps += 1
    report(
        "A08 O(c^2) swap updates vs from-scratch factorization (1000 swaps)",
        worst <= 1e-8,
        "max log-det error %.2e in %.1fs" % (worst, time.perf_counter() - t0),
    )


def test_a09_psd_ordering_and_bias_variance_monotonicity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(109)
    gamma = 0.1
    psd_viol = 0
    var_viol = 0
    bias_viol = 0
    for trial in range(100):
        n = int(rng.integers(8, 15))
        d = 3
        X = rng.standard_normal((n, d))
        K = PsdMatrix(rbf_kernel(X, None, math.sqrt(d)))
        freqs = rng.standard_normal((5, d))
        z = np.cos(X @ freqs.T) @ rng.standard_normal(5)
        c = int(rng.integers(2, 6))
        C = sample_cdpp_exact(K, c, philox_stream(109, trial))
        Kt = build_nystrom(K, C).materialize()
        lam1 = float(K.eigenvalues[0])
        if float(np.linalg.eigvalsh(K.data - Kt).min()) < -1e-8 * lam1:
            psd_viol += 1
        full = risk_decomposition(K, z, 0.04, gamma)
        approx = risk_decomposition(Kt, z, 0.04, gamma)
        if approx.variance > full.variance * (1 + 1e-10) + 1e-15:
            var_viol += 1
        if approx.bias < full.bias * (1 - 1e-10) - 1e-15:
            bias_viol += 1
    ok = psd_viol == 0 and var_viol == 0 and bias_viol == 0
    report(
        "A09 PSD ordering, variance shrinks, bias grows (100 instances)",
        ok,
        "psd %d, variance %d, bias %d violations in %.0fs"
        % (psd_viol, var_viol, bias_viol, time.perf_counter() - t0),
    )


def test_a10_identity_kernel_contraction_closed_form():
    t0 = time.perf_counter()
    exact = True
    for n in (6, 10, 20):
        for c in (2, 3, n // 2):
            est = estimate_alpha(np.eye(n), c, n_samples=5, rng=0)
            exact &= est.alpha == -(n - 2) / 2.0
    bound = mixing_time_bound(-2.0, 2, 6, 0.01)
    bound_ok = bound.defined and abs(bound.tau - 28.26) <= 0.01
    report(
        "A10 identity-kernel contraction and mixing bound arithmetic",
        exact and bound_ok,
        "alpha exact %s, bound %.4f in %.1fs" % (exact, bound.tau, time.perf_counter() - t0),
    )


def test_a11_qualitative_direction_kdpp_vs_uniform():
    t0 = time.perf_counter()
    cfg = BenchConfig(
        synthetic="500,5,0.1",
        data_seed=0,
        sigma=1.2,
        gamma=1e-2,
        methods=["kdpp", "unif"],
        landmarks=[10, 20, 50],
        seeds=[0, 1, 2],
        gibbs_iters=3000,
    )
    approx_rows = cmd_approx(cfg)
    krr_rows = cmd_krr(cfg)

    def mean(rows, method, c, metric):
        vals = [r.value for r in rows if r.method == method and r.c == c and r.metric == metric]
        assert len(vals) == 3
        return float(np.mean(vals))

    details = []
    ok = True
    for c in (10, 20, 50):
        fr = mean(approx_rows, "kdpp", c, "rel_frobenius_error") / mean(
            approx_rows, "unif", c, "rel_frobenius_error"
        )
        mr = mean(krr_rows, "kdpp", c, "test_mse") / mean(krr_rows, "unif", c, "test_mse")
        details.append("c=%d F=%.3f M=%.3f" % (c, fr, mr))
        ok &= fr <= 1.0 and mr <= 1.0
    report(
        "A11 kdpp beats uniform on error and test MSE (N=500, 3 seeds)",
        ok,
        "; ".join(details) + " in %.0fs" % (time.perf_counter() - t0),
    )


def test_a12_error_trace_stabilizes():
    t0 = time.perf_counter()
    ds = standardize(synthetic_regression(1000, 5, 0.1, 0))
    K = PsdMatrix(rbf_kernel(ds.features, None, 1.2))
    K.eigendecomposition()
    rows = error_trace(K, 50, 5000, stride=10, metrics=approximation_error_metrics(K, 50), rng=0)
    vals = np.array([m["rel_frobenius_error"] for _, m in rows])
    spread = float(vals.max() - vals.min())
    ratio = float(vals[len(vals) // 2 :].std(ddof=1)) / spread
    report(
        "A12 error trace drops then stabilizes (N=1000, c=50, 5000 steps)",
        ratio <= 0.25,
        "final-half std / range = %.3f in %.0fs" % (ratio, time.perf_counter() - t0),
    )


def test_a13_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    from dppnystrom.cli import main

    runs = {
        "approx": ["--methods", "kdpp,unif,lev,adappart", "--landmarks", "4,6", "--seeds", "0,1"],
        "krr": ["--methods", "kdpp,unif,reglev", "--landmarks", "5", "--seeds", "0,1"],
        "mixing": [
            "--synthetic", "12,2,0.1", "--landmarks", "3", "--seeds", "0",
            "--trace-iters", "30", "--alpha-samples", "10", "--tv-steps", "0,10",
        ],
        "tradeoff": [
            "--methods", "kdpp,applev,kmeans", "--landmarks", "4", "--seeds", "0",
            "--iteration-grid", "0,10", "--anchor-grid", "8,16",
        ],
    }
    base = ["--synthetic", "60,3,0.1", "--sigma", "1.2", "--gamma", "0.05", "--gibbs-iters", "50"]
    all_ok = True
    for command, extra in runs.items():
        outs = []
        for tag in ("x", "y"):
            out = tmp_path / ("%s_%s.csv" % (command, tag))
            rc = main([command, *base, *extra, "--out", str(out)])
            assert rc == 0, command
            lines = out.read_text(encoding="utf-8").splitlines()
            outs.append([",".join(line.split(",")[:5]) for line in lines])
        all_ok &= outs[0] == outs[1]
    report(
        "A13 CLI determinism (all four subcommands, metric columns byte-identical)",
        all_ok,
        "in %.0fs" % (time.perf_counter() - t0),
    )

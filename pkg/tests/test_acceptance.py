"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly as ``python3 tests/test_acceptance.py``.
"""

import itertools
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

sys.path.insert(0, os.path.dirname(__file__))

from conftest import random_pair, random_scatter, record  # noqa: E402
from mc_oracle import log_bf_cov, log_bf_prec  # noqa: E402
from test_metrics import all_partitions, pair_count_ari  # noqa: E402

from bahc.datasets import HIV_N, hiv_csv_path, hiv_scatter  # noqa: E402
from bahc.engine import auto_partition, cut  # noqa: E402
from bahc.measures import (  # noqa: E402
    Hyperparams,
    bayes_similarity,
    bic_similarity,
    make_hyper_bayescorr,
    make_hyper_bayescov,
    make_hyper_precision,
    mutual_info_plugin,
    partition_log_marginal,
    precision_similarity,
)
from bahc.methods import run_method  # noqa: E402
from bahc.metrics import adjusted_rand, rand_index  # noqa: E402
from bahc.numerics import ScatterInput, scatter_from_data  # noqa: E402
from bahc.partition import Partition  # noqa: E402
from bahc.simgen import (  # noqa: E402
    SimConfig,
    analytic_homogeneous_mi,
    homogeneous_matrix,
    random_cluster_correlation,
    random_partition,
    run_benchmark,
    sample_dataset,
    summarize,
)


def _assembled_log_bf(s, n, i, j, nu, lam_diag):
    """Ratio of the two marginal likelihoods written out with explicit Wishart normalizers.

    p(S | M) is proportional to prod_k Z(D_k, n + nu_k) / Z(D_k, nu_k)
    |Lambda_k|^{nu_k/2} |Lambda_k + S_k|^{-(n + nu_k)/2}, with Z the Wishart
    normalizer 2^{m d/2} pi^{d(d-1)/4} prod Gamma((m + 1 - k)/2).
    """
    d = s.shape[0]

    def lz(dk, m):
        k = np.arange(1, dk + 1)
        return m * dk / 2 * math.log(2) + dk * (dk - 1) / 4 * math.log(math.pi) + gammaln((m + 1 - k) / 2).sum()

    def ev(block):
        block = list(block)
        dk = len(block)
        nk = nu - d + dk
        lam = np.diag(np.asarray(lam_diag)[block])
        sk = s[np.ix_(block, block)]
        return (lz(dk, n + nk) - lz(dk, nk) + nk / 2 * np.linalg.slogdet(lam)[1]
                - (n + nk) / 2 * np.linalg.slogdet(lam + sk)[1])

    return ev(tuple(i) + tuple(j)) - ev(i) - ev(j)


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def test_criterion_1_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_dec = worst_gl = 0.0
    for _ in range(200):
        d = int(rng.integers(2, 9))
        s = random_scatter(rng, d)
        hyper = Hyperparams(d - 1 + float(rng.uniform(0.2, 6.0)), tuple(rng.uniform(0.2, 5.0, size=d)))
        i, j = random_pair(rng, d)
        v = bayes_similarity(s, i, j, hyper).value
        ref = _assembled_log_bf(s.s, s.n_eff, i, j, hyper.nu, hyper.lambda_diag)
        worst_dec = max(worst_dec, _rel(v, ref))
        # embed the pair in a random partition and merge it
        rest = [k for k in range(d) if k not in i + j]
        labels = rng.integers(0, max(1, len(rest)), size=len(rest))
        blocks = [i, j] + [tuple(int(r) for r, lab in zip(rest, labels) if lab == g) for g in set(labels.tolist())]
        p = Partition(d, tuple(b for b in blocks if b))
        delta = partition_log_marginal(s, p.merge(i, j), hyper) - partition_log_marginal(s, p, hyper)
        worst_gl = max(worst_gl, _rel(delta, v))
    elapsed = time.perf_counter() - t0
    ok = worst_dec < 1e-9 and worst_gl < 1e-9 and elapsed < 10.0
    record("1", ok, f"decomposition rel err {worst_dec:.1e}, global-local rel err {worst_gl:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2a_homogeneous_031():
    v = analytic_homogeneous_mi(5, 5, 0.3)
    s = ScatterInput.from_correlation(homogeneous_matrix(10, 0.3), 100)
    plug = mutual_info_plugin(s, tuple(range(5)), tuple(range(5, 10)))
    ok = abs(v - 0.31) <= 0.005 and abs(plug - v) < 1e-10
    record("2a", ok, f"I(5,5,0.3) = {v:.5f} vs quoted 0.31; plug-in gap {abs(plug - v):.1e}")
    assert ok


def test_criterion_2b_homogeneous_033():
    v = analytic_homogeneous_mi(7, 7, 0.25)
    s = ScatterInput.from_correlation(homogeneous_matrix(14, 0.25), 100)
    plug = mutual_info_plugin(s, tuple(range(7)), tuple(range(7, 14)))
    ok_plug = abs(plug - v) < 1e-10
    ok = abs(v - 0.33) <= 0.005 and ok_plug
    record("2b", ok, f"I(7,7,0.25) = {v:.5f} vs quoted 0.33 (|diff| {abs(v - 0.33):.4f}, tol 0.005); "
                     f"plug-in gap {abs(plug - v):.1e}")
    assert ok_plug
    assert ok


def test_criterion_3_mi_bias():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    reps, n = 2000, 100
    part = Partition(4, ((0, 1), (2, 3)))
    vals = np.empty(reps)
    for r in range(reps):
        x, _ = sample_dataset(part, n, "gaussian", rng)
        vals[r] = mutual_info_plugin(scatter_from_data(x, mean_known=True, mu=np.zeros(4)), (0, 1), (2, 3))
    se = vals.std(ddof=1) / math.sqrt(reps)
    z = (vals.mean() - 0.02) / se
    elapsed = time.perf_counter() - t0
    ok = abs(z) < 3.0 and elapsed < 120.0
    record("3", ok, f"mean I_hat = {vals.mean():.5f} vs 0.02 ({z:+.2f} SE), {elapsed:.1f}s")
    assert ok


def test_criterion_4_bic_asymptote():
    ns = (100, 1000, 10000)
    worst_shrink = worst_var = 0.0
    for m in range(20):
        rng = np.random.default_rng(4000 + m)
        r = random_cluster_correlation(4, rng)
        h = make_hyper_bayescorr(4)
        gaps = []
        for n in ns:
            # the exact model scatter, free of sampling noise
            s = ScatterInput.from_correlation(r, n)
            gaps.append(abs(bayes_similarity(s, (0, 1), (2, 3), h).value - bic_similarity(s, (0, 1), (2, 3)).value))
        step1, step2 = gaps[1] - gaps[0], gaps[2] - gaps[1]
        # an uncancelled ln N term would give equal increments per decade
        worst_shrink = max(worst_shrink, abs(step2) / max(abs(step1), 1e-12) if abs(step2) > 1e-3 else 0.0)
        worst_var = max(worst_var, abs(step2) / max(gaps[2], 1e-12) if abs(step2) > 1e-3 else 0.0)
    ok = worst_shrink < 0.5 and worst_var < 0.2
    record("4", ok, f"20 models: worst decade-increment ratio {worst_shrink:.3f} (< 0.5), "
                    f"worst 1e3->1e4 variation {worst_var:.3f} (< 0.2)")
    assert ok


MC_DRAWS = 2_000_000


def _mc_cases():
    c2 = ScatterInput.from_correlation([[1.0, 0.5], [0.5, 1.0]], 50)
    v2 = ScatterInput.from_covariance([[2.0, 0.6], [0.6, 1.0]], 30)
    r3 = ScatterInput.from_correlation([[1.0, 0.4, 0.3], [0.4, 1.0, -0.2], [0.3, -0.2, 1.0]], 20)
    v3 = ScatterInput.from_covariance([[2.0, 0.5, 0.3], [0.5, 1.0, -0.2], [0.3, -0.2, 0.5]], 20)
    return [
        ("bayes D=2 corr r=0.5 N=50", "cov", c2, make_hyper_bayescorr(2), (0,), (1,)),
        ("bayes D=2 cov N=30", "cov", v2, make_hyper_bayescov(v2), (0,), (1,)),
        ("bayes D=3 corr N=20", "cov", r3, make_hyper_bayescorr(3), (0,), (1, 2)),
        ("bayes D=3 cov N=20", "cov", v3, make_hyper_bayescov(v3), (0,), (1, 2)),
        ("precision D=2 N=30", "prec", v2, make_hyper_precision(v2), (0,), (1,)),
        ("precision D=3 N=20", "prec", v3, make_hyper_precision(v3), (0,), (1, 2)),
    ]


def test_criterion_5_monte_carlo():
    t0 = time.perf_counter()
    worst = 0.0
    parts = []
    for k, (label, kind, s, h, i, j) in enumerate(_mc_cases()):
        if kind == "cov":
            exact = bayes_similarity(s, i, j, h).value
            est, se = log_bf_cov(s.s, s.n_eff, h.nu, np.diag(h.lambda_diag), i, j, MC_DRAWS, seed=500 + k)
        else:
            exact = precision_similarity(s, i, j, h).value
            omega = np.linalg.inv(h.omega_inv(range(s.dim)))
            est, se = log_bf_prec(s.s, s.n_eff, h.nu_k(len(i) + len(j)), omega, i, j, MC_DRAWS, seed=500 + k)
        z = (exact - est) / se
        worst = max(worst, abs(z))
        parts.append(f"{label}: {exact:.4f} vs {est:.4f}+-{se:.4f} ({z:+.2f} SE)")
    elapsed = time.perf_counter() - t0
    ok = worst < 3.0 and elapsed < 600.0
    record("5", ok, f"worst {worst:.2f} SE over {len(parts)} cases, {elapsed:.0f}s; " + "; ".join(parts))
    assert ok


def _named(p):
    return sorted(sorted(f"X{i + 1}" for i in b) for b in p.blocks)


def test_criterion_6_toy_bayes_and_linkage():
    t0 = time.perf_counter()
    s = hiv_scatter("cov", HIV_N)
    checks = {}
    for m in ("BayesCov", "BayesCorr", "Bic"):
        h = run_method(m, s, stop="full")
        checks[f"{m} first merges"] = [(st.left, st.right) for st in h.steps[:2]] == [((2,), (4,)), ((0,), (1,))]
    for m in ("BayesCovAuto", "BayesCorrAuto"):
        checks[f"{m} stop"] = _named(auto_partition(run_method(m, s))) == [["X1", "X2", "X3", "X5", "X6"], ["X4"]]
    for m in ("CompleteAbs", "WardAbs"):
        p = cut(run_method(m, s), 3)
        checks[f"{m} X6 with X1,X2"] = ["X1", "X2", "X6"] in _named(p)
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 1.0
    bad = [k for k, v in checks.items() if not v]
    record("6 (merges, Bayes stop, G4)", ok, f"N={HIV_N}, {len(checks) - len(bad)}/{len(checks)} checks, "
                                             f"{elapsed:.2f}s" + (f"; failed: {bad}" if bad else ""))
    assert ok


def test_criterion_6_toy_bic_autostop():
    s = hiv_scatter("cov", HIV_N)
    p = auto_partition(run_method("BicAuto", s))
    expected = [["X1", "X2"], ["X3", "X5", "X6"], ["X4"]]
    got = _named(p)
    ok = got == expected
    record("6 (Bic stop)", ok, f"N={HIV_N}: Bic auto partition {got}, expected {expected}")
    assert ok


def test_criterion_7_desk_simulation():
    t0 = time.perf_counter()
    cfg = SimConfig(d=6, c_values=(2, 3, 4), n_values=(10, 90, 170), distributions=("gaussian", "student(3)"),
                    replications=100, master_seed=7,
                    methods=("BayesCorr", "BayesCov", "BayesCorrAuto", "BayesCovAuto", "AverageAbs", "Infomut"))
    rows = run_benchmark(cfg)
    table = {t["method"]: t for t in summarize(rows)}
    med = {m: t["median_ari"] for m, t in table.items()}
    elapsed = time.perf_counter() - t0
    ranking = all(med[b] >= med[o] for b in ("BayesCorr", "BayesCov") for o in ("AverageAbs", "Infomut"))
    auto = all(abs(med[a + "Auto"] - med[a]) <= 0.1 for a in ("BayesCorr", "BayesCov"))
    ok = ranking and auto and elapsed < 900.0
    detail = ", ".join(f"{m} {v:.3f}" for m, v in sorted(med.items(), key=lambda kv: -kv[1]))
    record("7", ok, f"median ARI: {detail}; {elapsed:.0f}s")
    assert ok


def test_criterion_8_metric_oracles():
    worst = 0.0
    pairs = 0
    for d in range(1, 7):
        parts = list(all_partitions(d))
        for p, q in itertools.product(parts, parts):
            worst = max(worst, abs(adjusted_rand(p, q) - pair_count_ari(p, q)))
            pairs += 1
    rand = rand_index(Partition(4, ((0, 1), (2, 3))), Partition(4, ((0, 2), (1, 3))))
    ok = worst <= 1e-12 and rand == 1.0 / 3.0
    record("8", ok, f"{pairs} partition pairs, worst ARI gap {worst:.1e}; rand({{12|34}},{{13|24}}) = {rand!r}")
    assert ok


def test_criterion_9_samplers():
    rng = np.random.default_rng(9)
    counts = {}
    for _ in range(70_000):
        p = random_partition(4, 2, rng)
        counts[p] = counts.get(p, 0) + 1
    chi = stats.chisquare(list(counts.values()))
    draws = np.array([random_cluster_correlation(3, rng) for _ in range(10_000)])
    ks = [stats.kstest(draws[:, a, b], stats.uniform(-1, 2).cdf).pvalue for a, b in ((0, 1), (0, 2), (1, 2))]
    ok = len(counts) == 7 and chi.pvalue > 0.01 and min(ks) > 0.01
    record("9", ok, f"partition chi-square p={chi.pvalue:.3f} over {len(counts)} cells; "
                    f"correlation KS p-values {', '.join(f'{v:.3f}' for v in ks)}")
    assert ok


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "bahc.cli", *args], cwd=cwd, capture_output=True, check=True)


def test_criterion_10_determinism(tmp_path):
    hiv = tmp_path / "hiv.csv"
    hiv.write_text(hiv_csv_path("corr").read_text())
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"d": 5, "c_values": [2, 3], "n_values": [15, 60], "replications": 4,
                               "methods": ["BayesCorrAuto", "BicAuto", "InfomutNorm", "WardAbs"]}))
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        files = {}
        for m in ("bayescorr", "bayescov", "bic", "bayesprec", "infomutnorm", "singleabs", "ward"):
            out = d / f"{m}.json"
            _cli("cluster", "--input", str(hiv), "--input-kind", "corr", "--n", "107", "--measure", m,
                 "--seed", "3", "--out", str(out), cwd=tmp_path)
            files[out.name] = out.read_bytes()
        _cli("bench", "--config", str(cfg), "--out-dir", str(d / "bench"), cwd=tmp_path)
        for name in ("results.csv", "summary.csv"):
            files[name] = (d / "bench" / name).read_bytes()
        _cli("consensus", "--k", "2", "--out-prefix", str(d / "cons"),
             *(str(d / f"{m}.json") for m in ("bayescorr", "bic", "singleabs")), cwd=tmp_path)
        for name in ("cons_stability.csv", "cons_partition.json"):
            files[name] = (d / name).read_bytes()
        files["mi"] = _cli("mi", "--homog", "5", "5", "0.3", cwd=tmp_path).stdout
        outputs.append(files)
    diff = sorted(k for k in outputs[0] if outputs[0][k] != outputs[1][k])
    ok = not diff
    record("10", ok, f"{len(outputs[0])} outputs compared byte for byte" + (f"; differing: {diff}" if diff else ""))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))

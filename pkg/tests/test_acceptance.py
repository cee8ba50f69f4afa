"""Acceptance suite: one test per criterion, each with its runtime bound.

Each test records its criterion number and the measured values; the
terminal summary prints one PASS/FAIL line per criterion.
"""

import itertools
import json
import time

import numpy as np
import pytest

from lcsb import regress
from lcsb.cli import main
from lcsb.evalmetrics import kendall_tau, kl_divergence, r_squared, spike_rate, spike_threshold
from lcsb.lowrank import full_svd, rank_mse_profile, reconstruct, select_rank
from lcsb.noise import NoiseModel
from lcsb.search import (ALGORITHM_IDS, LCE_BASES, OracleBenchmark, SearchConfig, checkpoints, hb_schedule,
                         run_search)
from lcsb.surrogate import SurrogateConfig, SurrogateModel, fit_surrogate, load_surrogate, save_surrogate
from lcsb.synthspace import SyntheticOracle, generate_dataset, random_architecture

pytestmark = pytest.mark.acceptance

N_SEEDS = 30
MB = {"extrapolator": "model_based"}


@pytest.fixture
def crit(record_property):
    """Returns report(n, ok, detail) which records the outcome line."""
    def report(n, ok, detail):
        record_property("criterion", n)
        record_property("detail", detail)
        return ok
    return report


def brute_tau(x, y):
    p = q = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        s = (x[i] - x[j]) * (y[i] - y[j])
        p += int(s > 0)
        q += int(s < 0)
    return (p - q) / (p + q)


@pytest.fixture(scope="module")
def benchmark_oracle():
    return OracleBenchmark(SyntheticOracle.from_seed(0))


@pytest.fixture(scope="module")
def quality_data():
    o = SyntheticOracle.from_seed(0)
    train = generate_dataset(o, 2000, 1, rng_seed=1)
    test = generate_dataset(o, 500, 5, rng_seed=2)
    val = generate_dataset(o, 200, 5, rng_seed=3)
    return o, train, test, val


@pytest.fixture(scope="module")
def calibrated(quality_data):
    """Default surrogate with the rank chosen on a separate multi-seed set."""
    _, train, _, val = quality_data
    k = select_rank(train.curves, [val.curves[i] for i in val.groups().values()], 20)
    return fit_surrogate(train, SurrogateConfig(k=k))


def median_runs(bench, alg, lce, budget):
    finals, curves = [], []
    cp = checkpoints(budget)
    for s in range(N_SEEDS):
        h = run_search(SearchConfig(alg, budget, s, lce=lce), bench)
        finals.append(h.final_regret())
        curves.append(h.regret_at(cp)[0])
    return float(np.median(finals)), np.median(np.array(curves), axis=0)


def test_criterion_01_metric_oracles(crit):
    t0 = time.time()
    rng = np.random.default_rng(1)
    exact = 0
    for _ in range(1000):
        n = int(rng.integers(3, 30))
        x, y = rng.integers(0, 8, n).astype(float), rng.integers(0, 8, n).astype(float)
        try:
            ref = brute_tau(x, y)
        except ZeroDivisionError:
            # every pair tied: both sides must refuse
            with pytest.raises(ValueError):
                kendall_tau(x, y)
            exact += 1
            continue
        exact += kendall_tau(x, y) == ref
    kl1 = kl_divergence(np.array([-1.0, 1.0]) / np.sqrt(2), np.array([-1.0, 1.0]) * np.sqrt(2))
    t = rng.normal([0.5, 0.6, 0.7], [0.02, 0.03, 0.01], size=(50, 3))
    p = rng.normal([0.52, 0.58, 0.7], [0.03, 0.02, 0.02], size=(50, 3))
    mt, vt, mp, vp = t.mean(0), t.var(0, ddof=1), p.mean(0), p.var(0, ddof=1)
    xs = mt + np.sqrt(vt) * rng.standard_normal((10**6, 3))
    mc = np.mean(-0.5 * np.sum((xs - mt) ** 2 / vt + np.log(vt) - (xs - mp) ** 2 / vp - np.log(vp), axis=1)) / 3
    mc_err = abs(mc / kl_divergence(t, p) - 1)
    r2 = (r_squared([1.0, 2.0, 4.0], [1.0, 2.0, 4.0]) == 1.0
          and r_squared([7 / 3] * 3, [1.0, 2.0, 4.0]) == pytest.approx(0.0, abs=1e-15))
    dt = time.time() - t0
    ok = exact == 1000 and abs(kl1 - 0.31815) < 1e-5 and mc_err < 0.02 and r2 and dt < 10
    assert crit(1, ok, f"tau exact {exact}/1000, KL {kl1:.6f}, MC rel err {mc_err:.4f}, {dt:.1f}s")


def test_criterion_02_svd(crit):
    t0 = time.time()
    rng = np.random.default_rng(2)
    worst = 0.0
    monotone = True
    for _ in range(3):
        S = rng.random((100, 50))
        lam = np.sort(np.linalg.eigvalsh(S.T @ S))[::-1]
        basis = full_svd(S)
        errs = []
        for k in range(1, 51):
            resid = np.sum((S - reconstruct(S, basis.truncate(k), clip=False)) ** 2)
            worst = max(worst, abs(resid - lam[k:].sum()) / max(lam.sum(), 1))
            errs.append(resid)
        monotone &= bool(np.all(np.diff(errs) <= 1e-10))
    dt = time.time() - t0
    ok = worst < 1e-8 and monotone and dt < 10
    assert crit(2, ok, f"max rel Eckart-Young gap {worst:.2e}, MSE nonincreasing {monotone}, {dt:.1f}s")


def test_criterion_03_rank_selection(crit):
    t0 = time.time()
    ks, ok = [], True
    for s in range(5):
        o = SyntheticOracle.from_seed(s, noise_scale=0.02)
        train = generate_dataset(o, 1000, 1, rng_seed=100 + s)
        val = generate_dataset(o, 200, 5, rng_seed=200 + s)
        groups = [val.curves[i] for i in val.groups().values()]
        k = select_rank(train.curves, groups, 20)
        mse = rank_mse_profile(train.curves, groups, 20)
        ks.append(k)
        ok &= 3 <= k <= 8 and mse[k - 1] < mse[19]
    dt = time.time() - t0
    assert crit(3, ok and dt < 120, f"selected k per seed {ks}, {dt:.1f}s")


def test_criterion_04_surrogate_quality(crit, quality_data):
    t0 = time.time()
    o, train, test, _ = quality_data
    groups = test.groups()
    archs = list(groups)
    truth = np.array([test.curves[i].mean(axis=0) for i in groups.values()])
    rng = np.random.default_rng(4)
    one_seed = []
    for a, idx in groups.items():
        s = int(rng.integers(0, 2**31 - 1))
        assert s not in set(test.seeds[idx].tolist())
        one_seed.append(o.sample_curve(a, s)[-1])
    m = fit_surrogate(train, SurrogateConfig(mu=regress.RegressorConfig("kridge", {"ridge": 1e-2})))
    kt_sur = kendall_tau(m.mean_curves(archs)[:, -1], truth[:, -1])
    kt_one = kendall_tau(np.array(one_seed), truth[:, -1])
    dt = time.time() - t0
    ok = kt_sur >= kt_one - 0.02 and dt < 300
    assert crit(4, ok, f"final KT surrogate {kt_sur:.3f} vs 1-seed {kt_one:.3f}, {dt:.1f}s")


def test_criterion_05_noise_calibration(crit, quality_data, calibrated):
    t0 = time.time()
    o, _, test, _ = quality_data
    m = calibrated
    wide = SurrogateModel(m.space, m.basis, m.mu, NoiseModel("std", m.space.e_max, sigma=3 * m.noise.sigma),
                          m.config, m.fit_report)
    archs = list(test.groups())[:200]
    good, bad = [], []
    for a in archs:
        real = np.array([o.sample_curve(a, s) for s in range(10)])
        good.append(kl_divergence(real, m.noisy_curves([a] * 10, range(10))))
        bad.append(kl_divergence(real, wide.noisy_curves([a] * 10, range(10))))
    kl, kl3 = float(np.mean(good)), float(np.mean(bad))
    dt = time.time() - t0
    ok = kl < 1.0 and kl3 >= 3 * kl and dt < 180
    assert crit(5, ok, f"k={m.fit_report['k']}: avg KL {kl:.3f} (< 1.0: {kl < 1.0}), sigma x3 KL {kl3:.3f}, "
                       f"ratio {kl3 / kl:.2f} (>= 3: {kl3 >= 3 * kl}), {dt:.1f}s")


def test_criterion_06_spike_anomalies(crit, quality_data, calibrated):
    t0 = time.time()
    _, _, test, _ = quality_data
    x = spike_threshold(test.curves)
    real = spike_rate(test.curves, x)
    archs = list(test.groups())
    sur = calibrated.noisy_curves([a for a in archs for _ in range(5)], list(range(5)) * len(archs))
    rate = spike_rate(sur, x)
    dt = time.time() - t0
    ok = real < 0.05 and 0.02 <= rate <= 0.12 and dt < 120
    assert crit(6, ok, f"threshold {x:.4f}, real rate {real:.4f}, surrogate rate {rate:.4f}, {dt:.1f}s")


def test_criterion_07_lce_benefit(crit, benchmark_oracle):
    t0 = time.time()
    budget = 100 * benchmark_oracle.space.e_max * benchmark_oracle.mean_epoch_cost()
    parts, ok = [], True
    for base in LCE_BASES:
        f0, c0 = median_runs(benchmark_oracle, base, None, budget)
        f1, c1 = median_runs(benchmark_oracle, base, MB, budget)
        frac = float(np.mean(c1 <= c0))
        ok &= f1 <= f0 and frac >= 0.6
        parts.append(f"{base.upper()} {f0:.4f} -> MB {f1:.4f} ({frac:.0%} cp)")
    dt = time.time() - t0
    assert crit(7, ok and dt < 900, "; ".join(parts) + f", {dt:.0f}s")


def test_criterion_08_fidelity_ablation(crit, benchmark_oracle):
    t0 = time.time()
    e_max = benchmark_oracle.space.e_max
    budget = 100 * e_max * benchmark_oracle.mean_epoch_cost()
    f20, _ = median_runs(benchmark_oracle, "rea", {**MB, "e_few": int(0.2 * e_max)}, budget)
    f40, _ = median_runs(benchmark_oracle, "rea", {**MB, "e_few": int(0.4 * e_max)}, budget)
    dt = time.time() - t0
    assert crit(8, f20 <= f40 and dt < 600, f"REA-MB median final regret E_few=20 {f20:.4f}, "
                                             f"E_few=40 {f40:.4f}, {dt:.0f}s")


def test_criterion_09_hyperband_and_budget(crit, benchmark_oracle):
    t0 = time.time()
    # independent recomputation of the textbook brackets for R=81, eta=3
    smax = 4
    table = []
    for s in range(smax, -1, -1):
        n = -(-(smax + 1) * 3**s // (s + 1))
        table.append([(n // 3**i, 81 // 3 ** (s - i)) for i in range(s + 1)])
    schedule_ok = hb_schedule(81, 3, 1) == table and len(table) == 5
    rng = np.random.default_rng(9)
    full = benchmark_oracle.space.e_max * benchmark_oracle.mean_epoch_cost()
    violations = 0
    for i in range(100):
        alg = ALGORITHM_IDS[i % len(ALGORITHM_IDS)]
        lce = MB if alg in LCE_BASES and rng.random() < 0.5 else None
        budget = float(rng.uniform(0.2, 25.0)) * full
        h = run_search(SearchConfig(alg, budget, int(rng.integers(0, 10**6)), lce=lce), benchmark_oracle)
        violations += h.total_charged > budget
    dt = time.time() - t0
    ok = schedule_ok and violations == 0 and dt < 300
    assert crit(9, ok, f"5-bracket table match {schedule_ok}, budget violations {violations}/100, {dt:.0f}s")


def test_criterion_10_determinism(crit, tmp_path):
    t0 = time.time()

    def snapshot(d):
        return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}

    exp = {"benchmark": {"kind": "synthetic"}, "trials": 2,
           "search": [{"algorithm": "rea", "budget_trainings": 5, "params": {"population": 4, "sample": 2}},
                      {"algorithm": "hb", "budget_trainings": 5}]}
    (tmp_path / "exp.json").write_text(json.dumps(exp))
    (tmp_path / "fit.json").write_text(json.dumps({"k": 4, "mu": {"backend": "kridge"}}))
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        codes = [
            main(["gen-data", "--n-arch", "150", "--seed", "1", "--out", str(d / "train.lcds")]),
            main(["gen-data", "--n-arch", "30", "--seeds-per-arch", "3", "--seed", "2", "--out", str(d / "test.lcds")]),
            main(["fit", "--data", str(d / "train.lcds"), "--config", str(tmp_path / "fit.json"),
                  "--out", str(d / "m.lcsm")]),
            main(["eval", "--surrogate", str(d / "m.lcsm"), "--test", str(d / "test.lcds"), "--out", str(d / "eval")]),
            main(["search", "--config", str(tmp_path / "exp.json"), "--out", str(d / "search")]),
            main(["ablate-fidelity", "--config", str(tmp_path / "exp.json"), "--efew-list", "10,20",
                  "--out", str(d / "ablate")]),
        ]
        assert codes == [0] * 6
        outs.append(snapshot(d))
    identical = outs[0] == outs[1]

    m = load_surrogate(tmp_path / "a" / "m.lcsm")
    save_surrogate(m, tmp_path / "copy.lcsm")
    back = load_surrogate(tmp_path / "copy.lcsm")
    probe = [random_architecture(m.space, i) for i in range(50)]
    gap = float(np.max(np.abs(back.mean_curves(probe) - m.mean_curves(probe))))
    dt = time.time() - t0
    ok = identical and gap <= 1e-12 and dt < 120
    assert crit(10, ok, f"{len(outs[0])} output files byte-identical {identical}, reload gap {gap:.1e}, {dt:.1f}s")

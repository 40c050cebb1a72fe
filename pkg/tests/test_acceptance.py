"""Acceptance gate. Each test checks one criterion at its stated tolerance and
records a PASS/FAIL line that the terminal summary prints at the end."""

import csv
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from ngpsd.antinoise import NoiseSweep, is_reliable, run_sweep
from ngpsd.classic import ZcParams, cr_rc2_shape, zc_factor
from ngpsd.cli import main
from ngpsd.evaluation import DoubleGaussianFit, build_histogram, compute_fom, evaluate_method, fit_double_gaussian
from ngpsd.ga import GaConfig, decode, ga_optimize, tuning_subset
from ngpsd.methods import METHOD_NAMES, MethodSpec, compute_factors
from ngpsd.neural import PcnnParams, QcScmParams, hqcscm_split_point, pcnn_steps, qcscm_counts, qcscm_steps
from ngpsd.pulses import Pulse, PulseSet, SynthParams, load_pulses, normalize_peak, synth_pulse, subtract_baseline

from test_classic import scalar_cr_rc2
from test_neural import ZERO, discrete_scm, scalar_pcnn, scalar_qcscm

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_fom_arithmetic(acceptance_report):
    with Timer() as t:
        fom = compute_fom(DoubleGaussianFit(0.3, 0.03, 1.0, 0.7, 0.03, 1.0))
    ok = abs(fom - 2.831) <= 0.003 and t.elapsed < 1.0
    assert acceptance_report(1, ok, f"FOM {fom:.4f} (target 2.831 +- 0.003) in {t.elapsed:.3f}s")


def test_criterion_2_fit_recovery(acceptance_report):
    rng = np.random.default_rng(2024)
    worst_mu = worst_sigma = 0.0
    failures = 0
    with Timer() as t:
        for _ in range(20):
            s_g, s_n = rng.uniform(0.02, 0.04, 2)
            mu_g = rng.uniform(-1.0, 1.0)
            mu_n = mu_g + rng.uniform(6.0, 10.0) * max(s_g, s_n)
            n = 1_000_000
            k = int(n * rng.uniform(0.3, 0.7))
            x = np.r_[rng.normal(mu_g, s_g, k), rng.normal(mu_n, s_n, n - k)]
            try:
                fit = fit_double_gaussian(build_histogram(x))
            except Exception:
                failures += 1
                continue
            worst_mu = max(worst_mu, abs(fit.mu_g - mu_g), abs(fit.mu_n - mu_n))
            worst_sigma = max(worst_sigma, abs(fit.sigma_g / s_g - 1), abs(fit.sigma_n / s_n - 1))
    ok = failures == 0 and worst_mu <= 1e-3 and worst_sigma <= 0.02 and t.elapsed < 10
    detail = f"worst |dmu| {worst_mu:.2e}, worst sigma err {worst_sigma:.2%}, {failures} failures, {t.elapsed:.1f}s"
    assert acceptance_report(2, ok, detail)


def test_criterion_3_separation_ordering(oracle_set, acceptance_report):
    lab = oracle_set.labels
    parts, ok = [], True
    with Timer() as t:
        for m in METHOD_NAMES:
            if m == "hqcscm":
                sub = tuning_subset(oracle_set, 1000)
                res = ga_optimize(sub, GaConfig(population=10, generations=10, seed=0))
                spec = MethodSpec(m, decode(res.genes, hqcscm_split_point(oracle_set)))
            else:
                spec = MethodSpec(m)
            r = compute_factors(oracle_set, spec)
            g, n = np.nanmean(r[lab == 0]), np.nanmean(r[lab == 1])
            ok &= bool(n > g)
            if m in ("feps", "lg"):
                # steeper (larger |slope|) edges belong to gamma rays
                ok &= bool(np.nanmean(np.abs(r[lab == 0])) > np.nanmean(np.abs(r[lab == 1])))
            parts.append(f"{m} {'n>g' if n > g else 'n<=g'}")
        cc = evaluate_method(compute_factors(oracle_set, MethodSpec("cc")))
        ok &= (not cc.failure) and cc.fom > 0.8
    ok &= t.elapsed < 120
    assert acceptance_report(3, ok, f"{', '.join(parts)}; CC FOM {cc.fom:.3f}; GA-tuned FOM {res.fitness:.3f}; {t.elapsed:.1f}s")


def test_criterion_4_cc_classification(oracle_set, acceptance_report):
    with Timer() as t:
        r = evaluate_method(compute_factors(oracle_set, MethodSpec("cc")))
        agreement = float(np.mean(r.classifications == oracle_set.labels))
    ok = not r.failure and agreement >= 0.95 and t.elapsed < 10
    assert acceptance_report(4, ok, f"agreement {agreement:.1%} at D={r.dividing_point:.4f}, {t.elapsed:.2f}s")


def test_criterion_5_antinoise(oracle_set, tmp_path, acceptance_report):
    sweep = NoiseSweep((0.01, 0.0175, 0.025), repetitions=20, base_seed=0)
    methods = [MethodSpec("cc"), MethodSpec("fga"), MethodSpec("pcnn")]
    with Timer() as t:
        result = run_sweep(oracle_set, methods, sweep)
    ok, parts = True, []
    for m in result.methods:
        cells = result.series(m)
        for a, b in zip(cells, cells[1:]):
            se = math.hypot(a.std_error if a.successes.size > 1 else 0.0, b.std_error if b.successes.size > 1 else 0.0)
            ok &= not (b.mean_fom > a.mean_fom + se)
        parts.append(f"{m} " + "/".join(f"{c.mean_fom:.3f}" for c in cells))
    # recount failure marks from the written per-trial file
    result.write_fom_csv(tmp_path / "fom.csv")
    result.write_summary_csv(tmp_path / "summary.csv")
    recount = {}
    for row in csv.DictReader((tmp_path / "fom.csv").open()):
        key = (row["method"], row["variance"])
        recount[key] = recount.get(key, 0) + (row["fom"] == "NA")
    for row in csv.DictReader((tmp_path / "summary.csv").open()):
        ok &= recount[(row["method"], row["variance"])] == int(row["failure_count"])
    ok &= is_reliable(10, 10) and not is_reliable(11, 10)
    ok &= t.elapsed < 180
    assert acceptance_report(5, ok, f"mean FOM per variance: {'; '.join(parts)}; {t.elapsed:.1f}s")


def test_criterion_6_spiking_oracles(acceptance_report):
    rng = np.random.default_rng(6)
    ok = True
    for _ in range(25):
        a_F, a_L, a_t = rng.uniform(0.01, 2.0, 3)
        V_F, V_L, V_t = rng.uniform(0.1, 30.0, 3)
        beta, S, theta0 = rng.uniform(0, 1), rng.uniform(0.01, 2.0), rng.uniform(0.1, 3.0)
        p = PcnnParams(a_F, a_L, a_t, V_F, V_L, V_t, beta, ZERO, ZERO, n_iter=200, theta0=theta0)
        got = [tuple(float(v[0]) for v in s) for s in pcnn_steps(np.array([S]), p)]
        ok &= got == scalar_pcnn(S, a_F, a_L, a_t, V_F, V_L, V_t, beta, theta0, 200)

        f, g = rng.uniform(0.05, 0.95, 2)
        h, dt = rng.uniform(0.1, 5.0), rng.uniform(0.05, 1.0)
        q = QcScmParams(f, g, h, dt, ZERO, t_end=200 * dt, theta0=theta0)
        got = [tuple(float(v[0]) for v in s) for s in list(qcscm_steps(np.array([S]), q))[:200]]
        ok &= len(got) == 200 and got == scalar_qcscm(S, f, g, h, dt, theta0, 200)
    for seed in range(3):
        x = normalize_peak(synth_pulse(SynthParams(noise_sigma=0.01), seed=seed)).samples
        q = QcScmParams(0.8, 0.6, 4.0, 1.0, (0.4, 0.0, 0.4), t_end=60)
        ok &= bool(np.array_equal(qcscm_counts(x, q), discrete_scm(list(x), 0.8, 0.6, 4.0, 0.4, 1.0, 60)))
    assert acceptance_report(6, ok, "25 PCNN + 25 QC-SCM single-neuron traces bitwise, 3 full pulses at dt=1 bitwise")


def test_criterion_7_cr_rc2(acceptance_report):
    x = np.zeros(280)
    x[0] = 1.0
    got = cr_rc2_shape(Pulse(x), ZcParams(tau=100e-9))
    want = scalar_cr_rc2(x, 100e-9, 1e-9)
    err = float(np.max(np.abs(got - want)))
    invariant = True
    for frac in (0.15, 0.25, 0.35):
        y = synth_pulse(SynthParams(slow_fraction=frac)).samples
        r = zc_factor(Pulse(y), ZcParams(tau=20e-9))
        invariant &= all(zc_factor(Pulse(s * y), ZcParams(tau=20e-9)) == r for s in (0.25, 0.5, 2.0, 8.0))
    ok = err <= 1e-12 and invariant
    assert acceptance_report(7, ok, f"max |impulse error| {err:.1e}; zero crossing exactly scale-invariant: {invariant}")


def test_criterion_8_affine_equivariance(oracle_set, acceptance_report):
    ok, worst = True, 0.0
    for m in METHOD_NAMES:
        x = compute_factors(oracle_set, MethodSpec(m))
        if m == "zc":
            # seconds next to an offset of 5 would lose 7 digits to float64 rounding; use ns
            x = x * 1e9
        a, b = evaluate_method(x), evaluate_method(2 * x + 5)
        ok &= not a.failure and not b.failure
        worst = max(worst, abs(a.fom - b.fom))
        ok &= bool(np.array_equal(a.classifications, b.classifications))
    ok &= worst <= 1e-9
    assert acceptance_report(8, ok, f"7 methods, worst |dFOM| {worst:.1e}, classifications identical: {ok}")


def _cli_outputs(root: Path):
    data = root / "pulses.csv"
    assert main(["generate", "--n", "150", "--seed", "11", "--out", str(data)]) == 0
    assert main(["evaluate", "--input", str(data), "--seed", "5", "--out", str(root / "eval")]) == 0
    assert main(["discriminate", "--input", str(data), "--methods", "cc,hqcscm", "--ga-tune",
                 "--ga-population", "3", "--ga-generations", "2", "--seed", "5", "--out", str(root / "disc")]) == 0
    assert main(["antinoise", "--input", str(data), "--methods", "cc,fga", "--reps", "3",
                 "--variances", "0.01,0.02", "--seed", "5", "--out", str(root / "noise")]) == 0
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_criterion_9_determinism(tmp_path, acceptance_report):
    first = _cli_outputs(tmp_path / "run1")
    second = _cli_outputs(tmp_path / "run2")
    ok = first.keys() == second.keys() and all(first[k] == second[k] for k in first)
    assert acceptance_report(9, ok, f"{len(first)} CSV files byte-identical across two full runs")


DATASET = os.environ.get("NGPSD_DATASET")


def test_criterion_10_dataset(acceptance_report):
    if not DATASET or not Path(DATASET).exists():
        acceptance_report(10, None, "skipped: set NGPSD_DATASET to the raw-signal file")
        pytest.skip("set NGPSD_DATASET to the raw-signal file")
    pulses = subtract_baseline(load_pulses(DATASET))
    reports = {m: evaluate_method(compute_factors(pulses, MethodSpec(m)), method=m) for m in METHOD_NAMES}
    two_peak = sum(not r.failure for r in reports.values())
    sweep = NoiseSweep((0.01,), repetitions=int(os.environ.get("NGPSD_DATASET_REPS", "20")))
    noisy = run_sweep(pulses, [MethodSpec("hqcscm"), MethodSpec("fga")], sweep)
    hq, fga = noisy.cell("hqcscm", 0.01).mean_fom, noisy.cell("fga", 0.01).mean_fom
    ok = two_peak >= 5 and hq > fga
    assert acceptance_report(10, ok, f"{two_peak}/7 two-peak fits; at variance 0.01 HQC-SCM {hq:.3f} vs FGA {fga:.3f}")

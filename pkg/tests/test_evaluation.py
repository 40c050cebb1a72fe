import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import curve_fit

from ngpsd.evaluation import (
    DoubleGaussianFit,
    FitFailure,
    Histogram,
    HistogramFailure,
    build_histogram,
    classify,
    compute_fom,
    dividing_point,
    evaluate_method,
    fit_double_gaussian,
    gaussian,
    write_report_csv,
    write_report_json,
)


def mixture(rng, n, mu_g=0.3, s_g=0.03, mu_n=0.7, s_n=0.03, frac=0.5):
    k = int(n * frac)
    return np.r_[rng.normal(mu_g, s_g, k), rng.normal(mu_n, s_n, n - k)]


def exact_histogram(mu_g, s_g, mu_n, s_n, amp=1000.0, lo=0.0, hi=1.0, n_bins=100):
    edges = np.linspace(lo, hi, n_bins + 1)
    c = 0.5 * (edges[:-1] + edges[1:])
    counts = np.round(gaussian(c, amp, mu_g, s_g) + gaussian(c, amp, mu_n, s_n))
    return Histogram(edges, counts)


def make_fit(mu_g, s_g, mu_n, s_n):
    return DoubleGaussianFit(mu_g, s_g, 1.0, mu_n, s_n, 1.0)


# ------------------------------------------------------------------ histogram


def test_histogram_endpoints():
    h = build_histogram([0.0, 1.0], 10)
    assert h.counts[0] == 1 and h.counts[-1] == 1 and h.counts.sum() == 2


def test_histogram_mode_location():
    x = np.random.default_rng(5).normal(0.5, 0.01, 1000)
    h = build_histogram(x, 100)
    assert abs(h.centers[np.argmax(h.counts)] - 0.5) < 0.01


def test_histogram_constant_fails():
    with pytest.raises(HistogramFailure):
        build_histogram(np.full(50, 3.0))


def test_histogram_skips_nonfinite():
    h = build_histogram([0.0, np.nan, 1.0, np.inf, 0.5], 10)
    assert h.counts.sum() == 3
    assert np.all(np.diff(h.bin_edges) > 0) and h.counts.size == h.bin_edges.size - 1


# ------------------------------------------------------------------------ fit


def test_fit_exact_mixture():
    fit = fit_double_gaussian(exact_histogram(0.3, 0.03, 0.7, 0.03))
    assert abs(fit.mu_g - 0.3) < 1e-3 and abs(fit.mu_n - 0.7) < 1e-3
    assert fit.sigma_g == pytest.approx(0.03, rel=0.02)
    assert fit.sigma_n == pytest.approx(0.03, rel=0.02)
    assert fit.converged and fit.mu_g < fit.mu_n


def test_fit_single_peak_fails():
    edges = np.linspace(0, 1, 101)
    c = 0.5 * (edges[:-1] + edges[1:])
    with pytest.raises(FitFailure):
        fit_double_gaussian(Histogram(edges, np.round(gaussian(c, 500, 0.5, 0.05))))


def test_fit_mirror_symmetry():
    h = exact_histogram(0.3, 0.025, 0.65, 0.04)
    mirrored = Histogram(1.0 - h.bin_edges[::-1], h.counts[::-1])
    a, b = fit_double_gaussian(h), fit_double_gaussian(mirrored)
    assert b.mu_g == pytest.approx(1 - a.mu_n, abs=1e-6)
    assert b.mu_n == pytest.approx(1 - a.mu_g, abs=1e-6)
    assert b.sigma_g == pytest.approx(a.sigma_n, rel=1e-6)
    assert b.sigma_n == pytest.approx(a.sigma_g, rel=1e-6)


def test_fit_residual_history_non_increasing():
    x = mixture(np.random.default_rng(1), 4000)
    fit = fit_double_gaussian(build_histogram(x))
    assert len(fit.history) >= 2
    assert all(b <= a for a, b in zip(fit.history, fit.history[1:]))
    assert fit.residual == pytest.approx(fit.history[-1])


def test_fit_agrees_with_scipy_curve_fit():
    x = mixture(np.random.default_rng(2), 20000, 0.2, 0.04, 0.6, 0.05, frac=0.6)
    h = build_histogram(x)
    fit = fit_double_gaussian(h)

    def model(c, a1, m1, s1, a2, m2, s2):
        return gaussian(c, a1, m1, s1) + gaussian(c, a2, m2, s2)

    p0 = [h.counts.max(), 0.25, 0.05, h.counts.max() / 2, 0.55, 0.05]
    ref, _ = curve_fit(model, h.centers, h.counts, p0=p0, maxfev=20000)
    ours = [fit.amp_g, fit.mu_g, fit.sigma_g, fit.amp_n, fit.mu_n, fit.sigma_n]
    ref[[2, 5]] = np.abs(ref[[2, 5]])
    np.testing.assert_allclose(ours, ref, rtol=1e-5)


# -------------------------------------------------------------- FOM and D


def test_fom_arithmetic():
    assert compute_fom(make_fit(0.3, 0.03, 0.7, 0.03)) == pytest.approx(2.831, abs=1e-3)


def test_fom_zero_separation_and_width_scaling():
    assert compute_fom(make_fit(0.5, 0.03, 0.5, 0.03)) == 0
    base = compute_fom(make_fit(0.3, 0.03, 0.7, 0.05))
    assert compute_fom(make_fit(0.3, 0.06, 0.7, 0.10)) == pytest.approx(base / 2)


def test_fom_requires_converged_fit():
    fit = make_fit(0.3, 0.03, 0.7, 0.03)
    fit.converged = False
    with pytest.raises(FitFailure):
        compute_fom(fit)
    with pytest.raises(FitFailure):
        dividing_point(fit)


def test_dividing_point_examples():
    assert dividing_point(make_fit(0.3, 0.03, 0.7, 0.03)) == pytest.approx(0.5)
    assert dividing_point(make_fit(1.0, 0.2, 3.0, 0.2)) == pytest.approx(2.0)
    assert dividing_point(make_fit(0.2, 0.0, 0.9, 0.0)) == pytest.approx(0.55)


def test_classify_examples():
    labels, failed = classify([0.2, 0.8], 0.5)
    assert labels.tolist() == [0, 1] and not failed.any()
    assert classify([0.5], 0.5)[0].tolist() == [0]
    assert classify([0.1, 0.2, 0.3], 0.5)[0].tolist() == [0, 0, 0]
    labels, failed = classify([np.nan, 0.9], 0.5)
    assert labels.tolist() == [0, 1] and failed.tolist() == [True, False]


@given(
    x=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50),
    d1=st.floats(-1e3, 1e3),
    d2=st.floats(-1e3, 1e3),
)
def test_classify_monotone_in_threshold(x, d1, d2):
    lo, hi = sorted((d1, d2))
    assert np.all(classify(x, hi)[0] <= classify(x, lo)[0])


# ------------------------------------------------------------- evaluate


def test_evaluate_well_separated():
    x = mixture(np.random.default_rng(3), 2000)
    r = evaluate_method(x)
    assert not r.failure and r.fom > 0
    assert r.classifications.shape == x.shape


def test_evaluate_constant_fails_at_histogram():
    r = evaluate_method(np.full(500, 1.0))
    assert r.failure and r.stage == "histogram" and r.classifications is None


def test_evaluate_too_few_factors():
    r = evaluate_method(np.r_[mixture(np.random.default_rng(0), 50), np.full(200, np.nan)])
    assert r.failure and r.stage == "input"


def test_evaluate_single_population_fails_at_fit():
    r = evaluate_method(np.random.default_rng(4).normal(0, 1, 3000))
    assert r.failure and r.stage == "fit"


def test_evaluate_negative_factors():
    x = mixture(np.random.default_rng(6), 2000)
    a, b = evaluate_method(x), evaluate_method(x - 10.0)
    assert not b.failure
    assert b.fom == pytest.approx(a.fom, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    a=st.sampled_from([0.5, 2.0, 4.0, 1e-3, 37.0]),
    b=st.floats(-100, 100),
)
def test_affine_equivariance(seed, a, b):
    x = mixture(np.random.default_rng(seed), 2000, s_g=0.04, s_n=0.05)
    r0, r1 = evaluate_method(x), evaluate_method(a * x + b)
    assert not r0.failure and not r1.failure
    assert r1.fom == pytest.approx(r0.fom, rel=1e-7)
    assert r1.fit.mu_g == pytest.approx(a * r0.fit.mu_g + b, rel=1e-6, abs=1e-6 * a)
    assert r1.fit.sigma_n == pytest.approx(a * r0.fit.sigma_n, rel=1e-6)
    assert r1.dividing_point == pytest.approx(a * r0.dividing_point + b, rel=1e-6, abs=1e-6 * a)


def test_negation_preserves_fom():
    x = mixture(np.random.default_rng(8), 3000, 0.3, 0.03, 0.7, 0.05)
    r0, r1 = evaluate_method(x), evaluate_method(-x)
    assert r1.fom == pytest.approx(r0.fom, rel=1e-7)
    assert r1.fit.sigma_g == pytest.approx(r0.fit.sigma_n, rel=1e-6)
    # labels swap except for pulses sitting between the two dividing points
    agree = np.mean(r1.classifications == 1 - r0.classifications)
    assert agree > 0.99


# -------------------------------------------------------------------- output


def test_report_files(tmp_path):
    x = np.r_[mixture(np.random.default_rng(9), 1000), np.nan]
    r = evaluate_method(x, method="cc")
    write_report_csv(r, tmp_path / "f.csv")
    write_report_json(r, tmp_path / "f.json")
    rows = list(csv.reader((tmp_path / "f.csv").open()))
    assert rows[0] == ["pulse_index", "factor", "label"]
    assert len(rows) == 1 + x.size
    assert rows[-1][1:] == ["NA", "NA"]
    assert float(rows[1][1]) == x[0]
    doc = json.loads((tmp_path / "f.json").read_text())
    assert doc["method"] == "cc" and doc["fom"] == pytest.approx(r.fom)
    assert doc["n_pulse_failures"] == 1 and doc["fit"]["mu_g"] < doc["fit"]["mu_n"]


def test_failed_report_files(tmp_path):
    r = evaluate_method(np.full(200, 2.0))
    write_report_csv(r, tmp_path / "f.csv")
    write_report_json(r, tmp_path / "f.json")
    assert all(row[2] == "NA" for row in list(csv.reader((tmp_path / "f.csv").open()))[1:])
    doc = json.loads((tmp_path / "f.json").read_text())
    assert doc["failure"] is True and doc["fom"] is None and doc["stage"] == "histogram"

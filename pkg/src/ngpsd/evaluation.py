"""Histogram, double-Gaussian fit, figure of merit, dividing point and labelling.

The gamma population is the left-hand Gaussian and the neutron population the
right-hand one. Fitting happens in bin-index coordinates (bin centres mapped
to (0, 1), counts scaled to unit maximum), which makes the whole pipeline
equivariant under affine maps of the factors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import find_peaks

from .errors import PsdError

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
MAX_ITER = 200
DEFAULT_BINS = 100
MIN_FACTORS = 100


class HistogramFailure(PsdError):
    pass


class FitFailure(PsdError):
    def __init__(self, message: str, fit: Optional["DoubleGaussianFit"] = None):
        super().__init__(message)
        self.fit = fit


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def n_bins(self) -> int:
        return self.counts.size


@dataclass
class DoubleGaussianFit:
    """Two Gaussian populations; ``amp_*`` are peak heights in counts per bin."""

    mu_g: float
    sigma_g: float
    amp_g: float
    mu_n: float
    sigma_n: float
    amp_n: float
    converged: bool = True
    residual: float = 0.0
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    def curve(self, x) -> np.ndarray:
        return gaussian(x, self.amp_g, self.mu_g, self.sigma_g) + gaussian(
            x, self.amp_n, self.mu_n, self.sigma_n
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("history")
        return d


def gaussian(x, amp, mu, sigma):
    return amp * np.exp(-0.5 * ((np.asarray(x) - mu) / sigma) ** 2)


# ------------------------------------------------------------------ histogram


def build_histogram(factors, n_bins: int = DEFAULT_BINS) -> Histogram:
    """Equal-width bins spanning the finite factors; NaN/inf entries are skipped."""
    if n_bins < 10:
        raise ValueError("n_bins must be >= 10")
    x = np.asarray(factors, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 2 or x.min() == x.max():
        raise HistogramFailure("need at least two distinct finite factors")
    counts, edges = np.histogram(x, bins=n_bins, range=(x.min(), x.max()))
    return Histogram(edges, counts)


# ---------------------------------------------------------------------- fitting


def smooth3(counts: np.ndarray) -> np.ndarray:
    padded = np.pad(np.asarray(counts, dtype=float), 1, mode="edge")
    return (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0


def find_two_peaks(
    counts: np.ndarray, valley_ratio: float = 0.8, min_height_ratio: float = 0.05
) -> tuple[int, int]:
    """Indices (ascending) of the two most prominent peaks of the smoothed histogram.

    Only peaks reaching ``min_height_ratio`` of the tallest bin count, so lone
    outliers cannot pose as a population. The weaker peak must be separated
    from the stronger one by a dip below ``valley_ratio`` times its own
    height, i.e. its prominence must reach ``(1 - valley_ratio)`` of its
    height. Ranking by prominence rather than height keeps comb artefacts of
    integer-valued factors from posing as modes.
    """
    s = smooth3(counts)
    padded = np.concatenate([[0.0], s, [0.0]])
    peaks, props = find_peaks(padded, prominence=0, height=min_height_ratio * s.max())
    if peaks.size < 2:
        raise FitFailure("histogram has fewer than two peaks")
    order = np.lexsort((peaks, -props["prominences"]))
    first, second = order[0], order[1]
    idx = peaks[[first, second]] - 1
    if props["prominences"][second] < (1 - valley_ratio) * s[idx[1]]:
        raise FitFailure("no second peak separated by a valley")
    lo, hi = sorted(int(i) for i in idx)
    return lo, hi


def _initial_sigma(s: np.ndarray, peak: int, direction: int, limit: float) -> float:
    half = 0.5 * s[peak]
    i = peak
    while 0 <= i + direction < s.size and s[i + direction] > half:
        i += direction
    hwhm = abs(i - peak) + 0.5
    return min(max(hwhm / (0.5 * FWHM_PER_SIGMA), 0.5), limit)


def _model_and_jacobian(u: np.ndarray, p: np.ndarray):
    cols = []
    total = np.zeros_like(u)
    for a, m, s in (p[:3], p[3:]):
        z = (u - m) / s
        e = np.exp(-0.5 * z * z)
        total += a * e
        cols += [e, a * e * z / s, a * e * z * z / s]
    return total, np.column_stack(cols)


def levenberg_marquardt(u: np.ndarray, y: np.ndarray, p0: np.ndarray, max_iter: int = MAX_ITER):
    """Minimise ||y - model(u, p)||^2 for the two-Gaussian model.

    Returns ``(p, sse, converged, iterations, history)``; ``history`` holds the
    SSE after every accepted step and is non-increasing by construction.
    """
    p = p0.astype(float).copy()
    model, J = _model_and_jacobian(u, p)
    r = y - model
    sse = float(r @ r)
    history = [sse]
    lam = 1e-3
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1e-12
        try:
            step = np.linalg.solve(A + lam * np.diag(diag), g)
        except np.linalg.LinAlgError:
            return p, sse, False, it, history
        if not np.all(np.isfinite(step)):
            return p, sse, False, it, history
        trial = p + step
        t_model, t_J = _model_and_jacobian(u, trial)
        t_r = y - t_model
        t_sse = float(t_r @ t_r)
        if np.isfinite(t_sse) and t_sse < sse:
            small_gain = sse - t_sse <= 1e-12 * sse
            small_step = np.max(np.abs(step)) <= 1e-10 * (np.max(np.abs(trial)) + 1e-12)
            p, r, J, sse = trial, t_r, t_J, t_sse
            history.append(sse)
            lam = max(lam / 3.0, 1e-12)
            if small_gain or small_step or sse == 0.0:
                return p, sse, True, it, history
        else:
            lam *= 4.0
            if lam > 1e16:
                # no descent direction left at working precision
                return p, sse, True, it, history
    return p, sse, False, max_iter, history


def fit_double_gaussian(h: Histogram) -> DoubleGaussianFit:
    """Least-squares two-Gaussian fit to bin centres and counts.

    Raises :class:`FitFailure` when fewer than two separated peaks exist, the
    iteration does not converge, or a fitted width, height or centre is
    unphysical.
    """
    counts = np.asarray(h.counts, dtype=float)
    n = counts.size
    ymax = counts.max()
    if not ymax > 0:
        raise FitFailure("empty histogram")
    i1, i2 = find_two_peaks(counts)
    s = smooth3(counts)
    limit = (i2 - i1) / 2.0
    p0 = np.array(
        [
            s[i1] / ymax, (i1 + 0.5) / n, _initial_sigma(s, i1, -1, limit) / n,
            s[i2] / ymax, (i2 + 0.5) / n, _initial_sigma(s, i2, +1, limit) / n,
        ]
    )
    u = (np.arange(n) + 0.5) / n
    p, sse, converged, iters, history = levenberg_marquardt(u, counts / ymax, p0)
    comps = sorted([(p[1], abs(p[2]), p[0]), (p[4], abs(p[5]), p[3])])
    lo, width = float(h.bin_edges[0]), float(h.bin_edges[-1] - h.bin_edges[0])
    (mg, sg, ag), (mn, sn, an) = comps
    fit = DoubleGaussianFit(
        mu_g=lo + mg * width,
        sigma_g=sg * width,
        amp_g=ag * ymax,
        mu_n=lo + mn * width,
        sigma_n=sn * width,
        amp_n=an * ymax,
        converged=converged,
        residual=sse * ymax * ymax,
        iterations=iters,
        history=[v * ymax * ymax for v in history],
    )
    if not converged:
        raise FitFailure("fit did not converge", fit)
    if not (sg > 0 and sn > 0 and np.isfinite([sg, sn]).all()):
        raise FitFailure("non-positive fitted sigma", fit)
    if not (ag > 0 and an > 0):
        raise FitFailure("non-positive fitted amplitude", fit)
    if not (0.0 <= mg < mn <= 1.0):
        raise FitFailure("fitted means outside the histogram or coincident", fit)
    return fit


# ------------------------------------------------------------ figures of merit


def fwhm(sigma: float) -> float:
    return FWHM_PER_SIGMA * sigma


def compute_fom(fit: DoubleGaussianFit) -> float:
    """Peak separation over the summed FWHMs of the two populations."""
    if not fit.converged:
        raise FitFailure("figure of merit needs a converged fit", fit)
    return (fit.mu_n - fit.mu_g) / (fwhm(fit.sigma_n) + fwhm(fit.sigma_g))


def dividing_point(fit: DoubleGaussianFit) -> float:
    """Midpoint between the gamma +3 sigma point and the neutron -3 sigma point."""
    if not fit.converged:
        raise FitFailure("dividing point needs a converged fit", fit)
    return ((fit.mu_g + 3 * fit.sigma_g) + (fit.mu_n - 3 * fit.sigma_n)) / 2


def classify(factors, D: float):
    """Label factors above ``D`` as neutrons (1), the rest as gamma rays (0).

    Returns ``(labels, failed)``; non-finite factors get label 0 and failed=True.
    """
    x = np.asarray(factors, dtype=float)
    failed = ~np.isfinite(x)
    with np.errstate(invalid="ignore"):
        labels = np.where(failed, 0, x > D).astype(int)
    return labels, failed


# --------------------------------------------------------------------- reports


@dataclass
class MethodReport:
    factors: np.ndarray
    fit: Optional[DoubleGaussianFit] = None
    fom: float = math.nan
    dividing_point: float = math.nan
    classifications: Optional[np.ndarray] = None
    failure: bool = False
    stage: Optional[str] = None
    reason: Optional[str] = None
    histogram: Optional[Histogram] = None
    method: Optional[str] = None
    orientation: str = "signed"

    @property
    def pulse_failures(self) -> np.ndarray:
        return ~np.isfinite(self.factors)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "failure": self.failure,
            "stage": self.stage,
            "reason": self.reason,
            "fom": None if math.isnan(self.fom) else self.fom,
            "dividing_point": None if math.isnan(self.dividing_point) else self.dividing_point,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "orientation": self.orientation,
            "n_pulses": int(self.factors.size),
            "n_pulse_failures": int(self.pulse_failures.sum()),
        }


def evaluate_method(factors, n_bins: int = DEFAULT_BINS, method: Optional[str] = None) -> MethodReport:
    """Histogram, fit, FOM, dividing point and labels; failures end up in the report."""
    x = np.asarray(factors, dtype=float)
    report = MethodReport(factors=x, method=method)

    def fail(stage, exc, fit=None):
        report.failure, report.stage, report.reason = True, stage, str(exc)
        report.fit = fit
        return report

    if np.isfinite(x).sum() < MIN_FACTORS:
        return fail("input", f"fewer than {MIN_FACTORS} finite factors")
    try:
        report.histogram = build_histogram(x, n_bins)
    except HistogramFailure as exc:
        return fail("histogram", exc)
    try:
        fit = fit_double_gaussian(report.histogram)
    except FitFailure as exc:
        return fail("fit", exc, exc.fit)
    report.fit = fit
    report.fom = compute_fom(fit)
    report.dividing_point = dividing_point(fit)
    report.classifications, _ = classify(x, report.dividing_point)
    return report


def _fmt(v: float) -> str:
    return "NA" if not np.isfinite(v) else repr(float(v))


def write_report_csv(report: MethodReport, path) -> None:
    """``pulse_index,factor,label`` with NA for failed pulses or a failed report."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pulse_index", "factor", "label"])
        for i, v in enumerate(report.factors):
            if report.classifications is None or not np.isfinite(v):
                label = "NA"
            else:
                label = str(int(report.classifications[i]))
            w.writerow([i, _fmt(v), label])


def write_report_json(report: MethodReport, path) -> None:
    Path(path).write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")

"""Classical discrimination factors: zero crossing, charge comparison, FEPS and FGA.

Every factor has a single-pulse form that raises :class:`DiscriminationFailure`
and a batch form over a 2-D sample array that marks failed pulses with NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .errors import DiscriminationFailure, ParameterError
from .pulses import Pulse


@dataclass(frozen=True)
class ZcParams:
    """CR-RC^2 shaping time ``tau`` in seconds.

    ``as_printed`` swaps the feedback coefficients to 3*d**2, -3*d, d**3.
    That variant is unstable for d close to 1.
    """

    tau: float = 100e-9
    as_printed: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError("tau must be positive")


@dataclass(frozen=True)
class CcWindows:
    """Integration windows in ns. The slow window starts ``slow_start_offset``
    after the peak (clamped to the record start); both end at ``total_end``,
    or at the record end when it is None."""

    slow_start_offset: float = 25.0
    total_end: Optional[float] = None

    def __post_init__(self):
        if self.total_end is not None and not self.total_end > 0:
            raise ParameterError("total_end must be positive")


@dataclass(frozen=True)
class FepsParams:
    ut_fraction: float = 0.5
    lt_fraction: float = 0.10
    as_printed: bool = False

    def __post_init__(self):
        if not self.lt_fraction < self.ut_fraction:
            raise ParameterError("upper threshold must exceed the lower threshold")
        if not 0.30 <= self.ut_fraction <= 0.90:
            raise ParameterError("ut_fraction must lie in [0.30, 0.90]")


@dataclass(frozen=True)
class FgaParams:
    f_bin: int = 1

    def __post_init__(self):
        if self.f_bin < 1:
            raise ParameterError("f_bin must be >= 1")


# ------------------------------------------------------------------ CR-RC^2


def cr_rc2_coefficients(tau: float, T: float, as_printed: bool = False):
    """Return ``(b, a)`` in :func:`scipy.signal.lfilter` convention."""
    d = math.exp(-T / tau)
    w = 1.0 / tau
    b = [0.0, T * d * (1 - w * T / 2), -T * d * d * (1 + w * T / 2)]
    if as_printed:
        a = [1.0, -3 * d * d, 3 * d, -(d**3)]
    else:
        a = [1.0, -3 * d, 3 * d * d, -(d**3)]
    return np.array(b), np.array(a)


def shape_rows(data: np.ndarray, dt: float, p: ZcParams) -> np.ndarray:
    b, a = cr_rc2_coefficients(p.tau, dt, p.as_printed)
    return lfilter(b, a, data, axis=-1)


def cr_rc2_shape(pulse: Pulse, p: ZcParams = ZcParams()) -> np.ndarray:
    """Bipolar CR-RC^2 output, zero initial state, same length as the pulse."""
    return shape_rows(pulse.samples, pulse.dt, p)


def crossing_index(shaped: np.ndarray) -> np.ndarray:
    """Fractional index of the first sign change after the global |extremum|.

    Works along the last axis; NaN where the signal never changes sign.
    """
    y = np.atleast_2d(shaped)
    n = y.shape[-1]
    ext = np.argmax(np.abs(y), axis=-1)
    sign = np.sign(y[np.arange(y.shape[0]), ext])[:, None]
    after = np.arange(n)[None, :] > ext[:, None]
    mask = after & (sign * y <= 0) & (sign != 0)
    found = mask.any(axis=-1)
    first = np.argmax(mask, axis=-1)
    rows = np.arange(y.shape[0])
    prev = y[rows, first - 1]
    cur = y[rows, first]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(cur == 0, 1.0, prev / (prev - cur))
    out = np.where(found, first - 1 + frac, np.nan)
    return out if np.ndim(shaped) > 1 else out[0]


def zc_factors(data: np.ndarray, dt: float, p: ZcParams = ZcParams()) -> np.ndarray:
    return crossing_index(shape_rows(data, dt, p)) * dt


def zc_factor(pulse: Pulse, p: ZcParams = ZcParams()) -> float:
    """Zero-crossing time (seconds from record start) of the shaped pulse."""
    r = float(zc_factors(pulse.samples[None, :], pulse.dt, p)[0])
    if math.isnan(r):
        raise DiscriminationFailure("shaped signal has no zero crossing")
    return r


# ------------------------------------------------------------ charge comparison


def _ns_to_samples(ns: float, dt: float) -> int:
    return int(round(ns * 1e-9 / dt))


def cc_factors(data: np.ndarray, dt: float, w: CcWindows = CcWindows()) -> np.ndarray:
    data = np.atleast_2d(data)
    n = data.shape[-1]
    end = n if w.total_end is None else min(n, _ns_to_samples(w.total_end, dt))
    start = np.clip(np.argmax(data, axis=-1) + _ns_to_samples(w.slow_start_offset, dt), 0, None)
    csum = np.concatenate([np.zeros((data.shape[0], 1)), np.cumsum(data, axis=-1)], axis=-1)
    q_total = csum[:, end]
    rows = np.arange(data.shape[0])
    q_slow = np.where(start < end, q_total - csum[rows, np.minimum(start, end)], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q_total > 0, q_slow / q_total, np.nan)


def cc_factor(pulse: Pulse, w: CcWindows = CcWindows()) -> float:
    """Slow-to-total charge ratio Q_s / Q."""
    r = float(cc_factors(pulse.samples, pulse.dt, w)[0])
    if math.isnan(r):
        raise DiscriminationFailure("total charge is not positive")
    return r


# ------------------------------------------------------------------------ FEPS


def _falling_crossing(y: np.ndarray, peak_idx: np.ndarray, level: np.ndarray) -> np.ndarray:
    n = y.shape[-1]
    rows = np.arange(y.shape[0])
    mask = (np.arange(n)[None, :] > peak_idx[:, None]) & (y <= level[:, None])
    found = mask.any(axis=-1)
    k = np.argmax(mask, axis=-1)
    prev, cur = y[rows, k - 1], y[rows, k]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(prev == cur, 1.0, (prev - level) / (prev - cur))
    return np.where(found, k - 1 + frac, np.nan)


def feps_factors(data: np.ndarray, dt: float, p: FepsParams = FepsParams()) -> np.ndarray:
    """Falling-edge slope in volts per ns (negative for decaying edges)."""
    y = np.atleast_2d(data)
    peak_idx = np.argmax(y, axis=-1)
    peak = y[np.arange(y.shape[0]), peak_idx]
    dt_ns = dt * 1e9
    psi_x = _falling_crossing(y, peak_idx, p.ut_fraction * peak) * dt_ns
    phi_x = _falling_crossing(y, peak_idx, p.lt_fraction * peak) * dt_ns
    psi_y, phi_y = p.ut_fraction * peak, p.lt_fraction * peak
    with np.errstate(divide="ignore", invalid="ignore"):
        if p.as_printed:
            r = (psi_y - phi_x) / (psi_x - phi_y)
        else:
            r = (psi_y - phi_y) / (psi_x - phi_x)
    r[~(peak > 0)] = np.nan
    r[~np.isfinite(r)] = np.nan
    return r


def feps_factor(pulse: Pulse, p: FepsParams = FepsParams()) -> float:
    r = float(feps_factors(pulse.samples, pulse.dt, p)[0])
    if math.isnan(r):
        raise DiscriminationFailure("falling edge does not cross both thresholds")
    return r


# ------------------------------------------------------------------------- FGA


def fga_factors(data: np.ndarray, dt: float, p: FgaParams = FgaParams()) -> np.ndarray:
    data = np.atleast_2d(data)
    n = data.shape[-1]
    if n < 2 * p.f_bin:
        raise ParameterError(f"f_bin {p.f_bin} exceeds the Nyquist bin for {n} samples")
    mag = np.abs(np.fft.rfft(data, axis=-1))
    f = p.f_bin / (n * dt)
    return np.abs(mag[:, 0] - mag[:, p.f_bin]) / f


def fga_factor(pulse: Pulse, p: FgaParams = FgaParams()) -> float:
    """| |X(0)| - |X(f)| | / f with f the frequency of DFT bin ``f_bin`` in Hz."""
    return float(fga_factors(pulse.samples, pulse.dt, p)[0])

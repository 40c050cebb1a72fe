"""Spiking-neuron discriminators: PCNN, QC-SCM, ladder gradient and HQC-SCM.

Neurons form a 1-D chain, one per sample, so coupling kernels are short
symmetric vectors centred on the neuron (zero self weight). The stimulus is
the pulse scaled to unit peak. All runners accept arrays of shape
``(..., n_samples)`` and evolve every row independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DiscriminationFailure, ParameterError
from .pulses import Pulse, PulseSet, average_pulse, normalize_peak

DEFAULT_KERNEL = (0.5, 0.0, 0.5)


def _check_kernel(kernel) -> tuple:
    k = tuple(float(v) for v in kernel)
    if len(k) % 2 != 1:
        raise ParameterError("coupling kernel must have odd length")
    if k != k[::-1]:
        raise ParameterError("coupling kernel must be symmetric")
    if k[len(k) // 2] != 0:
        raise ParameterError("coupling kernel must have zero self weight")
    return k


def couple(Y: np.ndarray, kernel) -> np.ndarray:
    """Weighted neighbour sum with zero padding: out[i] = sum_j kernel[j] * Y[i + j - r]."""
    r = len(kernel) // 2
    n = Y.shape[-1]
    acc = np.zeros(Y.shape)
    for j, w in enumerate(kernel):
        off = j - r
        if w == 0 or abs(off) >= n:
            continue
        if off < 0:
            acc[..., -off:] += w * Y[..., : n + off]
        elif off > 0:
            acc[..., : n - off] += w * Y[..., off:]
        else:
            acc += w * Y
    return acc


def fires_sigmoid(u, theta):
    """Firing rule written as logistic(U - theta) > 1/2.

    logistic(x) - 1/2 == tanh(x/2)/2 has the sign of tanh(x). Using tanh keeps
    the sign of tiny x that 1/(1 + exp(-x)) would round away.
    """
    return np.tanh(np.asarray(u) - np.asarray(theta)) > 0


@dataclass(frozen=True)
class IgnitionMap:
    counts: np.ndarray
    iterations: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return self.counts.shape[-1]


# ------------------------------------------------------------------------ PCNN


@dataclass(frozen=True)
class PcnnParams:
    alpha_F: float = 0.1
    alpha_L: float = 1.0
    alpha_theta: float = 0.2
    V_F: float = 0.5
    V_L: float = 0.2
    V_theta: float = 20.0
    beta: float = 0.1
    M_kernel: tuple = DEFAULT_KERNEL
    W_kernel: tuple = DEFAULT_KERNEL
    n_iter: int = 40
    theta0: float = 1.0

    def __post_init__(self):
        for name in ("alpha_F", "alpha_L", "alpha_theta", "V_F", "V_L", "V_theta"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.beta < 0:
            raise ParameterError("beta must be >= 0")
        if self.n_iter < 1:
            raise ParameterError("n_iter must be >= 1")
        object.__setattr__(self, "M_kernel", _check_kernel(self.M_kernel))
        object.__setattr__(self, "W_kernel", _check_kernel(self.W_kernel))


def fires(u, theta):
    """Neuron output: 1 iff U > theta (an exact tie does not fire)."""
    return u > theta


def pcnn_steps(stimulus: np.ndarray, p: PcnnParams = PcnnParams()):
    """Yield ``(F, L, U, theta, Y)`` after every iteration."""
    S = np.asarray(stimulus, dtype=float)
    F = np.zeros(S.shape)
    L = np.zeros(S.shape)
    Y = np.zeros(S.shape)
    theta = np.full(S.shape, float(p.theta0))
    decay_F = math.exp(-p.alpha_F)
    decay_L = math.exp(-p.alpha_L)
    decay_theta = math.exp(-p.alpha_theta)
    for _ in range(p.n_iter):
        F = p.V_F * couple(Y, p.M_kernel) + S + decay_F * F
        L = decay_L * L + p.V_L * couple(Y, p.W_kernel)
        U = F * (1 + p.beta * L)
        theta = decay_theta * theta + p.V_theta * Y
        Y = fires(U, theta).astype(float)
        yield F, L, U, theta, Y


def pcnn_counts(stimulus: np.ndarray, p: PcnnParams = PcnnParams()) -> np.ndarray:
    counts = np.zeros(np.shape(stimulus), dtype=np.int64)
    for *_, Y in pcnn_steps(stimulus, p):
        counts += Y.astype(np.int64)
    return counts


def pcnn_run(pulse: Pulse, p: PcnnParams = PcnnParams()) -> IgnitionMap:
    """Ignition map of a pulse; the pulse is expected at unit peak."""
    return IgnitionMap(pcnn_counts(pulse.samples, p), p.n_iter)


def window_bounds(peak_index, n: int, dt: float, window_pre: float, window_post: float):
    """Half-open sample window [peak - pre, peak + post), clipped to the record.

    ``window_pre`` and ``window_post`` are in ns.
    """
    dt_ns = dt * 1e9
    lo = np.clip(np.asarray(peak_index) - int(round(window_pre / dt_ns)), 0, n)
    hi = np.clip(np.asarray(peak_index) + int(round(window_post / dt_ns)), 0, n)
    return lo, hi


def window_sums(counts: np.ndarray, lo, hi) -> np.ndarray:
    counts = np.atleast_2d(counts)
    csum = np.concatenate([np.zeros((counts.shape[0], 1)), np.cumsum(counts, axis=-1)], axis=-1)
    rows = np.arange(counts.shape[0])
    hi = np.maximum(hi, lo)
    return csum[rows, hi] - csum[rows, lo]


def pcnn_factor(
    imap: IgnitionMap, pulse: Pulse, window_pre: float = 15.0, window_post: float = 125.0
) -> float:
    """Ignition counts summed over the window around the pulse peak."""
    lo, hi = window_bounds(pulse.peak_index, len(imap), pulse.dt, window_pre, window_post)
    if hi <= lo:
        raise ParameterError("integration window is empty")
    return float(window_sums(imap.counts, np.array([lo]), np.array([hi]))[0])


# ---------------------------------------------------------------------- QC-SCM


@dataclass(frozen=True)
class QcScmParams:
    """Quasi-continuous SCM. ``dt_step`` is the fractional iteration step and
    the model runs ceil(t_end / dt_step) steps."""

    f_decay: float = 0.9
    g_decay: float = 0.5
    h: float = 3.0
    dt_step: float = 0.5
    W_kernel: tuple = DEFAULT_KERNEL
    t_end: float = 40.0
    theta0: float = 1.0

    def __post_init__(self):
        if not 0 < self.f_decay < 1:
            raise ParameterError("f_decay must lie in (0, 1)")
        if not 0 < self.g_decay < 1:
            raise ParameterError("g_decay must lie in (0, 1)")
        if not self.h > 0:
            raise ParameterError("h must be positive")
        if not 0 < self.dt_step <= 1:
            raise ParameterError("dt_step must lie in (0, 1]")
        if not self.t_end > 0:
            raise ParameterError("t_end must be positive")
        object.__setattr__(self, "W_kernel", _check_kernel(self.W_kernel))

    @property
    def n_steps(self) -> int:
        return math.ceil(round(self.t_end / self.dt_step, 9))


def qcscm_steps(stimulus: np.ndarray, p: QcScmParams = QcScmParams()):
    """Yield ``(U, theta, Y)`` after every step of size ``p.dt_step``."""
    S = np.asarray(stimulus, dtype=float)
    U = np.zeros(S.shape)
    Y = np.zeros(S.shape)
    theta = np.full(S.shape, float(p.theta0))
    f = math.pow(p.f_decay, p.dt_step)
    g = math.pow(p.g_decay, p.dt_step)
    for _ in range(p.n_steps):
        U = f * U + S * (1 + couple(Y, p.W_kernel))
        theta = g * theta + p.h * Y
        Y = fires(U, theta).astype(float)
        yield U, theta, Y


def qcscm_counts(stimulus: np.ndarray, p: QcScmParams = QcScmParams()) -> np.ndarray:
    counts = np.zeros(np.shape(stimulus), dtype=np.int64)
    for *_, Y in qcscm_steps(stimulus, p):
        counts += Y.astype(np.int64)
    return counts


def qcscm_run(pulse: Pulse, p: QcScmParams = QcScmParams()) -> IgnitionMap:
    return IgnitionMap(qcscm_counts(pulse.samples, p), p.n_steps)


# ------------------------------------------------------------- ladder gradient


@dataclass(frozen=True)
class LgParams:
    m: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise ParameterError("m must be >= 1")


def modes_after(counts: np.ndarray, start: int) -> list[int]:
    """Local maxima strictly after ``start``.

    A plateau counts once, at its left edge, and only if it is entered from
    below and left towards a lower value.
    """
    c = counts
    n = len(c)
    modes = []
    i = start + 1
    while i < n - 1:
        if c[i] > c[i - 1]:
            j = i
            while j + 1 < n and c[j + 1] == c[i]:
                j += 1
            if j + 1 < n and c[j + 1] < c[i]:
                modes.append(i)
            i = j + 1
        else:
            i += 1
    return modes


def lg_slope(counts: np.ndarray, m: int) -> float:
    """(y_A - y_B) / (x_A - x_B); NaN when fewer than m modes follow the maximum."""
    x_a = int(np.argmax(counts))
    modes = modes_after(counts, x_a)
    if len(modes) < m:
        return math.nan
    x_b = modes[m - 1]
    return float((counts[x_a] - counts[x_b]) / (x_a - x_b))


def lg_factor(imap: IgnitionMap, p: LgParams = LgParams()) -> float:
    r = lg_slope(imap.counts, p.m)
    if math.isnan(r):
        raise DiscriminationFailure(f"fewer than {p.m} modes after the ignition maximum")
    return r


# --------------------------------------------------------------------- HQC-SCM


@dataclass(frozen=True)
class HqcScmParams:
    """Two independent QC-SCMs split at ``split_index``; window in ns around the peak."""

    params_a: QcScmParams = field(default_factory=QcScmParams)
    params_b: QcScmParams = field(default_factory=QcScmParams)
    split_index: Optional[int] = None
    window_pre: float = 15.0
    window_post: float = 125.0


def hqcscm_split_point(pulse_set: PulseSet, fraction: float = 0.05) -> int:
    """First index after the average pulse's peak where it falls to 5 % of the peak."""
    avg = average_pulse(pulse_set).samples
    k = int(np.argmax(avg))
    below = np.nonzero(avg[k + 1 :] <= fraction * avg[k])[0]
    if below.size == 0:
        raise ParameterError("split not found")
    return k + 1 + int(below[0])


def hqcscm_counts(stimulus: np.ndarray, p: HqcScmParams) -> np.ndarray:
    S = np.asarray(stimulus, dtype=float)
    split = p.split_index
    if split is None or not 0 < split < S.shape[-1]:
        raise ParameterError(f"split_index {split} outside (0, {S.shape[-1]})")
    head = qcscm_counts(S[..., :split], p.params_a)
    tail = qcscm_counts(S[..., split:], p.params_b)
    return np.concatenate([head, tail], axis=-1)


def hqcscm_factors(stimulus: np.ndarray, dt: float, p: HqcScmParams) -> np.ndarray:
    S = np.atleast_2d(stimulus)
    counts = hqcscm_counts(S, p)
    lo, hi = window_bounds(np.argmax(S, axis=-1), S.shape[-1], dt, p.window_pre, p.window_post)
    return window_sums(counts, lo, hi)


def hqcscm_factor(pulse: Pulse, p: HqcScmParams) -> float:
    """Windowed ignition sum of the merged HQC-SCM map; all-zero pulses give 0."""
    if not pulse.samples.max() > 0:
        return 0.0
    stim = normalize_peak(pulse).samples
    return float(hqcscm_factors(stim, pulse.dt, p)[0])

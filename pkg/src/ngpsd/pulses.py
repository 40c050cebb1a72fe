"""Pulse data model, text/CSV formats, synthetic pulses, noise and Fourier filtering."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import FormatError, ParameterError, PulseParseError

DEFAULT_DT = 1e-9
MIN_SAMPLES = 16
BASELINE_SAMPLES = 8


@dataclass(frozen=True)
class Pulse:
    """One digitized waveform; ``dt`` is the sampling interval in seconds."""

    samples: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ParameterError("pulse samples must be one-dimensional")
        if samples.size < MIN_SAMPLES:
            raise ParameterError(f"pulse needs at least {MIN_SAMPLES} samples, got {samples.size}")
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("pulse samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def dt_ns(self) -> float:
        return self.dt * 1e9

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.samples))


@dataclass(frozen=True)
class PulseSet:
    """Equal-length pulses stored as a 2-D array (one row per pulse).

    Labels follow the 0 = gamma, 1 = neutron convention.
    """

    data: np.ndarray
    dt: float = DEFAULT_DT
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.array(self.data, dtype=float, ndmin=2)
        if data.ndim != 2:
            raise ParameterError("pulse set data must be 2-D")
        if data.shape[0] and data.shape[1] < MIN_SAMPLES:
            raise ParameterError(f"pulses need at least {MIN_SAMPLES} samples")
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not np.all(np.isfinite(data)):
            raise ParameterError("pulse samples must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (data.shape[0],):
                raise ParameterError("labels must match the pulse count")
            if not np.all((labels == 0) | (labels == 1)):
                raise ParameterError("labels must be 0 (gamma) or 1 (neutron)")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pulses(cls, pulses: Sequence[Pulse], labels=None) -> "PulseSet":
        if not pulses:
            return cls(np.empty((0, MIN_SAMPLES)), labels=labels)
        dts = {p.dt for p in pulses}
        lengths = {len(p) for p in pulses}
        if len(dts) != 1 or len(lengths) != 1:
            raise ParameterError("all pulses must share dt and length")
        return cls(np.stack([p.samples for p in pulses]), dt=dts.pop(), labels=labels)

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, i: int) -> Pulse:
        return Pulse(self.data[i], self.dt)

    @property
    def pulses(self) -> list[Pulse]:
        return [Pulse(row, self.dt) for row in self.data]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def subset(self, index) -> "PulseSet":
        labels = None if self.labels is None else self.labels[index]
        return PulseSet(self.data[index], self.dt, labels)

    def with_data(self, data: np.ndarray) -> "PulseSet":
        return PulseSet(data, self.dt, self.labels)


@dataclass(frozen=True)
class SynthParams:
    """Double-exponential scintillation pulse; times in ns, amplitudes in volts."""

    fast_decay: float = 8.0
    slow_decay: float = 80.0
    slow_fraction: float = 0.15
    rise_time: float = 4.0
    amplitude: float = 1.0
    noise_sigma: float = 0.0
    onset: float = 20.0

    def __post_init__(self):
        if not (self.fast_decay > 0 and self.slow_decay > 0 and self.rise_time > 0):
            raise ParameterError("time constants must be positive")
        if not self.fast_decay < self.slow_decay:
            raise ParameterError("fast_decay must be below slow_decay")
        if not 0 <= self.slow_fraction < 1:
            raise ParameterError("slow_fraction must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be non-negative")
        if self.onset < 0:
            raise ParameterError("onset must be non-negative")


@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    seed: int = 0

    def __post_init__(self):
        if not self.variance >= 0:
            raise ParameterError("noise variance must be >= 0")


# ---------------------------------------------------------------- file formats


def _parse_row(tokens: Sequence[str], row: int) -> np.ndarray:
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise PulseParseError(f"row {row}: {exc}", row) from None
    if not np.all(np.isfinite(values)):
        raise PulseParseError(f"row {row}: non-finite value", row)
    return values


def load_pulses(path, format: str = "text-matrix", dt: float = DEFAULT_DT) -> PulseSet:
    """Read one pulse per row.

    ``text-matrix`` rows are whitespace-separated floats. ``csv`` files carry a
    header ``s0,s1,...`` with an optional trailing ``label`` column. Rows are
    numbered from 1 in error messages.
    """
    path = Path(path)
    if format not in ("text-matrix", "csv"):
        raise ParameterError(f"unknown pulse format {format!r}")
    rows: list[np.ndarray] = []
    labels: list[int] = []
    with path.open(newline="") as fh:
        if format == "text-matrix":
            numbered = ((i, line.split()) for i, line in enumerate(fh, 1))
            has_label = False
        else:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise FormatError("no pulses")
            has_label = bool(header) and header[-1].strip() == "label"
            numbered = enumerate(reader, 1)
        for i, tokens in numbered:
            if not tokens or all(not t.strip() for t in tokens):
                continue
            if has_label:
                *tokens, lab = tokens
                try:
                    labels.append(int(lab))
                except ValueError:
                    raise PulseParseError(f"row {i}: bad label {lab!r}", i) from None
            values = _parse_row(tokens, i)
            if rows and values.size != rows[0].size:
                raise FormatError(f"row {i} has {values.size} samples, expected {rows[0].size}")
            rows.append(values)
    if not rows:
        raise FormatError("no pulses")
    return PulseSet(np.stack(rows), dt=dt, labels=np.array(labels) if has_label else None)


def save_pulses(pulse_set: PulseSet, path, format: Optional[str] = None) -> None:
    """Write a pulse set; labelled sets default to CSV so the labels survive."""
    if len(pulse_set) == 0:
        raise FormatError("no pulses")
    if format is None:
        format = "csv" if pulse_set.labels is not None or str(path).endswith(".csv") else "text-matrix"
    path = Path(path)
    with path.open("w", newline="") as fh:
        if format == "text-matrix":
            for row in pulse_set.data:
                fh.write(" ".join(repr(float(v)) for v in row))
                fh.write("\n")
        elif format == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            header = [f"s{i}" for i in range(pulse_set.n_samples)]
            if pulse_set.labels is not None:
                header.append("label")
            writer.writerow(header)
            for k, row in enumerate(pulse_set.data):
                out = [repr(float(v)) for v in row]
                if pulse_set.labels is not None:
                    out.append(str(int(pulse_set.labels[k])))
                writer.writerow(out)
        else:
            raise ParameterError(f"unknown pulse format {format!r}")


def subtract_baseline(pulse_set: PulseSet, n: int = BASELINE_SAMPLES) -> PulseSet:
    """Remove the mean of the first ``n`` (pre-trigger) samples from every pulse."""
    if n <= 0:
        return pulse_set
    base = pulse_set.data[:, :n].mean(axis=1, keepdims=True)
    return pulse_set.with_data(pulse_set.data - base)


# ------------------------------------------------------------ synthetic pulses


def _ramp_averaged_exp(t: np.ndarray, tau: float, rise: float) -> np.ndarray:
    # exp(-t/tau) for t >= 0, averaged over a trailing window of width `rise`
    lo = np.clip(t - rise, 0.0, None)
    hi = np.clip(t, 0.0, None)
    return tau / rise * (np.exp(-lo / tau) - np.exp(-hi / tau))


def clean_shape(p: SynthParams, n_samples: int, dt: float = DEFAULT_DT) -> np.ndarray:
    """Noise-free pulse, scaled so its maximum sample equals ``p.amplitude``."""
    t = np.arange(n_samples) * (dt * 1e9) - p.onset
    shape = (1 - p.slow_fraction) * _ramp_averaged_exp(t, p.fast_decay, p.rise_time)
    if p.slow_fraction:
        shape = shape + p.slow_fraction * _ramp_averaged_exp(t, p.slow_decay, p.rise_time)
    peak = shape.max()
    if peak <= 0:
        raise ParameterError("onset leaves no pulse inside the record")
    return p.amplitude * shape / peak


def synth_pulse(p: SynthParams, n_samples: int = 280, seed: int = 0, dt: float = DEFAULT_DT) -> Pulse:
    if n_samples < MIN_SAMPLES:
        raise ParameterError(f"n_samples must be >= {MIN_SAMPLES}")
    samples = clean_shape(p, n_samples, dt)
    if p.noise_sigma > 0:
        samples = samples + np.random.default_rng(seed).normal(0.0, p.noise_sigma, n_samples)
    return Pulse(samples, dt)


def synth_set(
    n_per_class: int,
    gamma_slow: float = 0.15,
    neutron_slow: float = 0.35,
    noise_sigma: float = 0.01,
    slow_jitter: float = 0.025,
    amplitude_range: tuple[float, float] = (0.6, 1.0),
    n_samples: int = 280,
    seed: int = 0,
    base: SynthParams = SynthParams(),
    shuffle: bool = True,
) -> PulseSet:
    """Labelled gamma-like and neutron-like populations.

    Each pulse draws its own slow fraction (class value plus Gaussian jitter,
    clipped to [0, 0.95]) and amplitude (uniform over ``amplitude_range``).
    """
    if n_per_class < 1:
        raise ParameterError("need at least one pulse per class")
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_per_class)
    centre = np.where(labels == 1, neutron_slow, gamma_slow)
    frac = np.clip(centre + slow_jitter * rng.standard_normal(labels.size), 0.0, 0.95)
    amp = rng.uniform(*amplitude_range, labels.size)
    rows = np.empty((labels.size, n_samples))
    for k in range(labels.size):
        p = SynthParams(
            fast_decay=base.fast_decay,
            slow_decay=base.slow_decay,
            slow_fraction=float(frac[k]),
            rise_time=base.rise_time,
            amplitude=float(amp[k]),
            onset=base.onset,
        )
        rows[k] = clean_shape(p, n_samples)
    if noise_sigma > 0:
        rows += rng.normal(0.0, noise_sigma, rows.shape)
    if shuffle:
        order = rng.permutation(labels.size)
        rows, labels = rows[order], labels[order]
    return PulseSet(rows, labels=labels)


# --------------------------------------------------------- noise and filtering


def add_gaussian_noise(pulse_set: PulseSet, spec: NoiseSpec) -> PulseSet:
    if spec.variance == 0:
        return pulse_set
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, math.sqrt(spec.variance), pulse_set.data.shape)
    return pulse_set.with_data(pulse_set.data + noise)


def fourier_denoise(pulse: Pulse, cutoff_bins: int, mode: str = "lowpass") -> Pulse:
    """Zero DFT bins above ``cutoff_bins`` (``lowpass``) or below it (``highpass``).

    Working on the one-sided spectrum keeps the output real.
    """
    n = len(pulse)
    if not 1 <= cutoff_bins <= n // 2:
        raise ParameterError(f"cutoff_bins must be in [1, {n // 2}]")
    spectrum = np.fft.rfft(pulse.samples)
    if mode == "lowpass":
        spectrum[cutoff_bins + 1 :] = 0
    elif mode == "highpass":
        spectrum[:cutoff_bins] = 0
    else:
        raise ParameterError(f"unknown filter mode {mode!r}")
    return Pulse(np.fft.irfft(spectrum, n), pulse.dt)


def average_pulse(pulse_set: PulseSet) -> Pulse:
    if len(pulse_set) == 0:
        raise ParameterError("cannot average an empty pulse set")
    return Pulse(pulse_set.data.mean(axis=0), pulse_set.dt)


def normalize_peak(pulse: Pulse) -> Pulse:
    peak = pulse.samples.max()
    if not peak > 0:
        raise ParameterError("pulse peak must be positive to normalize")
    return Pulse(pulse.samples / peak, pulse.dt)


def normalize_rows(data: np.ndarray) -> np.ndarray:
    """Scale each row to unit maximum; rows without a positive peak become NaN."""
    peak = data.max(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = data / peak
    out[np.broadcast_to(~(peak > 0), out.shape)] = np.nan
    return out

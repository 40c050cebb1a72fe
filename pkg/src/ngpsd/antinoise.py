"""Monte-Carlo noise-robustness sweep with per-cell seeding and failure accounting."""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .evaluation import DEFAULT_BINS, evaluate_method
from .methods import MethodSpec, compute_factors
from .pulses import NoiseSpec, PulseSet, add_gaussian_noise

DEFAULT_VARIANCES = tuple(round(0.01 + 0.0025 * k, 4) for k in range(7))


@dataclass(frozen=True)
class NoiseSweep:
    variances: tuple = DEFAULT_VARIANCES
    repetitions: int = 100
    failure_threshold: int = 10
    base_seed: int = 0

    def __post_init__(self):
        v = tuple(float(x) for x in self.variances)
        if not v or any(x < 0 for x in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ParameterError("variances must be non-negative and strictly ascending")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        object.__setattr__(self, "variances", v)


def is_reliable(failure_count: int, failure_threshold: int) -> bool:
    """A method stays reliable until its failures exceed the threshold."""
    return failure_count <= failure_threshold


def cell_seed(base_seed: int, method: str, variance: float, repetition: int) -> int:
    """Stable 64-bit seed for one (method, variance, repetition) trial."""
    key = f"{base_seed}|{method}|{float(variance)!r}|{repetition}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def run_trial(
    pulse_set: PulseSet, method: MethodSpec, variance: float, seed: int, n_bins: int = DEFAULT_BINS
) -> float:
    """FOM after adding noise of the given variance, or NaN when evaluation fails."""
    noisy = add_gaussian_noise(pulse_set, NoiseSpec(variance, seed))
    report = evaluate_method(compute_factors(noisy, method), n_bins, method.key)
    return math.nan if report.failure else float(report.fom)


@dataclass
class CellResult:
    method: str
    variance: float
    fom_values: np.ndarray
    failure_threshold: int

    @property
    def failure_count(self) -> int:
        return int(np.isnan(self.fom_values).sum())

    @property
    def successes(self) -> np.ndarray:
        return self.fom_values[~np.isnan(self.fom_values)]

    @property
    def mean_fom(self) -> float:
        """Mean over successful trials; NaN (never 0) when every trial failed."""
        ok = self.successes
        return float(ok.mean()) if ok.size else math.nan

    @property
    def std_error(self) -> float:
        ok = self.successes
        return float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else math.nan

    @property
    def reliable(self) -> bool:
        return is_reliable(self.failure_count, self.failure_threshold)


@dataclass
class SweepResult:
    sweep: NoiseSweep
    methods: list
    cells: dict = field(default_factory=dict)

    def cell(self, method: str, variance: float) -> CellResult:
        return self.cells[(method, float(variance))]

    def series(self, method: str) -> list[CellResult]:
        return [self.cell(method, v) for v in self.sweep.variances]

    def write_fom_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "variance", "repetition", "fom"])
            for m in self.methods:
                for c in self.series(m):
                    for r, v in enumerate(c.fom_values):
                        w.writerow([m, repr(c.variance), r, "NA" if math.isnan(v) else repr(float(v))])

    def write_summary_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "variance", "mean_fom", "failure_count", "reliable"])
            for m in self.methods:
                for c in self.series(m):
                    mean = "NA" if math.isnan(c.mean_fom) else repr(c.mean_fom)
                    w.writerow([m, repr(c.variance), mean, c.failure_count, str(c.reliable).lower()])


def _trial_task(args):
    return run_trial(*args)


def run_sweep(
    pulse_set: PulseSet,
    methods: Sequence[MethodSpec],
    sweep: NoiseSweep = NoiseSweep(),
    n_bins: int = DEFAULT_BINS,
    workers: Optional[int] = None,
) -> SweepResult:
    """Repeat every (method, variance) trial ``sweep.repetitions`` times.

    Seeds depend only on (base_seed, method, variance, repetition), so results
    do not depend on execution order, worker count, or which other cells run.
    """
    keys = [m.key for m in methods]
    if len(set(keys)) != len(keys):
        raise ParameterError("method keys must be unique; set MethodSpec.label to disambiguate")
    tasks = []
    for m in methods:
        for v in sweep.variances:
            for r in range(sweep.repetitions):
                tasks.append((pulse_set, m, v, cell_seed(sweep.base_seed, m.key, v, r), n_bins))
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            values = list(ex.map(_trial_task, tasks, chunksize=4))
    else:
        values = [_trial_task(t) for t in tasks]
    result = SweepResult(sweep, keys)
    it = iter(values)
    for m in methods:
        for v in sweep.variances:
            foms = np.array([next(it) for _ in range(sweep.repetitions)], dtype=float)
            result.cells[(m.key, v)] = CellResult(m.key, v, foms, sweep.failure_threshold)
    return result

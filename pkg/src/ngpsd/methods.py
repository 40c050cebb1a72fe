"""Method registry: compute per-pulse discrimination factors for a whole pulse set.

Pulses are scaled to unit peak before any method runs; pulses without a
positive peak, and pulses a method cannot handle, get a NaN factor. Factors
keep their natural sign, so for every method the neutron population lies to
the right of the gamma population (FEPS and LG slopes are negative, and less
steep for neutrons).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from . import classic, neural
from .errors import ParameterError
from .pulses import PulseSet, normalize_rows

METHOD_NAMES = ("zc", "cc", "feps", "fga", "pcnn", "lg", "hqcscm")


@dataclass(frozen=True)
class PcnnSettings:
    params: neural.PcnnParams = field(default_factory=neural.PcnnParams)
    window_pre: float = 15.0
    window_post: float = 125.0


@dataclass(frozen=True)
class LgSettings:
    qcscm: neural.QcScmParams = field(default_factory=neural.QcScmParams)
    lg: neural.LgParams = field(default_factory=neural.LgParams)


DEFAULT_PARAMS = {
    "zc": classic.ZcParams(tau=20e-9),
    "cc": classic.CcWindows(),
    "feps": classic.FepsParams(),
    "fga": classic.FgaParams(),
    "pcnn": PcnnSettings(),
    "lg": LgSettings(),
    "hqcscm": neural.HqcScmParams(),
}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: Any = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ParameterError(f"unknown method {self.name!r}; choose from {', '.join(METHOD_NAMES)}")
        if self.params is None:
            object.__setattr__(self, "params", DEFAULT_PARAMS[self.name])

    @property
    def key(self) -> str:
        return self.label or self.name


def _lg_rows(stim: np.ndarray, s: LgSettings) -> np.ndarray:
    counts = neural.qcscm_counts(stim, s.qcscm)
    return np.array([neural.lg_slope(row, s.lg.m) for row in counts])


def compute_factors(pulse_set: PulseSet, spec: MethodSpec) -> np.ndarray:
    data = normalize_rows(pulse_set.data)
    bad = ~np.isfinite(data).all(axis=1)
    stim = np.where(bad[:, None], 0.0, data)
    dt = pulse_set.dt
    p = spec.params
    if spec.name == "zc":
        out = classic.zc_factors(stim, dt, p)
    elif spec.name == "cc":
        out = classic.cc_factors(stim, dt, p)
    elif spec.name == "feps":
        out = classic.feps_factors(stim, dt, p)
    elif spec.name == "fga":
        out = classic.fga_factors(stim, dt, p)
    elif spec.name == "pcnn":
        counts = neural.pcnn_counts(stim, p.params)
        lo, hi = neural.window_bounds(np.argmax(stim, axis=-1), stim.shape[-1], dt, p.window_pre, p.window_post)
        out = neural.window_sums(counts, lo, hi)
    elif spec.name == "lg":
        out = _lg_rows(stim, p)
    else:
        if p.split_index is None:
            try:
                p = replace(p, split_index=neural.hqcscm_split_point(pulse_set))
            except ParameterError:
                return np.full(len(pulse_set), np.nan)
        out = neural.hqcscm_factors(stim, dt, p)
    out = np.asarray(out, dtype=float).copy()
    out[bad] = np.nan
    return out

"""Neutron/gamma pulse shape discrimination: seven discriminators, FOM evaluation
and a Monte-Carlo noise-robustness benchmark."""

from .antinoise import CellResult, NoiseSweep, SweepResult, run_sweep, run_trial
from .evaluation import (
    DoubleGaussianFit,
    Histogram,
    MethodReport,
    build_histogram,
    classify,
    compute_fom,
    dividing_point,
    evaluate_method,
    fit_double_gaussian,
)
from .methods import METHOD_NAMES, MethodSpec, compute_factors
from .pulses import (
    NoiseSpec,
    Pulse,
    PulseSet,
    SynthParams,
    add_gaussian_noise,
    average_pulse,
    fourier_denoise,
    load_pulses,
    normalize_peak,
    save_pulses,
    synth_pulse,
    synth_set,
)

__version__ = "0.1.0"

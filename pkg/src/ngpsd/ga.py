"""Real-valued genetic algorithm that tunes the two HQC-SCM models for maximum FOM."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .evaluation import DEFAULT_BINS, evaluate_method
from .methods import MethodSpec, compute_factors
from .neural import HqcScmParams, QcScmParams, hqcscm_split_point
from .pulses import PulseSet

log = logging.getLogger(__name__)

GENE_NAMES = ("f_a", "g_a", "h_a", "dt_a", "w_a", "f_b", "g_b", "h_b", "dt_b", "w_b")
DEFAULT_BOUNDS = ((0.01, 0.99), (0.01, 0.99), (0.1, 5.0), (0.05, 1.0), (0.0, 1.0)) * 2
MIN_FITNESS_PULSES = 200


@dataclass(frozen=True)
class GaConfig:
    population: int = 20
    generations: int = 50
    crossover_rate: float = 0.9
    mutation_sigma: float = 0.1
    mutation_rate: float = 0.3
    elitism: int = 2
    tournament: int = 3
    seed: int = 0
    bounds: tuple = DEFAULT_BOUNDS

    def __post_init__(self):
        if self.population < 2:
            raise ParameterError("population must be >= 2")
        if self.generations < 1:
            raise ParameterError("generations must be >= 1")
        if not 0 <= self.elitism < self.population:
            raise ParameterError("elitism must be in [0, population)")
        if not 0 <= self.crossover_rate <= 1 or not 0 <= self.mutation_rate <= 1:
            raise ParameterError("rates must lie in [0, 1]")
        b = np.asarray(self.bounds, dtype=float)
        if b.shape != (len(GENE_NAMES), 2) or not np.all(np.isfinite(b)) or not np.all(b[:, 0] < b[:, 1]):
            raise ParameterError("bounds must be finite (lo, hi) pairs with lo < hi, one per gene")
        object.__setattr__(self, "bounds", tuple(map(tuple, b.tolist())))


@dataclass
class GaResult:
    genes: np.ndarray
    fitness: float
    history: list
    evaluations: int = 0
    evaluated: list = field(default_factory=list, repr=False)


def decode(genes: Sequence[float], split_index: int, t_end: float = 40.0) -> HqcScmParams:
    g = [float(v) for v in genes]

    def model(f, gd, h, dt, w):
        return QcScmParams(f_decay=f, g_decay=gd, h=h, dt_step=dt, W_kernel=(w, 0.0, w), t_end=t_end)

    return HqcScmParams(params_a=model(*g[:5]), params_b=model(*g[5:]), split_index=split_index)


def tuning_subset(pulse_set: PulseSet, n: int = 1000) -> PulseSet:
    """Evenly spaced subset of at most ``n`` pulses (keeps both classes in ordered files)."""
    if len(pulse_set) <= n:
        return pulse_set
    idx = np.unique(np.linspace(0, len(pulse_set) - 1, n).round().astype(int))
    return pulse_set.subset(idx)


def ga_fitness(
    genes: Sequence[float], pulse_set: PulseSet, split_index: Optional[int] = None, n_bins: int = DEFAULT_BINS
) -> float:
    """FOM of HQC-SCM with the decoded parameters; 0 when the evaluation fails."""
    if len(pulse_set) < MIN_FITNESS_PULSES:
        raise ParameterError(f"fitness needs at least {MIN_FITNESS_PULSES} pulses")
    if split_index is None:
        split_index = hqcscm_split_point(pulse_set)
    factors = compute_factors(pulse_set, MethodSpec("hqcscm", decode(genes, split_index)))
    report = evaluate_method(factors, n_bins)
    return 0.0 if report.failure else float(report.fom)


def _tournament(rng, fitness: np.ndarray, k: int) -> int:
    picks = rng.integers(0, fitness.size, k)
    return int(picks[np.argmax(fitness[picks])])


def ga_optimize(
    pulse_set: PulseSet, cfg: GaConfig = GaConfig(), n_bins: int = DEFAULT_BINS, workers: Optional[int] = None
) -> GaResult:
    """Tournament selection, uniform crossover, clipped Gaussian mutation, elitism.

    ``history[i]`` is the best fitness of generation ``i``; with elitism >= 1 it
    never decreases. Identical (seed, pulse set) pairs give identical results.
    """
    rng = np.random.default_rng(cfg.seed)
    bounds = np.asarray(cfg.bounds)
    lo, hi = bounds[:, 0], bounds[:, 1]
    split = hqcscm_split_point(pulse_set)
    cache: dict[bytes, float] = {}
    evaluated: list[tuple[np.ndarray, float]] = []

    def evaluate(pop: np.ndarray) -> np.ndarray:
        todo = [g for g in pop if g.tobytes() not in cache]
        unique = {g.tobytes(): g for g in todo}
        if workers and workers > 1 and len(unique) > 1:
            with ProcessPoolExecutor(workers) as ex:
                scores = list(ex.map(ga_fitness, unique.values(), [pulse_set] * len(unique), [split] * len(unique), [n_bins] * len(unique)))
        else:
            scores = [ga_fitness(g, pulse_set, split, n_bins) for g in unique.values()]
        for (key, g), s in zip(unique.items(), scores):
            cache[key] = s
            evaluated.append((g.copy(), s))
        return np.array([cache[g.tobytes()] for g in pop])

    pop = lo + rng.random((cfg.population, lo.size)) * (hi - lo)
    history: list[float] = []
    best_genes, best_fit = pop[0].copy(), -np.inf
    for gen in range(cfg.generations):
        fitness = evaluate(pop)
        top = int(np.argmax(fitness))
        if fitness[top] > best_fit:
            best_genes, best_fit = pop[top].copy(), float(fitness[top])
        history.append(float(fitness[top]))
        log.info("generation %d: best FOM %.4f", gen, fitness[top])
        if gen == cfg.generations - 1:
            break
        order = np.argsort(-fitness, kind="stable")
        children = [pop[i].copy() for i in order[: cfg.elitism]]
        while len(children) < cfg.population:
            a = pop[_tournament(rng, fitness, cfg.tournament)]
            b = pop[_tournament(rng, fitness, cfg.tournament)]
            if rng.random() < cfg.crossover_rate:
                child = np.where(rng.random(lo.size) < 0.5, a, b)
            else:
                child = a.copy()
            mutate = rng.random(lo.size) < cfg.mutation_rate
            child = child + mutate * rng.normal(0.0, cfg.mutation_sigma * (hi - lo))
            children.append(np.clip(child, lo, hi))
        pop = np.array(children)
    return GaResult(best_genes, best_fit, history, len(evaluated), evaluated)


def save_chromosome(path, genes: Sequence[float], fitness: Optional[float] = None, split_index: Optional[int] = None):
    doc = {
        "genes": dict(zip(GENE_NAMES, map(float, genes))),
        "fitness": fitness,
        "split_index": split_index,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_chromosome(path) -> tuple[np.ndarray, Optional[int]]:
    doc = json.loads(Path(path).read_text())
    genes = doc["genes"]
    if isinstance(genes, dict):
        genes = [genes[k] for k in GENE_NAMES]
    return np.asarray(genes, dtype=float), doc.get("split_index")

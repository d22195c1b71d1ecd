"""Genetic-algorithm fitting of (a, b, c, d) to a target voltage trace.

Fitness is the mean squared voltage difference between the simulated and
target traces (lower is better). The loop is generational with elitism:

1. evaluate every individual;
2. copy the ``elite_count`` best unchanged into the next generation;
3. fill the rest by tournament selection, blend crossover (with probability
   ``crossover_rate``, otherwise the parents are cloned) and Gaussian
   mutation (each child with probability ``mutation_rate``).

``crossover_rate`` is the probability that a selected pair is recombined and
``mutation_rate`` the per-individual probability of being perturbed. All
randomness is drawn in the sequential loop, never inside fitness evaluation,
so evaluation order cannot change the outcome.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .metrics import trace_mse
from .model import (
    IntegrationDivergence,
    NeuronParams,
    SimConfig,
    StimulusProtocol,
    VoltageTrace,
    integrate_array,
    rest_state,
    sample_current,
)

GENES = ("a", "b", "c", "d")
DIVERGENCE_PENALTY = 1e9

DEFAULT_BOUNDS = (
    (-0.1, 2.0),
    (-1.5, 0.4),
    (-80.0, -40.0),
    (-25.0, 25.0),
)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    max_generations: int = 150
    crossover_rate: float = 0.7
    mutation_rate: float = 0.8
    elite_count: int = 2
    tournament_size: int = 3
    bounds: tuple[tuple[float, float], ...] = DEFAULT_BOUNDS
    seed: int = 0
    fitness_tolerance: float = 1e-3
    mutation_scale: float = 0.1

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != 4:
            raise ValueError("bounds needs one (low, high) pair per gene a, b, c, d")
        for name, (lo, hi) in zip(GENES, bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"bounds for {name} are not ordered: ({lo}, {hi})")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be smaller than population_size")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be at least 1")

    @property
    def low(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def high(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    def with_bounds(self, **gene_bounds: tuple[float, float]) -> "GaConfig":
        """Copy with selected gene bounds replaced, e.g. ``with_bounds(a=(0.02, 0.02))``."""
        bounds = list(self.bounds)
        for name, pair in gene_bounds.items():
            bounds[GENES.index(name)] = pair
        return replace(self, bounds=tuple(bounds))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["bounds"] = {g: list(b) for g, b in zip(GENES, self.bounds)}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "GaConfig":
        data = dict(data)
        if isinstance(data.get("bounds"), dict):
            merged = dict(zip(GENES, DEFAULT_BOUNDS))
            merged.update({k: tuple(v) for k, v in data["bounds"].items()})
            unknown = set(merged) - set(GENES)
            if unknown:
                raise ValueError(f"unknown genes in bounds: {sorted(unknown)}")
            data["bounds"] = tuple(merged[g] for g in GENES)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown GaConfig fields: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "GaConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Individual:
    genes: np.ndarray
    fitness: float | None = None

    @property
    def params(self) -> NeuronParams:
        return NeuronParams.from_sequence(self.genes)

    def copy(self) -> "Individual":
        return Individual(self.genes.copy(), self.fitness)


@dataclass
class FitResult:
    best: Individual
    best_history: list[float]
    mean_history: list[float]
    generations_run: int
    termination: str
    evaluated: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def best_params(self) -> NeuronParams:
        return self.best.params

    def to_dict(self) -> dict:
        return {
            "best": {"params": self.best_params.to_dict(), "fitness": self.best.fitness},
            "generations_run": self.generations_run,
            "termination": self.termination,
            "history": [
                {"generation": g + 1, "best_mse": b, "mean_mse": m}
                for g, (b, m) in enumerate(zip(self.best_history, self.mean_history))
            ],
        }

    def history_csv(self) -> str:
        lines = ["generation,best_mse,mean_mse"]
        for g, (b, m) in enumerate(zip(self.best_history, self.mean_history), start=1):
            lines.append(f"{g},{b!r},{m!r}")
        return "\n".join(lines) + "\n"


def init_population(config: GaConfig, rng: np.random.Generator) -> list[Individual]:
    """Uniform draws within the gene bounds; a degenerate bound gives a constant gene."""
    low, high = config.low, config.high
    draws = rng.uniform(low, high, size=(config.population_size, len(GENES)))
    # uniform(lo, lo) already returns lo, but make it exact
    fixed = low == high
    draws[:, fixed] = low[fixed]
    return [Individual(row) for row in draws]


class TraceFitness:
    """Callable fitness for one (target, protocol, sim) problem.

    The stimulus is sampled once; each call integrates a parameter vector and
    returns its MSE against the target, or ``DIVERGENCE_PENALTY``.
    """

    def __init__(self, target: VoltageTrace, protocol: StimulusProtocol, sim: SimConfig):
        self.sim = sim
        self.protocol = protocol
        self.current = sample_current(protocol, sim)
        n = sim.n_steps + 1
        if len(target) != n or not math.isclose(target.dt, sim.dt, rel_tol=1e-12):
            raise ValueError(
                f"target must be on the simulation grid ({n} samples at dt={sim.dt}); "
                f"got {len(target)} samples at dt={target.dt}. Resample first."
            )
        self.target = target
        self.i0 = float(self.current[0]) if self.current.size else 0.0

    def trace(self, params: NeuronParams) -> VoltageTrace:
        if self.sim.v0 is None:
            s0 = rest_state(params, self.i0)
            v0, u0 = s0.v, s0.u
        else:
            v0, u0 = self.sim.v0, params.b * self.sim.v0
        if self.sim.u0 is not None:
            u0 = self.sim.u0
        v, _ = integrate_array(params, self.current, self.sim.dt, v0, u0, self.sim.spike_cutoff)
        return VoltageTrace(0.0, self.sim.dt, v)

    def __call__(self, genes: Sequence[float]) -> float:
        try:
            trace = self.trace(NeuronParams.from_sequence(genes))
        except (IntegrationDivergence, ValueError):
            return DIVERGENCE_PENALTY
        return trace_mse(trace, self.target)


def evaluate(ind: Individual, target: VoltageTrace, protocol: StimulusProtocol,
             sim: SimConfig) -> float:
    """Fitness (mV^2) of one individual; divergence maps to ``DIVERGENCE_PENALTY``."""
    ind.fitness = TraceFitness(target, protocol, sim)(ind.genes)
    return ind.fitness


def crossover(pa: Individual, pb: Individual, rng: np.random.Generator,
              alpha: np.ndarray | None = None) -> tuple[Individual, Individual]:
    """Per-gene arithmetic blend with ``alpha ~ U[0, 1]``; children stay in bounds by convexity."""
    if alpha is None:
        alpha = rng.uniform(0.0, 1.0, size=pa.genes.shape)
    child_a = alpha * pa.genes + (1.0 - alpha) * pb.genes
    child_b = (1.0 - alpha) * pa.genes + alpha * pb.genes
    return Individual(child_a), Individual(child_b)


def mutate(ind: Individual, config: GaConfig, rng: np.random.Generator) -> Individual:
    """With probability ``mutation_rate`` add N(0, (0.1 * range)^2) per gene, then clamp."""
    if config.mutation_rate <= 0.0 or rng.random() >= config.mutation_rate:
        return ind
    low, high = config.low, config.high
    sigma = config.mutation_scale * (high - low)
    genes = np.clip(ind.genes + rng.normal(0.0, 1.0, size=ind.genes.shape) * sigma, low, high)
    return Individual(genes)


def _tournament(pop: list[Individual], k: int, rng: np.random.Generator) -> Individual:
    idx = rng.choice(len(pop), size=k, replace=False)
    return min((pop[i] for i in idx), key=lambda ind: ind.fitness)


def run_fit(target: VoltageTrace, protocol: StimulusProtocol, config: GaConfig,
            sim: SimConfig, initial: Sequence[Sequence[float]] | None = None,
            fitness: Callable[[Sequence[float]], float] | None = None,
            record_evaluated: bool = False,
            on_generation: Callable[[int, float, float], None] | None = None,
            executor=None) -> FitResult:
    """Fit parameters to ``target`` (already on the ``sim`` grid).

    ``initial`` optionally overwrites the first rows of the random initial
    population (e.g. to plant a known solution). ``fitness`` replaces the
    trace-MSE objective; it must be a pure function of the genes. An
    ``executor`` (anything with a ``map`` method, e.g. a
    ``concurrent.futures`` pool) evaluates each generation concurrently; the
    random stream is only used between evaluations, so results do not change.
    """
    rng = np.random.default_rng(config.seed)
    if fitness is None:
        fitness = TraceFitness(target, protocol, sim)
    pop = init_population(config, rng)
    if initial is not None:
        for i, genes in enumerate(initial):
            if i >= len(pop):
                break
            g = np.asarray(genes, dtype=float)
            if np.any(g < config.low) or np.any(g > config.high):
                raise ValueError(f"initial individual {list(g)} outside bounds")
            pop[i] = Individual(g.copy())

    evaluated: list[np.ndarray] = []

    mapper = map if executor is None else executor.map

    def score(inds):
        todo = [ind for ind in inds if ind.fitness is None]
        for ind, value in zip(todo, mapper(fitness, [ind.genes for ind in todo])):
            ind.fitness = float(value)
            if record_evaluated:
                evaluated.append(ind.genes.copy())

    best_hist: list[float] = []
    mean_hist: list[float] = []
    termination = "max-generations"
    score(pop)
    for gen in range(1, config.max_generations + 1):
        pop.sort(key=lambda ind: ind.fitness)
        best_hist.append(pop[0].fitness)
        mean_hist.append(float(np.mean([ind.fitness for ind in pop])))
        if on_generation is not None:
            on_generation(gen, best_hist[-1], mean_hist[-1])
        if pop[0].fitness <= config.fitness_tolerance:
            termination = "tolerance-reached"
            break
        if gen == config.max_generations:
            break
        nxt = [ind.copy() for ind in pop[:config.elite_count]]
        while len(nxt) < config.population_size:
            pa = _tournament(pop, config.tournament_size, rng)
            pb = _tournament(pop, config.tournament_size, rng)
            if rng.random() < config.crossover_rate:
                ca, cb = crossover(pa, pb, rng)
            else:
                ca, cb = pa.copy(), pb.copy()
            for child in (ca, cb):
                if len(nxt) < config.population_size:
                    child = mutate(child, config, rng)
                    nxt.append(child)
        score(nxt)
        pop = nxt

    best = min(pop, key=lambda ind: ind.fitness)
    return FitResult(best.copy(), best_hist, mean_hist, len(best_hist), termination, evaluated)

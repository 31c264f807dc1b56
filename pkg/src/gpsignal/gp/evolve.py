"""Generational GP loop."""

from __future__ import annotations

import csv
import io
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from ..errors import ConfigError
from .operators import ramped_half_and_half, subtree_crossover, subtree_mutation, tournament_index
from .tree import Tree, parse_sexp, to_sexp


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 100
    generations: int = 50
    init: str = "ramped-half-and-half"
    init_min_depth: int = 3
    max_depth: int = 8
    elitism: bool = False
    tournament_size: int = 3
    crossover_rate: float = 0.90
    mutation_rate: float = 0.10
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 1 or self.generations < 0 or self.tournament_size < 1:
            raise ConfigError("population_size and tournament_size must be positive, generations >= 0")
        if not 1 <= self.init_min_depth <= self.max_depth:
            raise ConfigError("need 1 <= init_min_depth <= max_depth")
        if self.init != "ramped-half-and-half":
            raise ConfigError(f"unsupported initialisation {self.init!r}")
        if not math.isclose(self.crossover_rate + self.mutation_rate, 1.0):
            raise ConfigError("crossover_rate + mutation_rate must equal 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    std: float
    best_tree: str


@dataclass
class EvolutionTrace:
    generations: list[GenerationStats] = field(default_factory=list)
    best_tree: Tree | None = None
    best_fitness: float = math.inf
    evaluations: int = 0

    def convergence_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["generation", "best", "mean", "std"])
        for g in self.generations:
            writer.writerow([g.generation, repr(g.best), repr(g.mean), repr(g.std)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "best_tree": None if self.best_tree is None else to_sexp(self.best_tree),
            "best_fitness": self.best_fitness,
            "evaluations": self.evaluations,
            "generations": [asdict(g) for g in self.generations],
        }


class _FromSexp:
    """Picklable adapter so worker processes receive trees as text."""

    def __init__(self, fitness):
        self.fitness = fitness

    def __call__(self, sexp: str) -> float:
        return self.fitness(parse_sexp(sexp))


class _Evaluator:
    def __init__(self, fitness, executor, workers: int):
        self.fitness = fitness
        self.executor = executor
        self.workers = workers
        self.cache: dict[str, float] = {}

    def __call__(self, population: list[Tree]) -> list[float]:
        keys = [to_sexp(t) for t in population]
        todo, trees, seen = [], [], set()
        for key, tree in zip(keys, population):
            if key not in self.cache and key not in seen:
                seen.add(key)
                todo.append(key)
                trees.append(tree)
        if self.executor is None:
            values = [self.fitness(t) for t in trees]
        else:
            chunk = max(1, len(todo) // (4 * self.workers))
            values = list(self.executor.map(_FromSexp(self.fitness), todo, chunksize=chunk))
        for key, value in zip(todo, values):
            value = float(value)
            if math.isnan(value):
                raise ValueError(f"fitness of {key} is NaN")
            self.cache[key] = value
        return [self.cache[k] for k in keys]


def _breed(population, fitnesses, config: EvolutionConfig, rng: random.Random) -> list[Tree]:
    k = config.tournament_size
    offspring = []
    if config.elitism:
        offspring.append(population[min(range(len(fitnesses)), key=lambda i: (fitnesses[i], i))])
    while len(offspring) < config.population_size:
        if rng.random() < config.crossover_rate:
            p1 = population[tournament_index(fitnesses, k, rng)]
            p2 = population[tournament_index(fitnesses, k, rng)]
            offspring.append(subtree_crossover(p1, p2, rng, config.max_depth))
        else:
            parent = population[tournament_index(fitnesses, k, rng)]
            offspring.append(subtree_mutation(parent, rng, config.max_depth))
    return offspring


def evolve(config: EvolutionConfig, fitness, workers: int = 1, on_generation=None) -> EvolutionTrace:
    """Minimise ``fitness`` over expression trees.

    Generation 0 is the initial population, followed by
    ``config.generations`` bred generations. Evaluations of one generation
    may run in ``workers`` processes; results are committed in population
    order and identical trees are evaluated once, so the trace does not
    depend on ``workers``. ``on_generation(gen, population, fitnesses)`` is
    called after each evaluation.
    """
    rng = random.Random(config.rng_seed)
    trace = EvolutionTrace()
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        evaluate = _Evaluator(fitness, executor, workers)
        population = ramped_half_and_half(config, rng)
        for gen in range(config.generations + 1):
            fits = evaluate(population)
            best_i = min(range(len(fits)), key=lambda i: (fits[i], i))
            mean = math.fsum(fits) / len(fits)
            std = math.sqrt(math.fsum((f - mean) ** 2 for f in fits) / len(fits))
            trace.generations.append(GenerationStats(gen, fits[best_i], mean, std, to_sexp(population[best_i])))
            if trace.best_tree is None or fits[best_i] < trace.best_fitness:
                trace.best_fitness = fits[best_i]
                trace.best_tree = population[best_i]
            if on_generation is not None:
                on_generation(gen, population, fits)
            if gen < config.generations:
                population = _breed(population, fits, config, rng)
        trace.evaluations = len(evaluate.cache)
    finally:
        if executor is not None:
            executor.shutdown()
    return trace

"""Evolutionary search over quantum-gene genomes.

One generation: prune and train every genome (through the evaluator), score
it with the accuracy/length fitness, draw parents by roulette wheel, then
cross consecutive parent pairs and mutate the children. Children replace
the population; the best individual ever seen is tracked separately.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .genome import Genome, LayoutSpec, random_genome

log = logging.getLogger(__name__)


class Evaluation(NamedTuple):
    accuracy: float
    genome: Genome
    params: np.ndarray
    test_accuracy: Optional[float] = None


Evaluator = Callable[[Genome, int], Evaluation]


@dataclass(frozen=True)
class Individual:
    genome: Genome
    accuracy: float
    length: int
    fitness: float
    trained_params: np.ndarray
    test_accuracy: Optional[float] = None

    @property
    def param_gate_count(self) -> int:
        return self.genome.param_gate_count

    @property
    def bits(self) -> str:
        return self.genome.to_bitstring()


@dataclass(frozen=True)
class EvoConfig:
    population_size: int = 30
    iterations: int = 100
    mutation_prob: float = 0.4
    alpha: float = 0.1
    stop_accuracy: Optional[float] = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.population_size < 1 or self.iterations < 1:
            raise ValueError("population_size and iterations must be positive")


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_accuracy: float
    gate_count: int
    param_gate_count: int
    fitness: float
    genome_bits: str

    CSV_HEADER = "generation,best_accuracy,gate_count,param_gate_count,fitness,genome_bits"

    def csv_row(self) -> str:
        return (f"{self.generation},{self.best_accuracy:.6f},{self.gate_count},"
                f"{self.param_gate_count},{self.fitness:.6f},{self.genome_bits}")


def fitness_fn(accuracy: float, length: int, alpha: float) -> float:
    """``(1 - alpha) * accuracy + alpha / length``; empty circuits score 0."""
    if length <= 0:
        return 0.0
    return (1.0 - alpha) * accuracy + alpha / length


def _fitness_values(population) -> np.ndarray:
    return np.array([getattr(ind, "fitness", ind) for ind in population], dtype=float)


def normalize_fitness(population) -> np.ndarray:
    """Selection probabilities proportional to fitness (uniform if all zero).

    Accepts Individuals or bare fitness values.
    """
    f = _fitness_values(population)
    if f.size == 0:
        raise ValueError("empty population")
    if np.any(f < 0):
        raise ValueError("fitness must be non-negative")
    total = f.sum()
    if total == 0:
        return np.full(f.size, 1.0 / f.size)
    return f / total


def roulette_select(population: Sequence, probabilities, count: int, rng: np.random.Generator) -> list:
    """``count`` independent spins of a wheel whose slices are ``probabilities``."""
    wheel = np.cumsum(np.asarray(probabilities, dtype=float))
    spins = rng.random(count) * wheel[-1]
    picks = np.searchsorted(wheel, spins, side="right")
    picks = np.minimum(picks, len(population) - 1)
    return [population[i] for i in picks]


def elitist_select(population: Sequence[Individual], count: int, quota: float = 1.0) -> list[Individual]:
    """The top ``ceil(count * quota)`` individuals by fitness, cycled to ``count``.

    Ties go to the lexicographically smaller genome bitstring.
    """
    ranked = sorted(population, key=lambda ind: (-ind.fitness, ind.bits))
    top = ranked[:max(1, math.ceil(count * quota))]
    return [top[i % len(top)] for i in range(count)]


def crossover(parent_a: Genome, parent_b: Genome) -> tuple[Genome, Genome]:
    """Children keep their own parent's TYPE/PLACE; INCLUDED becomes the AND of both parents."""
    if len(parent_a) != len(parent_b) or parent_a.n_qubits != parent_b.n_qubits:
        raise ValueError("parents differ in length or geometry")
    both = [a and b for a, b in zip(parent_a.included_bits, parent_b.included_bits)]
    return parent_a.with_included(both), parent_b.with_included(both)


def mutate(genome: Genome, p: float, rng: np.random.Generator) -> Genome:
    """Flip each TYPE bit and each INCLUDED bit independently with probability ``p``.

    PLACE bits are never touched.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    flips = rng.random((len(genome), 4)) < p
    w = genome.place_width
    out = []
    for gene, f in zip(genome.gene_bits(), flips):
        type_bits = "".join(str(int(b) ^ int(x)) for b, x in zip(gene[:3], f[:3]))
        inc = str(int(gene[-1]) ^ int(f[3]))
        out.append(type_bits + gene[3:3 + w] + inc)
    return Genome.from_bitstring("".join(out), genome.n_qubits)


def hamming(a: str, b: str) -> int:
    if len(a) != len(b):
        raise ValueError("bitstrings differ in length")
    return sum(x != y for x, y in zip(a, b))


def diversity(genomes: Sequence) -> float:
    """Mean pairwise Hamming distance between genome bitstrings."""
    bits = [g if isinstance(g, str) else g.to_bitstring() for g in genomes]
    if not bits:
        raise ValueError("no genomes")
    if len({len(b) for b in bits}) != 1:
        raise ValueError("genomes differ in length")
    if len(bits) < 2:
        return 0.0
    arr = np.array([[c == "1" for c in b] for b in bits], dtype=np.int64)
    ones = arr.sum(axis=0)
    total = int(np.sum(ones * (len(bits) - ones)))
    pairs = len(bits) * (len(bits) - 1) // 2
    return total / pairs


def unique_count(genomes: Sequence) -> int:
    return len({g if isinstance(g, str) else g.to_bitstring() for g in genomes})


def individual_seed(seed: int, generation: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, generation, index]).generate_state(1)[0])


def breed(parents: Sequence[Genome], p: float, rng: np.random.Generator) -> list[Genome]:
    """Cross consecutive pairs (0,1), (2,3), ...; mutate every child.

    With an odd count the last parent is only mutated.
    """
    children = []
    for i in range(0, len(parents) - 1, 2):
        children.extend(crossover(parents[i], parents[i + 1]))
    if len(parents) % 2:
        children.append(parents[-1])
    return [mutate(c, p, rng) for c in children]


def _is_better(cand: Individual, best: Optional[Individual]) -> bool:
    if best is None:
        return True
    return (-cand.fitness, cand.param_gate_count, cand.bits) < (-best.fitness, best.param_gate_count, best.bits)


def evaluate_population(genomes, evaluator: Evaluator, seeds, alpha, workers=1) -> list[Individual]:
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(evaluator, genomes, seeds))
    else:
        results = [evaluator(g, s) for g, s in zip(genomes, seeds)]
    out = []
    for g, res in zip(genomes, results):
        acc, pruned, params = res[0], res[1], res[2]
        test_acc = res[3] if len(res) > 3 else None
        length = pruned.dominant_count
        out.append(Individual(pruned, acc, length, fitness_fn(acc, length, alpha),
                              np.asarray(params), test_acc))
    return out


def evolve(
    layout: LayoutSpec,
    cfg: EvoConfig,
    evaluator: Evaluator,
    on_generation: Optional[Callable[[GenerationRecord], None]] = None,
) -> tuple[Individual, list[GenerationRecord]]:
    """Run the search. ``evaluator(genome, seed)`` prunes and trains one genome."""
    rng = np.random.default_rng([cfg.seed, 0x5EA])
    genomes = [random_genome(layout, rng) for _ in range(cfg.population_size)]
    best = None
    history = []
    for gen in range(cfg.iterations):
        seeds = [individual_seed(cfg.seed, gen, i) for i in range(len(genomes))]
        try:
            population = evaluate_population(genomes, evaluator, seeds, cfg.alpha, cfg.workers)
        except Exception as exc:
            raise RuntimeError(f"evaluation failed in generation {gen}") from exc
        for ind in population:
            if _is_better(ind, best):
                best = ind
        rec = GenerationRecord(gen, best.accuracy, best.length, best.param_gate_count,
                               best.fitness, best.bits)
        history.append(rec)
        log.info("gen %d best acc=%.3f gates=%d params=%d fitness=%.4f", gen,
                 rec.best_accuracy, rec.gate_count, rec.param_gate_count, rec.fitness)
        if on_generation:
            on_generation(rec)
        if cfg.stop_accuracy is not None and best.accuracy >= cfg.stop_accuracy:
            break
        if gen == cfg.iterations - 1:
            break
        parents = roulette_select(population, normalize_fitness(population), cfg.population_size, rng)
        genomes = breed([p.genome for p in parents], cfg.mutation_prob, rng)
    return best, history

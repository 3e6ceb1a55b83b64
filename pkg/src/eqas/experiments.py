"""Search, re-evaluation and the pruning / selection studies.

Each runner writes CSV files into an output directory. CSV content depends
only on the configuration, so reruns with the same seed are byte-identical;
timestamps and wall-times go to ``report.json`` only.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as datasets
from .evolution import (
    EvoConfig,
    Evaluation,
    GenerationRecord,
    breed,
    diversity,
    elitist_select,
    evolve,
    individual_seed,
    normalize_fitness,
    evaluate_population,
    roulette_select,
    unique_count,
)
from .genome import Genome, LayoutSpec, random_genome, to_circuit, write_genome
from .qfim import prune_redundant
from .simulator import init_state
from .trainer import LabeledDataset, TrainConfig, train

log = logging.getLogger(__name__)

# alpha is not given for the original runs; these values come from a sweep over {0.05, 0.1, 0.2}
DATASET_DEFAULTS = {
    "iris": dict(n_qubits=2, batch_size=10, n_gates=5, n_blocks=None, alpha=0.1),
    "mnist": dict(n_qubits=4, batch_size=30, n_gates=None, n_blocks=3, alpha=0.05),
    "fashion": dict(n_qubits=4, batch_size=30, n_gates=None, n_blocks=3, alpha=0.05),
}

# Appendix-style pruning study: at most 5 gates on 2 qubits, at most 2 blocks on 4.
PRUNE_STUDY_LAYOUT = {
    "iris": dict(n_gates=5, n_blocks=None),
    "mnist": dict(n_gates=None, n_blocks=2),
    "fashion": dict(n_gates=None, n_blocks=2),
}


# generation slot reserved for the final retrain seed
FINAL_TAG = 0xF1A1


def default_cache_dir() -> Path:
    return Path(os.environ.get("EQAS_CACHE", Path.home() / ".cache" / "eqas"))


@dataclass
class RunConfig:
    dataset: str = "iris"
    seed: int = 0
    iterations: int = 100
    population: int = 30
    mutation_prob: float = 0.4
    alpha: Optional[float] = None
    stop_accuracy: Optional[float] = None
    learning_rate: float = 0.1
    batch_size: Optional[int] = None
    train_steps: int = 40
    final_train_steps: int = 200
    n_qubits: Optional[int] = None
    n_gates: Optional[int] = None
    n_blocks: Optional[int] = None
    n_train: int = 400
    n_test: int = 100
    prune_draws: int = 1
    qfim_input: str = "zero"
    selection_quota: float = 0.2
    threads: int = 1
    cache_dir: Optional[str] = None
    out: str = "runs"

    def __post_init__(self):
        if self.dataset not in DATASET_DEFAULTS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        for key, value in DATASET_DEFAULTS[self.dataset].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.n_qubits != DATASET_DEFAULTS[self.dataset]["n_qubits"]:
            raise ValueError(f"{self.dataset} needs {DATASET_DEFAULTS[self.dataset]['n_qubits']} qubits")
        if self.batch_size < 1 or self.train_steps < 1 or self.final_train_steps < 1:
            raise ValueError("batch_size and step budgets must be positive")
        if self.n_train < 2 or self.n_test < 2:
            raise ValueError("n_train and n_test must be at least 2")
        if not 0 < self.selection_quota <= 1:
            raise ValueError("selection_quota must lie in (0, 1]")
        if self.threads < 1:
            raise ValueError("threads must be positive")
        if self.qfim_input not in QFIM_INPUTS:
            raise ValueError(f"qfim_input must be one of {QFIM_INPUTS}")
        # constructing these validates the remaining fields
        self.evo_config()
        self.train_config()

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def layout(self) -> LayoutSpec:
        return LayoutSpec(self.n_qubits, n_blocks=self.n_blocks, n_gates=self.n_gates)

    def evo_config(self) -> EvoConfig:
        return EvoConfig(self.population, self.iterations, self.mutation_prob, self.alpha,
                         self.stop_accuracy, self.seed, self.threads)

    def train_config(self, steps: Optional[int] = None, seed: int = 0) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, batch_size=self.batch_size,
                           max_steps=steps or self.train_steps, seed=seed)

    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else default_cache_dir()

    def load_data(self, download: bool = True) -> datasets.EncodedDataset:
        return datasets.prepare(self.dataset, self.cache_path(), self.seed,
                                self.n_train, self.n_test, download=download)


QFIM_INPUTS = ("zero", "data")


class GenomeEvaluator:
    """Prune a genome, train what is left, report train/test accuracy.

    The QFIM is taken at |0...0> (``qfim_input="zero"``, the circuit on its
    own) or at the first training state (``"data"``). Fitness uses the
    training accuracy so that test data never steers the search.
    """

    def __init__(self, train_data: LabeledDataset, test_data: LabeledDataset,
                 train_cfg: TrainConfig, prune: bool = True, prune_draws: int = 1,
                 qfim_input: str = "zero"):
        if qfim_input not in QFIM_INPUTS:
            raise ValueError(f"qfim_input must be one of {QFIM_INPUTS}")
        self.train_data = train_data
        self.test_data = test_data
        self.train_cfg = train_cfg
        self.prune = prune
        self.prune_draws = prune_draws
        self.qfim_state = (init_state(train_data.n_qubits) if qfim_input == "zero"
                           else train_data.states[0])

    def __call__(self, genome: Genome, seed: int) -> Evaluation:
        rng = np.random.default_rng(seed)
        if self.prune:
            genome = prune_redundant(genome, self.qfim_state, rng, self.prune_draws).pruned_genome
        model = train(to_circuit(genome), self.train_data, replace(self.train_cfg, seed=seed), self.test_data)
        return Evaluation(model.train_accuracy, genome, model.params, model.test_accuracy)


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def finalize(genome: Genome, cfg: RunConfig, data: datasets.EncodedDataset) -> Evaluation:
    """Prune and retrain with the full step budget; shared by ``search`` and ``eval``."""
    evaluator = GenomeEvaluator(data.train, data.test, cfg.train_config(cfg.final_train_steps),
                                prune_draws=cfg.prune_draws, qfim_input=cfg.qfim_input)
    return evaluator(genome, individual_seed(cfg.seed, FINAL_TAG, 0))


def _report(cfg: RunConfig, genome: Genome, result: Evaluation, started: float, **extra) -> dict:
    report = {
        "dataset": cfg.dataset,
        "best_genome": genome.to_bitstring(),
        "accuracy": result.test_accuracy,
        "train_accuracy": result.accuracy,
        "gates": genome.dominant_count,
        "para_gates": genome.param_gate_count,
        "config": asdict(cfg),
        "metadata": {
            "wall_time_s": round(time.time() - started, 3),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        },
    }
    report.update(extra)
    return report


def table_row(report: dict) -> str:
    return (f"{report['dataset']:<8} EQAS  accuracy={100 * report['accuracy']:.1f}%  "
            f"gates={report['gates']}  para_gates={report['para_gates']}")


def run_search(cfg: RunConfig, data: Optional[datasets.EncodedDataset] = None) -> dict:
    started = time.time()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = data or cfg.load_data()
    evaluator = GenomeEvaluator(data.train, data.test, cfg.train_config(),
                                prune_draws=cfg.prune_draws, qfim_input=cfg.qfim_input)
    best, history = evolve(cfg.layout(), cfg.evo_config(), evaluator)
    _write_csv(out / "history.csv", GenerationRecord.CSV_HEADER, (r.csv_row() for r in history))
    final = finalize(best.genome, cfg, data)
    write_genome(out / "best_genome.txt", final.genome)
    report = _report(
        cfg, final.genome, final, started,
        history_path=str(out / "history.csv"),
        generations=len(history),
        search_best={
            "genome": best.bits, "train_accuracy": best.accuracy, "test_accuracy": best.test_accuracy,
            "gates": best.length, "para_gates": best.param_gate_count, "fitness": best.fitness,
        },
    )
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def run_eval(genome: Genome, cfg: RunConfig, data: Optional[datasets.EncodedDataset] = None) -> dict:
    started = time.time()
    if genome.n_qubits != cfg.n_qubits:
        raise ValueError(f"genome has {genome.n_qubits} qubits, {cfg.dataset} needs {cfg.n_qubits}")
    data = data or cfg.load_data()
    final = finalize(genome, cfg, data)
    return _report(cfg, final.genome, final, started, input_genome=genome.to_bitstring())


PRUNE_HEADER = "circuit,params_before,params_after,gates_before,gates_after,acc_before,acc_after,abs_delta"


def run_prune_study(cfg: RunConfig, n_circuits: int = 100,
                    data: Optional[datasets.EncodedDataset] = None) -> dict:
    """Train random circuits with and without redundant-parameter removal.

    Random circuits have random INCLUDED bits, so they hold at most the
    study layout's gate count. Accuracies are on the test split.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data = data or cfg.load_data()
    layout = LayoutSpec(cfg.n_qubits, random_included=True, **PRUNE_STUDY_LAYOUT[cfg.dataset])
    rng = np.random.default_rng([cfg.seed, 0xA])
    plain = GenomeEvaluator(data.train, data.test, cfg.train_config(), prune=False)
    pruning = GenomeEvaluator(data.train, data.test, cfg.train_config(),
                              prune_draws=cfg.prune_draws, qfim_input=cfg.qfim_input)
    rows, deltas, before_after = [], [], []
    for i in range(n_circuits):
        genome = random_genome(layout, rng)
        seed = individual_seed(cfg.seed, 0, i)
        before = plain(genome, seed)
        after = pruning(genome, seed)
        delta = abs(after.test_accuracy - before.test_accuracy)
        deltas.append(delta)
        pb, pa = genome.param_gate_count, after.genome.param_gate_count
        before_after.append((pb, pa))
        rows.append(",".join([str(i), str(pb), str(pa), str(genome.dominant_count),
                              str(after.genome.dominant_count), _fmt(before.test_accuracy),
                              _fmt(after.test_accuracy), _fmt(delta)]))
    _write_csv(out / "prune_study.csv", PRUNE_HEADER, rows)
    # strictly above 5 points; rounding guards 0.05000000001-style float noise
    n_over = sum(round(d, 9) > 0.05 for d in deltas)
    summary = {
        "dataset": cfg.dataset,
        "n_circuits": n_circuits,
        "n_over_5pct": n_over,
        "mean_params_before": float(np.mean([b for b, _ in before_after])) if rows else 0.0,
        "mean_params_after": float(np.mean([a for _, a in before_after])) if rows else 0.0,
    }
    _write_csv(out / "prune_summary.csv", ",".join(summary),
               [",".join(str(v) if not isinstance(v, float) else _fmt(v) for v in summary.values())])
    return summary


SELECTION_HEADER = "trial,strategy,mean_hamming,unique_count"


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided exact sign-test p-value for ``wins`` out of ``wins + losses`` (ties dropped)."""
    n = wins + losses
    if n == 0:
        return 1.0
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2**n


def run_selection_study(cfg: RunConfig, trials: int = 20,
                        data: Optional[datasets.EncodedDataset] = None) -> dict:
    """Offspring diversity after roulette-wheel versus elitist parent selection.

    Each trial evaluates one random population, picks parents both ways and
    breeds them with identically seeded generators.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    roulette_div, elitist_div = [], []
    if trials > 0:
        data = data or cfg.load_data()
        evaluator = GenomeEvaluator(data.train, data.test, cfg.train_config(),
                                prune_draws=cfg.prune_draws, qfim_input=cfg.qfim_input)
    for t in range(trials):
        rng = np.random.default_rng([cfg.seed, 0xB, t])
        genomes = [random_genome(cfg.layout(), rng) for _ in range(cfg.population)]
        seeds = [individual_seed(cfg.seed, t, i) for i in range(cfg.population)]
        population = evaluate_population(genomes, evaluator, seeds, cfg.alpha)
        parents = {
            "roulette": roulette_select(population, normalize_fitness(population), cfg.population, rng),
            "elitist": elitist_select(population, cfg.population, cfg.selection_quota),
        }
        for name, chosen in parents.items():
            children = breed([p.genome for p in chosen], cfg.mutation_prob,
                             np.random.default_rng([cfg.seed, 0xC, t]))
            div = diversity(children)
            (roulette_div if name == "roulette" else elitist_div).append(div)
            rows.append(f"{t},{name},{_fmt(div)},{unique_count(children)}")
    _write_csv(out / "selection_study.csv", SELECTION_HEADER, rows)
    wins = sum(r > e for r, e in zip(roulette_div, elitist_div))
    losses = sum(r < e for r, e in zip(roulette_div, elitist_div))
    return {
        "trials": trials,
        "mean_hamming_roulette": float(np.mean(roulette_div)) if trials else None,
        "mean_hamming_elitist": float(np.mean(elitist_div)) if trials else None,
        "roulette_wins": wins,
        "elitist_wins": losses,
        "sign_test_p": sign_test_p(wins, losses),
    }

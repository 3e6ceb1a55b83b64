"""``eqas`` command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 input parse error,
3 checksum mismatch, 4 network / download failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

from . import data as datasets
from .experiments import (
    RunConfig,
    run_eval,
    run_prune_study,
    run_search,
    run_selection_study,
    table_row,
)
from .genome import GenomeFormatError, read_genome

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_CHECKSUM, EXIT_NETWORK = 0, 1, 2, 3, 4

log = logging.getLogger("eqas")


class ConfigError(ValueError):
    pass


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=["iris", "mnist", "fashion"])
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--mutation-prob", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--stop-accuracy", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--train-steps", type=int, help="Adam steps per fitness evaluation")
    p.add_argument("--final-train-steps", type=int, help="Adam steps for the reported model")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--prune-draws", type=int)
    p.add_argument("--qfim-input", choices=["zero", "data"], help="state at which the QFIM is evaluated")
    p.add_argument("--threads", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--cache-dir")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqas", description="Evolutionary quantum architecture search")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the evolutionary search")
    _add_run_flags(p)

    p = sub.add_parser("eval", help="prune and retrain a saved genome")
    p.add_argument("genome_file")
    _add_run_flags(p)

    p = sub.add_parser("prune-study", help="accuracy change caused by redundant-parameter removal")
    p.add_argument("--n-circuits", type=int, default=100)
    _add_run_flags(p)

    p = sub.add_parser("selection-study", help="offspring diversity, roulette wheel vs elitist")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--quota", type=float, dest="selection_quota",
                   help="fraction of the population kept by elitist selection")
    _add_run_flags(p)

    p = sub.add_parser("data-fetch", help="download and verify a dataset")
    p.add_argument("--source", choices=["iris", "mnist", "fashion"], required=True)
    p.add_argument("--cache-dir")
    return parser


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _coerce(name: str, raw):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    if not isinstance(raw, str):
        return raw
    kind = str(kinds[name])
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def make_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < command-line flags."""
    merged = {}
    if getattr(args, "config", None):
        try:
            merged.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    names = set(RunConfig.field_names())
    for key, value in vars(args).items():
        if key in names and value is not None:
            merged[key] = value
    merged.setdefault("threads", os.cpu_count() or 1)
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_search(args) -> int:
    cfg = make_config(args)
    report = run_search(cfg)
    print(table_row(report))
    print(f"outputs written to {cfg.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    try:
        genome = read_genome(args.genome_file)
    except OSError as exc:
        raise GenomeFormatError(f"cannot read {args.genome_file}: {exc}") from exc
    cfg = make_config(args)
    if genome.n_qubits != cfg.n_qubits:
        raise GenomeFormatError(f"genome has {genome.n_qubits} qubits, {cfg.dataset} needs {cfg.n_qubits}")
    report = run_eval(genome, cfg)
    print(table_row(report))
    print(json.dumps({k: report[k] for k in ("accuracy", "train_accuracy", "gates", "para_gates")}))
    return EXIT_OK


def _cmd_prune_study(args) -> int:
    cfg = make_config(args)
    summary = run_prune_study(cfg, args.n_circuits)
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_selection_study(args) -> int:
    cfg = make_config(args)
    summary = run_selection_study(cfg, args.trials)
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_data_fetch(args) -> int:
    cache = Path(args.cache_dir) if args.cache_dir else RunConfig().cache_path()
    status = datasets.fetch(datasets.Source(args.source), cache)
    print(f"{args.source}: {status}")
    return EXIT_OK


COMMANDS = {
    "search": _cmd_search,
    "eval": _cmd_eval,
    "prune-study": _cmd_prune_study,
    "selection-study": _cmd_selection_study,
    "data-fetch": _cmd_data_fetch,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GenomeFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except datasets.ChecksumError as exc:
        print(f"checksum error: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    except datasets.DownloadError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except datasets.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())

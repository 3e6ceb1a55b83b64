"""Quantum Fisher information and redundant-parameter removal."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .genome import Genome, to_circuit
from .simulator import Circuit, run_circuit, statevector_jacobian

ZERO_TOL = 1e-8


def compute_qfim(circuit: Circuit, params, state: np.ndarray) -> np.ndarray:
    """Pure-state QFIM, ``F_jk = 4 Re[<d_j psi|d_k psi> - <d_j psi|psi><psi|d_k psi>]``."""
    if circuit.n_params == 0:
        raise ValueError("circuit has no parameters")
    state = np.asarray(state, dtype=complex)
    if state.ndim != 1:
        raise ValueError("compute_qfim takes a single state")
    psi = run_circuit(circuit, params, state)
    jac = np.array(statevector_jacobian(circuit, params, state))
    overlaps = jac.conj() @ jac.T
    berry = jac.conj() @ psi
    F = 4.0 * np.real(overlaps - np.outer(berry, berry.conj()))
    return 0.5 * (F + F.T)


def count_zero_eigs(F: np.ndarray, tol: float = ZERO_TOL) -> int:
    F = np.asarray(F, dtype=float)
    if F.size == 0:
        return 0
    eigs = np.linalg.eigvalsh(F)
    return int(np.sum(eigs < tol * max(eigs[-1], 1.0)))


def qfim_rank(F: np.ndarray, tol: float = ZERO_TOL) -> int:
    return np.asarray(F).shape[0] - count_zero_eigs(F, tol)


@dataclass(frozen=True)
class PruneResult:
    removed: tuple[int, ...]
    zero_count_trace: tuple[int, ...]
    pruned_genome: Genome
    qfim: Optional[np.ndarray] = None

    @property
    def n_params_before(self) -> int:
        return 0 if self.qfim is None else self.qfim.shape[0]


def _delete(F, k):
    keep = np.arange(F.shape[0]) != k
    return F[np.ix_(keep, keep)]


def prune_redundant(
    genome: Genome,
    state: np.ndarray,
    rng: np.random.Generator,
    draws: int = 1,
    tol: float = ZERO_TOL,
) -> PruneResult:
    """Drop parameterized gates whose QFIM row/column removal lowers the
    zero-eigenvalue count.

    The QFIM is evaluated at random angles (averaged over ``draws`` draws, so
    a direction counts as null only if it is null in every draw). Rows are
    probed in order; a committed deletion keeps the probe index in place so
    that it names the next surviving parameter, a rejected one restores the
    matrix and advances. ``zero_count_trace`` starts with the initial count
    and gains one entry per committed deletion.
    """
    circuit = to_circuit(genome)
    n = circuit.n_params
    if n == 0:
        return PruneResult((), (), genome)
    F = np.zeros((n, n))
    for _ in range(draws):
        F += compute_qfim(circuit, rng.uniform(0.0, 2 * np.pi, n), state)
    F /= draws

    E = count_zero_eigs(F, tol)
    trace = [E]
    alive = list(range(n))
    removed = []
    current = F
    k = 0
    while E > 0 and k < len(alive):
        trial = _delete(current, k)
        e_k = count_zero_eigs(trial, tol)
        if e_k < E:
            removed.append(alive.pop(k))
            current, E = trial, e_k
            trace.append(E)
        else:
            k += 1

    removed.sort()
    gene_of = genome.param_gene_indices()
    drop = {gene_of[p] for p in removed}
    pruned = genome.with_included(g.included and i not in drop for i, g in enumerate(genome.genes))
    return PruneResult(tuple(removed), tuple(trace), pruned, F)

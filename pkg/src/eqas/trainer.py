"""Adam training of circuit parameters for binary classification.

The model output is <Z> on qubit 0 after the circuit; the predicted class is
its sign with ties going to +1. Loss is the batch mean of
``(output - label)**2`` with labels in {-1, +1}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .simulator import Circuit, cnot_ring, expectation_z, loss_gradient, run_circuit

READOUT_QUBIT = 0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    batch_size: int = 10
    max_steps: int = 40
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_steps < 1:
            raise ValueError("batch_size and max_steps must be positive")


@dataclass(frozen=True)
class LabeledDataset:
    """Prepared input states (encoding and CNOT ring already applied) with ±1 labels."""

    states: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=complex))
        labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if states.shape[0] != labels.shape[0]:
            raise ValueError("states and labels differ in length")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_qubits(self) -> int:
        return self.states.shape[1].bit_length() - 1


@dataclass
class TrainedModel:
    params: np.ndarray
    train_accuracy: float
    test_accuracy: Optional[float] = None
    loss_history: list[float] = field(default_factory=list)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def predict(circuit: Circuit, params, state: np.ndarray, prelude: bool = False):
    """<Z_0> after the circuit. ``prelude`` runs the CNOT ring first."""
    state = np.asarray(state, dtype=complex)
    if prelude:
        state = run_circuit(cnot_ring(circuit.n_qubits), [], state)
    return expectation_z(run_circuit(circuit, params, state), READOUT_QUBIT)


def classify(outputs) -> np.ndarray:
    return np.where(np.asarray(outputs) >= 0.0, 1.0, -1.0)


def mse_loss(outputs, labels) -> float:
    outputs = np.asarray(outputs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if outputs.size == 0:
        raise ValueError("empty batch")
    if outputs.shape != labels.shape:
        raise ValueError("outputs and labels differ in shape")
    return float(np.mean((outputs - labels) ** 2))


def batch_loss_gradient(circuit: Circuit, params, states, labels) -> tuple[float, np.ndarray]:
    """MSE loss over a batch and its gradient with respect to the parameters."""
    outputs = predict(circuit, params, states)
    dout = loss_gradient(circuit, params, states, READOUT_QUBIT)
    residual = outputs - labels
    grad = (2.0 / len(labels)) * residual @ dout
    return float(np.mean(residual**2)), grad


def adam_step(params, grads, state: AdamState, cfg: TrainConfig) -> tuple[np.ndarray, AdamState]:
    grads = np.asarray(grads, dtype=float)
    if grads.shape != np.shape(params):
        raise ValueError("params and grads differ in shape")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grads**2
    m_hat = m / (1 - cfg.beta1**t)
    v_hat = v / (1 - cfg.beta2**t)
    new = np.asarray(params, dtype=float) - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new, AdamState(m, v, t)


def evaluate(circuit: Circuit, params, data: LabeledDataset) -> float:
    if len(data) == 0:
        raise ValueError("empty dataset")
    preds = classify(predict(circuit, params, data.states))
    return float(np.mean(preds == data.labels))


def _batches(n, batch_size, rng):
    per_epoch = max(1, n // batch_size)
    while True:
        order = rng.permutation(n)
        for b in range(per_epoch):
            yield order[b * batch_size:(b + 1) * batch_size]


def train(
    circuit: Circuit,
    data: LabeledDataset,
    cfg: TrainConfig,
    test: Optional[LabeledDataset] = None,
) -> TrainedModel:
    """Minibatch Adam from uniform [0, 2pi) initial angles.

    Batches are drawn without replacement and reshuffled every epoch; a tail
    shorter than ``batch_size`` is dropped.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if data.n_qubits != circuit.n_qubits:
        raise ValueError(f"data has {data.n_qubits} qubits, circuit {circuit.n_qubits}")
    rng = np.random.default_rng(cfg.seed)
    params = rng.uniform(0.0, 2 * np.pi, circuit.n_params)
    history = []
    if circuit.n_params:
        batch_size = min(cfg.batch_size, len(data))
        adam = AdamState.zeros(circuit.n_params)
        batches = _batches(len(data), batch_size, rng)
        for _ in range(cfg.max_steps):
            idx = next(batches)
            loss, grad = batch_loss_gradient(circuit, params, data.states[idx], data.labels[idx])
            history.append(loss)
            params, adam = adam_step(params, grad, adam, cfg)
    return TrainedModel(
        params=params,
        train_accuracy=evaluate(circuit, params, data),
        test_accuracy=None if test is None else evaluate(circuit, params, test),
        loss_history=history,
    )

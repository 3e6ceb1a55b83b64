"""Dense statevector simulation of the eight-gate operation pool.

Conventions
-----------
* ``R_a(theta) = exp(-i theta a / 2)`` for ``a`` in {X, Y, Z}.
* Controlled rotations apply ``R_a(theta)`` to the target when the control
  is ``|1>``; CNOT flips the target under the same condition.
* Qubit 0 is the most significant bit of the basis index, so ``|10>`` on two
  qubits is index 2.

Every function accepts either a single state of shape ``(2**n,)`` or a batch
of states of shape ``(batch, 2**n)``; gates act on the last axis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

MAX_QUBITS = 12


class GateKind(enum.Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    CNOT = "CNOT"
    CRX = "CRX"
    CRY = "CRY"
    CRZ = "CRZ"

    @property
    def parameterized(self) -> bool:
        return self not in (GateKind.H, GateKind.CNOT)

    @property
    def two_qubit(self) -> bool:
        return self in (GateKind.CNOT, GateKind.CRX, GateKind.CRY, GateKind.CRZ)


SINGLE_QUBIT_KINDS = (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.H)
TWO_QUBIT_KINDS = (GateKind.CNOT, GateKind.CRX, GateKind.CRY, GateKind.CRZ)

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

_GENERATORS = {
    GateKind.RX: _X, GateKind.CRX: _X,
    GateKind.RY: _Y, GateKind.CRY: _Y,
    GateKind.RZ: _Z, GateKind.CRZ: _Z,
}


@dataclass(frozen=True)
class GateInstance:
    """One gate placed on specific qubits.

    ``control`` is only set for two-qubit gates. ``param_slot`` indexes the
    circuit's parameter vector and is set iff the gate kind is parameterized.
    """

    kind: GateKind
    target: int
    control: Optional[int] = None
    param_slot: Optional[int] = None

    def __post_init__(self):
        if self.kind.two_qubit:
            if self.control is None:
                raise ValueError(f"{self.kind.name} needs a control qubit")
            if self.control == self.target:
                raise ValueError("control and target must differ")
        elif self.control is not None:
            raise ValueError(f"{self.kind.name} takes no control qubit")
        if self.kind.parameterized != (self.param_slot is not None):
            raise ValueError(f"param_slot mismatch for {self.kind.name}")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        slots = []
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} acts outside {self.n_qubits} qubits")
            if g.param_slot is not None:
                slots.append(g.param_slot)
        if slots != list(range(len(slots))):
            raise ValueError("param slots must be 0..n_params-1 in gate order")

    @property
    def n_params(self) -> int:
        return sum(1 for g in self.gates if g.kind.parameterized)

    def __add__(self, other: "Circuit") -> "Circuit":
        """Concatenate, renumbering ``other``'s parameter slots after ours."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        shift = self.n_params
        moved = tuple(
            g if g.param_slot is None else GateInstance(g.kind, g.target, g.control, g.param_slot + shift)
            for g in other.gates
        )
        return Circuit(self.n_qubits, self.gates + moved)


def build_circuit(n_qubits: int, ops: Sequence[tuple]) -> Circuit:
    """Build a circuit from ``(kind, target)`` / ``(kind, control, target)`` tuples,
    assigning parameter slots in order."""
    gates = []
    slot = 0
    for op in ops:
        kind = GateKind(op[0]) if isinstance(op[0], str) else op[0]
        if kind.two_qubit:
            control, target = op[1], op[2]
        else:
            control, target = None, op[1]
        ps = None
        if kind.parameterized:
            ps, slot = slot, slot + 1
        gates.append(GateInstance(kind, target, control, ps))
    return Circuit(n_qubits, tuple(gates))


def cnot_ring(n_qubits: int) -> Circuit:
    """CNOTs from q_i to q_(i+1 mod n) for every qubit; empty for one qubit."""
    if n_qubits < 2:
        return Circuit(n_qubits)
    return build_circuit(n_qubits, [(GateKind.CNOT, i, (i + 1) % n_qubits) for i in range(n_qubits)])


def gate_matrix(kind: GateKind, theta: Optional[float] = None) -> np.ndarray:
    """2x2 matrix acting on the target qubit (for controlled gates, the
    block applied when the control is ``|1>``)."""
    if kind is GateKind.H:
        return _H
    if kind is GateKind.CNOT:
        return _X
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind in (GateKind.RX, GateKind.CRX):
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind in (GateKind.RY, GateKind.CRY):
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array([[c - 1j * s, 0], [0, c + 1j * s]])


def _derivative_matrix(kind: GateKind, theta: float) -> np.ndarray:
    return -0.5j * _GENERATORS[kind] @ gate_matrix(kind, theta)


def _n_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise ValueError(f"state dimension {dim} is not a power of two")
    return n


def _apply_2x2(state, mat, target, control, n, zero_inactive=False):
    lead = state.ndim - 1
    t = state.reshape(state.shape[:-1] + (2,) * n)
    out = np.zeros_like(t) if zero_inactive else t.copy()
    i0 = [slice(None)] * (lead + n)
    if control is not None:
        i0[lead + control] = 1
    i1 = list(i0)
    i0[lead + target] = 0
    i1[lead + target] = 1
    i0, i1 = tuple(i0), tuple(i1)
    a0, a1 = t[i0], t[i1]
    out[i0] = mat[0, 0] * a0 + mat[0, 1] * a1
    out[i1] = mat[1, 0] * a0 + mat[1, 1] * a1
    return out.reshape(state.shape)


def init_state(n_qubits: int) -> np.ndarray:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def apply_gate(state: np.ndarray, gate: GateInstance, theta: Optional[float] = None) -> np.ndarray:
    n = _n_qubits_of(state)
    if gate.kind.parameterized and theta is None:
        raise ValueError(f"{gate.kind.name} needs an angle")
    if not gate.kind.parameterized and theta is not None:
        raise ValueError(f"{gate.kind.name} takes no angle")
    if any(q < 0 or q >= n for q in gate.qubits):
        raise ValueError(f"gate {gate} acts outside {n} qubits")
    return _apply_2x2(np.asarray(state, dtype=complex), gate_matrix(gate.kind, theta),
                      gate.target, gate.control, n)


def _check(circuit: Circuit, params, state):
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} params, got {params.size}")
    state = np.asarray(state, dtype=complex)
    if state.shape[-1] != 2**circuit.n_qubits:
        raise ValueError(f"state dimension {state.shape[-1]} does not match {circuit.n_qubits} qubits")
    return params, state


def _theta(gate: GateInstance, params):
    return None if gate.param_slot is None else params[gate.param_slot]


def run_circuit(circuit: Circuit, params, state: np.ndarray) -> np.ndarray:
    params, psi = _check(circuit, params, state)
    n = circuit.n_qubits
    for g in circuit.gates:
        psi = _apply_2x2(psi, gate_matrix(g.kind, _theta(g, params)), g.target, g.control, n)
    return psi


def expectation_z(state: np.ndarray, qubit: int):
    """<Z> on ``qubit``; a float for one state, an array for a batch."""
    n = _n_qubits_of(state)
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    probs = np.abs(state) ** 2
    probs = probs.reshape(state.shape[:-1] + (2**qubit, 2, 2 ** (n - qubit - 1)))
    z = probs[..., 0, :].sum(axis=(-2, -1)) - probs[..., 1, :].sum(axis=(-2, -1))
    return float(z) if np.ndim(z) == 0 else z


def statevector_jacobian(circuit: Circuit, params, state: np.ndarray) -> list[np.ndarray]:
    """Exact d(psi)/d(theta_k) for every parameter slot, in slot order."""
    params, psi = _check(circuit, params, state)
    n = circuit.n_qubits
    gates = circuit.gates
    jac = []
    for i, g in enumerate(gates):
        if g.param_slot is not None:
            d = _apply_2x2(psi, _derivative_matrix(g.kind, params[g.param_slot]),
                           g.target, g.control, n, zero_inactive=True)
            for h in gates[i + 1:]:
                d = _apply_2x2(d, gate_matrix(h.kind, _theta(h, params)), h.target, h.control, n)
            jac.append(d)
        psi = _apply_2x2(psi, gate_matrix(g.kind, _theta(g, params)), g.target, g.control, n)
    return jac


def loss_gradient(circuit: Circuit, params, state: np.ndarray, readout_qubit: int = 0) -> np.ndarray:
    """Gradient of <Z_readout> with respect to the parameters.

    Uses adjoint differentiation, which is exact for the controlled rotations
    as well. Returns shape ``(n_params,)`` for one state and
    ``(batch, n_params)`` for a batch.
    """
    params, psi = _check(circuit, params, state)
    n = circuit.n_qubits
    if not 0 <= readout_qubit < n:
        raise ValueError(f"qubit {readout_qubit} out of range for {n} qubits")
    grad = np.zeros(psi.shape[:-1] + (circuit.n_params,))
    if circuit.n_params == 0:
        return grad
    psi = run_circuit(circuit, params, psi)
    lam = _apply_2x2(psi, _Z, readout_qubit, None, n)
    for g in reversed(circuit.gates):
        inv = gate_matrix(g.kind, _theta(g, params)).conj().T
        psi = _apply_2x2(psi, inv, g.target, g.control, n)
        if g.param_slot is not None:
            mu = _apply_2x2(psi, _derivative_matrix(g.kind, params[g.param_slot]),
                            g.target, g.control, n, zero_inactive=True)
            grad[..., g.param_slot] = 2.0 * np.real(np.sum(lam.conj() * mu, axis=-1))
        lam = _apply_2x2(lam, inv, g.target, g.control, n)
    return grad

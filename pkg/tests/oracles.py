"""Independent reference computations used by the tests.

Nothing here calls the package's state-update code: gates are built as full
2^n x 2^n matrices from Kronecker products, derivatives come from finite
differences.
"""
import numpy as np

from eqas.simulator import GateKind

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P0 = np.diag([1.0 + 0j, 0])
P1 = np.diag([0j, 1.0])


def rot(axis, theta):
    # exp(-i theta/2 * axis) for a Pauli axis, via the closed form
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * axis


def embed(ops, n):
    """Kronecker product with ``ops[q]`` on qubit q (qubit 0 leftmost / MSB)."""
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, ops.get(q, I2))
    return out


def target_block(kind, theta):
    return {
        GateKind.RX: lambda: rot(X, theta), GateKind.CRX: lambda: rot(X, theta),
        GateKind.RY: lambda: rot(Y, theta), GateKind.CRY: lambda: rot(Y, theta),
        GateKind.RZ: lambda: rot(Z, theta), GateKind.CRZ: lambda: rot(Z, theta),
        GateKind.H: lambda: H, GateKind.CNOT: lambda: X,
    }[kind]()


def dense_gate(gate, theta, n):
    block = target_block(gate.kind, theta)
    if gate.control is None:
        return embed({gate.target: block}, n)
    return embed({gate.control: P0}, n) + embed({gate.control: P1, gate.target: block}, n)


def dense_unitary(circuit, params):
    U = np.eye(2**circuit.n_qubits, dtype=complex)
    for g in circuit.gates:
        theta = None if g.param_slot is None else params[g.param_slot]
        U = dense_gate(g, theta, circuit.n_qubits) @ U
    return U


def dense_run(circuit, params, state):
    return dense_unitary(circuit, params) @ state


def dense_z(state, qubit, n):
    return float(np.real(state.conj() @ embed({qubit: Z}, n) @ state))


def fd_jacobian(circuit, params, state, step=1e-5):
    params = np.asarray(params, dtype=float)
    cols = []
    for k in range(len(params)):
        e = np.zeros_like(params)
        e[k] = step
        cols.append((dense_run(circuit, params + e, state) - dense_run(circuit, params - e, state)) / (2 * step))
    return cols


def fd_expectation_grad(circuit, params, state, qubit=0, step=1e-5):
    params = np.asarray(params, dtype=float)
    n = circuit.n_qubits
    out = []
    for k in range(len(params)):
        e = np.zeros_like(params)
        e[k] = step
        up = dense_z(dense_run(circuit, params + e, state), qubit, n)
        down = dense_z(dense_run(circuit, params - e, state), qubit, n)
        out.append((up - down) / (2 * step))
    return np.array(out)


def fidelity_qfim(circuit, params, state, step=1e-3):
    """QFIM from the curvature of the fidelity, F_jk = -2 d^2 |<psi(t)|psi(t + dj + dk)>|^2.

    Mixed second derivatives come from a four-point stencil of the fidelity
    with the unshifted state.
    """
    params = np.asarray(params, dtype=float)
    psi0 = dense_run(circuit, params, state)
    n = len(params)

    def fid(shift):
        psi = dense_run(circuit, params + shift, state)
        return abs(np.vdot(psi0, psi)) ** 2

    F = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            ej = np.zeros(n)
            ek = np.zeros(n)
            ej[j] = step
            ek[k] = step
            d2 = (fid(ej + ek) - fid(ej - ek) - fid(-ej + ek) + fid(-ej - ek)) / (4 * step * step)
            F[j, k] = -2.0 * d2
    return F


def random_circuit(rng, n_qubits, n_gates, kinds=None):
    from eqas.simulator import build_circuit
    kinds = kinds or list(GateKind)
    ops = []
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        if kind.two_qubit:
            c, t = rng.choice(n_qubits, size=2, replace=False)
            ops.append((kind, int(c), int(t)))
        else:
            ops.append((kind, int(rng.integers(n_qubits))))
    return build_circuit(n_qubits, ops)


def random_state(rng, n_qubits):
    v = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return v / np.linalg.norm(v)

"""
Dense statevector simulator for N-qubit pure states.

Bit ordering is little-endian: qubit 0 is the least significant bit of the
basis index, so X on qubit 0 maps |00> (index 0) to index 1. The same
ordering is used for probabilities and sampling.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from services.circuits import Circuit, GateOp
from services.errors import DimensionMismatchError, GateIndexError, SizeError
from services.gates import gate_matrix

MAX_QUBITS = 20


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.amplitudes.shape[0] != 1 << self.n_qubits:
            raise SizeError(
                f"{self.n_qubits} qubit(s) need {1 << self.n_qubits} amplitudes, "
                f"got {self.amplitudes.shape[0]}"
            )

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "QuantumState":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        dim = amps.shape[0]
        if dim == 0 or dim & (dim - 1):
            raise SizeError(f"amplitude count must be a power of two, got {dim}")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(dim.bit_length() - 1, amps)

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def new_zero_state(n_qubits: int) -> QuantumState:
    """|0...0> on `n_qubits` qubits"""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return QuantumState(n_qubits, amps)


def _contract(amplitudes: np.ndarray, n_qubits: int, matrix: np.ndarray,
              targets: Sequence[int]) -> np.ndarray:
    k = len(targets)
    psi = amplitudes.reshape((2,) * n_qubits)
    # C-order reshape puts the most significant bit on axis 0
    axes = [n_qubits - 1 - q for q in targets]
    u = matrix.reshape((2,) * (2 * k))
    psi = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), axes))
    psi = np.moveaxis(psi, list(range(k)), axes)
    return np.ascontiguousarray(psi).reshape(-1)


def _check_targets(n_qubits: int, targets: Sequence[int]) -> None:
    if len(set(targets)) != len(targets):
        raise GateIndexError(f"targets must be distinct, got {tuple(targets)}")
    for q in targets:
        if not 0 <= q < n_qubits:
            raise GateIndexError(f"target {q} out of range for {n_qubits} qubit(s)")


def apply_unitary(state: QuantumState, matrix: np.ndarray, targets: Sequence[int]) -> QuantumState:
    """
    Apply a 2^k x 2^k matrix to the k listed qubits.

    The matrix is written in the basis |s_a s_b ...> of `targets`, first
    target most significant.
    """
    targets = [int(q) for q in targets]
    _check_targets(state.n_qubits, targets)
    matrix = np.asarray(matrix, dtype=np.complex128)
    dim = 1 << len(targets)
    if matrix.shape != (dim, dim):
        raise DimensionMismatchError(
            f"matrix shape {matrix.shape} does not match {len(targets)} target(s)"
        )
    return QuantumState(state.n_qubits, _contract(state.amplitudes, state.n_qubits, matrix, targets))


def apply_gate(state: QuantumState, op: GateOp) -> QuantumState:
    _check_targets(state.n_qubits, op.targets)
    return QuantumState(
        state.n_qubits,
        _contract(state.amplitudes, state.n_qubits, gate_matrix(op), op.targets),
    )


def apply_circuit(state: QuantumState, circuit: Circuit) -> QuantumState:
    if circuit.n_qubits != state.n_qubits:
        raise DimensionMismatchError(
            f"circuit has {circuit.n_qubits} qubit(s), state has {state.n_qubits}"
        )
    amps = state.amplitudes.copy()
    for op in circuit.ops:
        amps = _contract(amps, state.n_qubits, gate_matrix(op), op.targets)
    return QuantumState(state.n_qubits, amps)


def overlap(a: QuantumState, b: QuantumState) -> float:
    """|<a|b>|^2, i.e. Tr(rho_a rho_b) for pure states"""
    if a.n_qubits != b.n_qubits:
        raise DimensionMismatchError(f"overlap of {a.n_qubits}- and {b.n_qubits}-qubit states")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full 2^N x 2^N unitary, built column by column from basis-state runs"""
    dim = 1 << circuit.n_qubits
    columns = []
    for index in range(dim):
        basis = np.zeros(dim, dtype=np.complex128)
        basis[index] = 1.0
        columns.append(apply_circuit(QuantumState(circuit.n_qubits, basis), circuit).amplitudes)
    return np.stack(columns, axis=1)

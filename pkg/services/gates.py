"""
Native gate set of a superconducting backend (X, SqrtX, Rz, ECR), the
decompositions of Rx/Ry into it, transpilation and depth accounting.

Decomposition sequences are listed in time order: the first gate in the
list acts first, so the matrix of a sequence is M_last @ ... @ M_first.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from math import pi
from typing import Dict, Iterable, List

import numpy as np

from services.circuits import Circuit, GateKind, GateOp, NativeCircuit
from services.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

PHASE_TOLERANCE = 1e-10

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128)
# ECR = Rxx(pi/2) X_2, expanded: (I(x)X - i X(x)I) / sqrt(2)
_ECR = (np.kron(_I2, _X) - 1j * np.kron(_X, _I2)) / np.sqrt(2.0)


def _rz(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=np.complex128)


def _ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def gate_matrix(op: GateOp) -> np.ndarray:
    """Unitary of `op`; two-qubit matrices use the basis |s_first s_second>"""
    kind = op.kind
    if kind is GateKind.X:
        return _X
    if kind is GateKind.SQRT_X:
        return _SQRT_X
    if kind is GateKind.RZ:
        return _rz(op.angle)
    if kind is GateKind.RY:
        return _ry(op.angle)
    if kind is GateKind.RX:
        return _rx(op.angle)
    return _ECR


def decompose_rx(angle: float, qubit: int = 0) -> List[GateOp]:
    """Rx(phi) = Rz(pi/2) SqrtX Rz(pi + phi) SqrtX Rz(5pi/2), up to global phase"""
    return [
        GateOp.rz(qubit, pi / 2),
        GateOp.sqrt_x(qubit),
        GateOp.rz(qubit, pi + angle),
        GateOp.sqrt_x(qubit),
        GateOp.rz(qubit, 5 * pi / 2),
    ]


def decompose_ry(angle: float, qubit: int = 0) -> List[GateOp]:
    """Ry(phi) = Rz(-pi) SqrtX Rz(pi - phi) SqrtX, up to global phase"""
    return [
        GateOp.rz(qubit, -pi),
        GateOp.sqrt_x(qubit),
        GateOp.rz(qubit, pi - angle),
        GateOp.sqrt_x(qubit),
    ]


def sequence_matrix(ops: Iterable[GateOp]) -> np.ndarray:
    """Matrix of a gate sequence acting on a single qubit"""
    ops = list(ops)
    if len({q for op in ops for q in op.targets}) > 1:
        raise DimensionMismatchError("sequence_matrix takes gates on one common qubit")
    result = _I2.copy()
    for op in ops:
        result = gate_matrix(op) @ result
    return result


def equal_up_to_global_phase(a: np.ndarray, b: np.ndarray, atol: float = PHASE_TOLERANCE) -> bool:
    """Compare after dividing out the phase of the first nonzero entry of `a`"""
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    b = np.asarray(b, dtype=np.complex128).reshape(-1)
    if a.shape != b.shape:
        return False
    nonzero = np.flatnonzero(np.abs(a) > atol)
    if nonzero.size == 0:
        return bool(np.allclose(b, 0.0, atol=atol))
    pivot = nonzero[0]
    if abs(b[pivot]) <= atol:
        return False
    a_phase = a[pivot] / abs(a[pivot])
    b_phase = b[pivot] / abs(b[pivot])
    return bool(np.allclose(a / a_phase, b / b_phase, atol=atol))


def transpile(circuit: Circuit) -> NativeCircuit:
    """Replace Rx/Ry by their native sequences; native gates pass through"""
    native = NativeCircuit(circuit.n_qubits)
    for op in circuit.ops:
        if op.kind is GateKind.RY:
            native.extend(decompose_ry(op.angle, op.targets[0]))
        elif op.kind is GateKind.RX:
            native.extend(decompose_rx(op.angle, op.targets[0]))
        else:
            native.append(op)
    logger.debug("transpiled %d op(s) into %d native op(s)", len(circuit), len(native))
    return native


@dataclass
class DepthReport:
    native_depth: int
    gate_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def total_ops(self) -> int:
        return sum(self.gate_counts.values())


def depth(circuit: Circuit) -> DepthReport:
    """
    Dependency-chain depth with every gate weighted 1: a gate sits one level
    above the latest earlier gate sharing any of its qubits.
    """
    levels = [0] * circuit.n_qubits
    for op in circuit.ops:
        level = 1 + max(levels[q] for q in op.targets)
        for q in op.targets:
            levels[q] = level
    counts = Counter(op.kind.value for op in circuit.ops)
    return DepthReport(native_depth=max(levels, default=0), gate_counts=dict(sorted(counts.items())))

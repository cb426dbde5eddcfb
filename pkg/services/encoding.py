"""
Fourier encoding of generalized coordinates into N qubits:

    U(x) = W~ e^{-i x_X G} W^(X) ... W^(2) e^{-i x_1 G} W^(1),  G = 1/2 sum_i Z_i

Each W block is `layers_per_block` layers of one Ry(theta) per qubit
followed by an ECR ladder on neighbouring qubits; W~ is `mixing_blocks`
more of the same. The generator layer is an Rz(x_j) on every qubit.
"""

import logging
from dataclasses import dataclass
from math import pi
from typing import List, Sequence, Tuple

import numpy as np

from models import CoordKind, EncodingSpec, MoleculeSpec
from services.circuits import Circuit, GateOp
from services.errors import DimensionMismatchError, DomainError
from services.statevector import QuantumState, apply_circuit, new_zero_state

logger = logging.getLogger(__name__)


def rescale(geometry, molecule: MoleculeSpec) -> np.ndarray:
    """Bond lengths r -> r*pi/r_bar, angles phi -> phi/angle_divisor (radians in, radians out)"""
    coords = np.asarray(getattr(geometry, "coords", geometry), dtype=float).reshape(-1)
    if coords.shape[0] != molecule.n_coords:
        raise DimensionMismatchError(
            f"{molecule.name} expects {molecule.n_coords} coordinate(s), got {coords.shape[0]}"
        )
    x = np.empty_like(coords)
    for i, (value, kind) in enumerate(zip(coords, molecule.coord_kinds)):
        if kind is CoordKind.BOND_LENGTH:
            if value <= 0:
                raise DomainError(f"bond length {molecule.coord_names[i]} must be positive, got {value}")
            x[i] = value * pi / molecule.reference_length
        else:
            x[i] = value / molecule.angle_divisor
    return x


def rescale_jacobian(molecule: MoleculeSpec) -> np.ndarray:
    """dx_i/dq_i of `rescale` (the map is diagonal and linear)"""
    return np.array([
        pi / molecule.reference_length if kind is CoordKind.BOND_LENGTH else 1.0 / molecule.angle_divisor
        for kind in molecule.coord_kinds
    ])


@dataclass(frozen=True)
class Reservoir:
    """Random Ry angles, one row per block: X data blocks then the mixing blocks"""

    n_qubits: int
    n_coords: int
    layers_per_block: int
    block_angles: np.ndarray

    def __post_init__(self):
        angles = np.array(self.block_angles, dtype=float)
        if angles.ndim != 2 or angles.shape[1] != self.layers_per_block * self.n_qubits:
            raise DimensionMismatchError(
                f"reservoir rows need {self.layers_per_block * self.n_qubits} angles, got shape {angles.shape}"
            )
        angles.setflags(write=False)
        object.__setattr__(self, "block_angles", angles)

    @property
    def n_blocks(self) -> int:
        return self.block_angles.shape[0]

    @property
    def mixing_blocks(self) -> int:
        return self.n_blocks - self.n_coords

    def layer_angles(self, block: int, layer: int) -> np.ndarray:
        start = layer * self.n_qubits
        return self.block_angles[block, start:start + self.n_qubits]

    def to_list(self) -> List[List[float]]:
        return self.block_angles.tolist()

    @classmethod
    def from_list(cls, spec: EncodingSpec, rows: Sequence[Sequence[float]]) -> "Reservoir":
        reservoir = cls(spec.n_qubits, spec.n_coords, spec.layers_per_block, np.asarray(rows, dtype=float))
        _check_reservoir(spec, reservoir)
        outside = np.argwhere(~((reservoir.block_angles > 0) & (reservoir.block_angles < pi / 2)))
        if outside.size:
            block, k = (int(v) for v in outside[0])
            raise DomainError(
                f"reservoir angle {reservoir.block_angles[block, k]!r} (block {block}, entry {k}) is outside (0, pi/2)"
            )
        return reservoir


def sample_reservoir(spec: EncodingSpec) -> Reservoir:
    """
    Draw every angle i.i.d. uniform on the open interval (0, pi/2) from a
    PCG64 generator seeded with `spec.seed`, row-major over
    (block, layer, qubit).
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n_blocks = spec.n_coords + spec.mixing_blocks
    width = spec.layers_per_block * spec.n_qubits
    angles = rng.uniform(np.nextafter(0.0, 1.0), pi / 2, size=(n_blocks, width))
    return Reservoir(spec.n_qubits, spec.n_coords, spec.layers_per_block, angles)


def _check_reservoir(spec: EncodingSpec, reservoir: Reservoir) -> None:
    expected = (spec.n_coords + spec.mixing_blocks, spec.layers_per_block * spec.n_qubits)
    if (reservoir.n_qubits, reservoir.n_coords) != (spec.n_qubits, spec.n_coords) \
            or reservoir.block_angles.shape != expected:
        raise DimensionMismatchError(
            f"reservoir shape {reservoir.block_angles.shape} does not fit encoding (expected {expected})"
        )


def entangler_pairs(n_qubits: int, topology: str = "linear") -> List[Tuple[int, int]]:
    pairs = [(q, q + 1) for q in range(n_qubits - 1)]
    if topology == "ring" and n_qubits > 2:
        pairs.append((n_qubits - 1, 0))
    return pairs


def _block_ops(spec: EncodingSpec, reservoir: Reservoir, block: int) -> List[GateOp]:
    ops: List[GateOp] = []
    pairs = entangler_pairs(spec.n_qubits, spec.topology)
    for layer in range(spec.layers_per_block):
        angles = reservoir.layer_angles(block, layer)
        ops.extend(GateOp.ry(q, angles[q]) for q in range(spec.n_qubits))
        ops.extend(GateOp.ecr(a, b) for a, b in pairs)
    return ops


def block_length(spec: EncodingSpec) -> int:
    return spec.layers_per_block * (spec.n_qubits + len(entangler_pairs(spec.n_qubits, spec.topology)))


def data_gate_indices(spec: EncodingSpec, coord_index: int) -> List[int]:
    """Positions in `build_circuit` output of the Rz gates carrying x[coord_index]"""
    if not 0 <= coord_index < spec.n_coords:
        raise DimensionMismatchError(f"coordinate index {coord_index} outside [0, {spec.n_coords})")
    start = coord_index * (block_length(spec) + spec.n_qubits) + block_length(spec)
    return list(range(start, start + spec.n_qubits))


def build_circuit(x, spec: EncodingSpec, reservoir: Reservoir) -> Circuit:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != spec.n_coords:
        raise DimensionMismatchError(f"encoding expects {spec.n_coords} input(s), got {x.shape[0]}")
    _check_reservoir(spec, reservoir)

    circuit = Circuit(spec.n_qubits)
    for j, value in enumerate(x):
        circuit.extend(_block_ops(spec, reservoir, j))
        circuit.extend(GateOp.rz(q, value) for q in range(spec.n_qubits))
    for block in range(spec.n_coords, reservoir.n_blocks):
        circuit.extend(_block_ops(spec, reservoir, block))
    return circuit


def encode_state(x, spec: EncodingSpec, reservoir: Reservoir) -> QuantumState:
    return apply_circuit(new_zero_state(spec.n_qubits), build_circuit(x, spec, reservoir))


def generator_diagonal(n_qubits: int) -> np.ndarray:
    """Eigenvalues of G = 1/2 sum_i Z_i over basis indices (little-endian)"""
    indices = np.arange(1 << n_qubits)
    ones = np.array([bin(i).count("1") for i in indices])
    return 0.5 * (n_qubits - 2 * ones)

"""
Parameter-shift derivatives of expectation values and the circuit-run cost
comparison between a VQE-style force evaluation and the QELM readout.

For f(theta) = <psi| e^{i theta G} O e^{-i theta G} |psi> with G having the
two eigenvalues +-lambda,

    f'(theta) = lambda * (f(theta + pi/(4 lambda)) - f(theta - pi/(4 lambda)))

holds exactly. Rz(theta) = exp(-i theta Z/2) has lambda = 1/2.
"""

import logging
from dataclasses import dataclass
from math import pi
from typing import Callable, Optional, Union

import numpy as np

from models import EncodingSpec, MoleculeSpec, ShiftRuleSpec, ShotPlan
from services.circuits import Circuit
from services.datasets import Dataset
from services.encoding import Reservoir, build_circuit, data_gate_indices, rescale, rescale_jacobian
from services.errors import DimensionMismatchError, UnsupportedShiftRuleError
from services.statevector import apply_circuit, new_zero_state
from services.training import (
    DiagonalObservable,
    EvaluationCounter,
    build_probability_matrix,
    fit_readout,
    target_matrix,
)

logger = logging.getLogger(__name__)

RZ_SHIFT_RULE = ShiftRuleSpec(lam=0.5)


def shift_rule_derivative(f: Callable[[float], float], theta: float, spec: ShiftRuleSpec = RZ_SHIFT_RULE) -> float:
    if spec.n_shifts != 1:
        raise UnsupportedShiftRuleError(
            f"only the two-eigenvalue rule (n_shifts=1) is available, got n_shifts={spec.n_shifts}"
        )
    shift = pi / (4.0 * spec.lam)
    return spec.lam * (f(theta + shift) - f(theta - shift))


def _as_observable(observable: Union[DiagonalObservable, np.ndarray]) -> DiagonalObservable:
    if isinstance(observable, DiagonalObservable):
        return observable
    return DiagonalObservable(np.asarray(observable, dtype=float).reshape(-1))


def expectation(circuit_at: Callable[[float], Circuit], observable, theta: float) -> float:
    """<O> on circuit_at(theta)|0...0>, from exact probabilities"""
    circuit = circuit_at(theta)
    state = apply_circuit(new_zero_state(circuit.n_qubits), circuit)
    return _as_observable(observable).expectation(state)


def coordinate_derivative(geometry, molecule: MoleculeSpec, enc: EncodingSpec, reservoir: Reservoir,
                          observable, coord_index: int) -> float:
    """
    d<O>/dq_j for the raw coordinate q_j: x_j feeds N Rz gates, each
    differentiated by its own shift rule, then scaled by dx_j/dq_j.
    """
    observable = _as_observable(observable)
    if observable.eigenvalues.shape[0] != 1 << enc.n_qubits:
        raise DimensionMismatchError(
            f"observable acts on {observable.eigenvalues.shape[0]} outcomes, encoding has {1 << enc.n_qubits}"
        )
    x = rescale(geometry, molecule)
    base = build_circuit(x, enc, reservoir)

    total = 0.0
    for index in data_gate_indices(enc, coord_index):
        def circuit_at(theta: float, index: int = index) -> Circuit:
            ops = list(base.ops)
            ops[index] = ops[index].with_angle(theta)
            return Circuit(base.n_qubits, ops)

        total += shift_rule_derivative(lambda t: expectation(circuit_at, observable, t), x[coord_index])
    return total * rescale_jacobian(molecule)[coord_index]


def coordinate_gradient(geometry, molecule: MoleculeSpec, enc: EncodingSpec, reservoir: Reservoir,
                        observable) -> np.ndarray:
    return np.array([
        coordinate_derivative(geometry, molecule, enc, reservoir, observable, j)
        for j in range(molecule.n_coords)
    ])


def vqe_evaluations_per_point(n_coords: int, n_shifts: int = 1) -> int:
    """Circuit runs for one energy plus all forces by shift rules: 2 chi S + 1"""
    return 2 * n_coords * n_shifts + 1


@dataclass
class ForceReadoutCost:
    n_geometries: int
    energy_targets: int
    joint_targets: int
    energy_only_evaluations: int
    joint_evaluations: int
    vqe_evaluations: int

    @property
    def forces_free(self) -> bool:
        return self.energy_only_evaluations == self.joint_evaluations


def qelm_force_readout(dataset: Dataset, enc: EncodingSpec, reservoir: Reservoir, plan: ShotPlan,
                       cutoff: float = 1e-12, n_shifts: int = 1,
                       workers: Optional[int] = 1) -> ForceReadoutCost:
    """
    Train an energy-only and an energy+forces readout on the same geometries,
    counting circuit evaluations for each. Forces are extra rows of W, so
    both counts equal the number of geometries.
    """
    counters = {}
    targets = {}
    for mode in ("energy", "joint"):
        counter = EvaluationCounter()
        P = build_probability_matrix(dataset.coords, dataset.molecule, enc, reservoir, plan, counter, workers or 1)
        readout = fit_readout(P, target_matrix(dataset, mode), cutoff)
        counters[mode] = counter.count
        targets[mode] = readout.n_targets

    cost = ForceReadoutCost(
        n_geometries=len(dataset),
        energy_targets=targets["energy"],
        joint_targets=targets["joint"],
        energy_only_evaluations=counters["energy"],
        joint_evaluations=counters["joint"],
        vqe_evaluations=len(dataset) * vqe_evaluations_per_point(dataset.molecule.n_coords, n_shifts),
    )
    logger.info("circuit evaluations: %d (energy) vs %d (energy+forces); shift-rule VQE would need %d",
                cost.energy_only_evaluations, cost.joint_evaluations, cost.vqe_evaluations)
    return cost

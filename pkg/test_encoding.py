"""Tests for coordinate rescaling and the Fourier-encoding circuit"""

import numpy as np
import pytest
from scipy.linalg import expm

from models import CoordKind, EncodingSpec, MoleculeSpec
from services.circuits import Circuit, GateKind, GateOp
from services.encoding import (
    Reservoir,
    build_circuit,
    data_gate_indices,
    encode_state,
    entangler_pairs,
    generator_diagonal,
    rescale,
    rescale_jacobian,
    sample_reservoir,
)
from services.errors import DimensionMismatchError, DomainError
from services.gates import equal_up_to_global_phase
from services.molecules import get_preset
from services.statevector import circuit_unitary


class TestRescale:
    def test_lih(self, lih):
        np.testing.assert_allclose(rescale([3.0], lih.molecule), [np.pi / 2])

    def test_h2o(self, h2o):
        np.testing.assert_allclose(rescale([2.0, 2.0, np.pi / 2], h2o.molecule), [np.pi, np.pi, np.pi / 4])

    def test_reference_lengths(self, lih, h2o):
        assert lih.molecule.reference_length == 6.0
        assert h2o.molecule.reference_length == 2.0
        assert get_preset("hconh2").molecule.reference_length == 2.0

    def test_negative_length(self, lih):
        with pytest.raises(DomainError):
            rescale([-0.1], lih.molecule)

    def test_wrong_length(self, h2o):
        with pytest.raises(DimensionMismatchError):
            rescale([1.0, 1.0], h2o.molecule)

    def test_jacobian(self, h2o):
        np.testing.assert_allclose(rescale_jacobian(h2o.molecule), [np.pi / 2, np.pi / 2, 0.5])

    def test_custom_divisor(self):
        molecule = MoleculeSpec(name="bend", coord_names=["a"], coord_kinds=[CoordKind.BOND_ANGLE],
                                reference_length=1.0, angle_divisor=4.0)
        np.testing.assert_allclose(rescale([2.0], molecule), [0.5])


class TestReservoir:
    def test_deterministic(self):
        spec = EncodingSpec(n_qubits=4, n_coords=3, seed=42)
        np.testing.assert_array_equal(sample_reservoir(spec).block_angles, sample_reservoir(spec).block_angles)

    def test_seed_changes_angles(self):
        a = sample_reservoir(EncodingSpec(n_qubits=4, n_coords=1, seed=1))
        b = sample_reservoir(EncodingSpec(n_qubits=4, n_coords=1, seed=2))
        assert not np.array_equal(a.block_angles, b.block_angles)

    def test_shape(self):
        reservoir = sample_reservoir(EncodingSpec(n_qubits=5, n_coords=3, layers_per_block=2, mixing_blocks=3))
        assert reservoir.block_angles.shape == (6, 10)
        assert reservoir.mixing_blocks == 3

    def test_no_mixing_blocks(self):
        reservoir = sample_reservoir(EncodingSpec(n_qubits=2, n_coords=2, mixing_blocks=0))
        assert reservoir.n_blocks == 2
        assert reservoir.mixing_blocks == 0

    def test_uniform_statistics(self):
        spec = EncodingSpec(n_qubits=20, n_coords=497, mixing_blocks=3, seed=5)
        angles = sample_reservoir(spec).block_angles.ravel()
        assert angles.size == 10_000
        assert np.all((angles > 0) & (angles < np.pi / 2))
        sigma = (np.pi / 2) / np.sqrt(12) / np.sqrt(angles.size)
        assert abs(angles.mean() - np.pi / 4) < 3 * sigma

    def test_read_only(self):
        reservoir = sample_reservoir(EncodingSpec(n_qubits=2, n_coords=1))
        with pytest.raises(ValueError):
            reservoir.block_angles[0, 0] = 1.0

    def test_list_round_trip_checks_shape(self):
        spec = EncodingSpec(n_qubits=3, n_coords=1, seed=3)
        rows = sample_reservoir(spec).to_list()
        np.testing.assert_array_equal(Reservoir.from_list(spec, rows).block_angles, rows)
        with pytest.raises(DimensionMismatchError):
            Reservoir.from_list(spec, rows[:-1])

    @pytest.mark.parametrize("bad", [0.0, np.pi / 2, -0.3, 2.0, np.nan])
    def test_list_angles_must_stay_in_open_interval(self, bad):
        spec = EncodingSpec(n_qubits=2, n_coords=1, seed=5)
        rows = sample_reservoir(spec).to_list()
        rows[1][0] = bad
        with pytest.raises(DomainError, match="block 1, entry 0"):
            Reservoir.from_list(spec, rows)


class TestBuildCircuit:
    def test_degenerate_sizes(self):
        spec = EncodingSpec(n_qubits=1, n_coords=1, mixing_blocks=0)
        reservoir = Reservoir(1, 1, 1, np.array([[0.7]]))
        circuit = build_circuit([0.3], spec, reservoir)
        assert circuit.ops == [GateOp.ry(0, 0.7), GateOp.rz(0, 0.3)]

    def test_layout(self):
        spec = EncodingSpec(n_qubits=3, n_coords=2, mixing_blocks=1, seed=0)
        reservoir = sample_reservoir(spec)
        kinds = [op.kind for op in build_circuit([0.1, 0.2], spec, reservoir)]
        block = [GateKind.RY] * 3 + [GateKind.ECR] * 2
        data = [GateKind.RZ] * 3
        assert kinds == block + data + block + data + block

    def test_only_ry_rz_ecr(self, enc3, reservoir3):
        assert build_circuit([0.4], enc3, reservoir3).kinds() <= {GateKind.RY, GateKind.RZ, GateKind.ECR}

    def test_data_gate_indices(self):
        spec = EncodingSpec(n_qubits=3, n_coords=2, seed=0)
        circuit = build_circuit([0.1, 0.2], spec, sample_reservoir(spec))
        for j, value in enumerate([0.1, 0.2]):
            for index in data_gate_indices(spec, j):
                assert circuit.ops[index].kind is GateKind.RZ
                assert circuit.ops[index].angle == value

    def test_inputs_only_change_rz(self, enc3, reservoir3):
        a = build_circuit([0.3], enc3, reservoir3)
        b = build_circuit([1.9], enc3, reservoir3)
        differing = [i for i, (p, q) in enumerate(zip(a.ops, b.ops)) if p != q]
        assert differing == data_gate_indices(enc3, 0)

    def test_zero_input_is_pure_reservoir(self, enc3, reservoir3):
        with_data = circuit_unitary(build_circuit([0.0], enc3, reservoir3))
        stripped = Circuit(3, [op for op in build_circuit([0.0], enc3, reservoir3) if op.kind is not GateKind.RZ])
        np.testing.assert_allclose(with_data, circuit_unitary(stripped), atol=1e-12)

    def test_wrong_input_length(self, enc3, reservoir3):
        with pytest.raises(DimensionMismatchError):
            build_circuit([0.1, 0.2], enc3, reservoir3)

    def test_ring_topology(self):
        assert entangler_pairs(4, "ring") == [(0, 1), (1, 2), (2, 3), (3, 0)]
        assert entangler_pairs(2, "ring") == [(0, 1)]
        assert entangler_pairs(1) == []


class TestEncodeState:
    def test_zero_angles_stay_in_zero(self):
        spec = EncodingSpec(n_qubits=1, n_coords=1, mixing_blocks=0)
        reservoir = Reservoir(1, 1, 1, np.zeros((1, 1)))
        for x in [0.0, 0.8, 3.0]:
            state = encode_state([x], spec, reservoir)
            np.testing.assert_allclose(state.probabilities(), [1, 0], atol=1e-15)

    def test_norm(self, rng):
        spec = EncodingSpec(n_qubits=5, n_coords=3, seed=9)
        reservoir = sample_reservoir(spec)
        for _ in range(5):
            state = encode_state(rng.uniform(0, 2 * np.pi, 3), spec, reservoir)
            assert abs(state.norm() - 1) < 1e-12

    def test_period_4pi(self, enc3, reservoir3):
        a = encode_state([0.37], enc3, reservoir3).amplitudes
        b = encode_state([0.37 + 4 * np.pi], enc3, reservoir3).amplitudes
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_period_2pi_up_to_phase(self, enc3, reservoir3):
        a = encode_state([0.37], enc3, reservoir3).amplitudes
        b = encode_state([0.37 + 2 * np.pi], enc3, reservoir3).amplitudes
        assert equal_up_to_global_phase(a, b, atol=1e-12)


class TestGenerator:
    @pytest.mark.parametrize("n_qubits", [1, 2, 3])
    def test_rz_layer_is_exp_of_generator(self, n_qubits):
        z = np.diag([1.0, -1.0])
        g = np.zeros((1 << n_qubits, 1 << n_qubits))
        for q in range(n_qubits):
            # little-endian: qubit q is the q-th factor from the right
            factors = [z if k == q else np.eye(2) for k in reversed(range(n_qubits))]
            term = factors[0]
            for f in factors[1:]:
                term = np.kron(term, f)
            g += 0.5 * term
        np.testing.assert_allclose(np.diag(g), generator_diagonal(n_qubits))

        x = 0.83
        layer = Circuit(n_qubits, [GateOp.rz(q, x) for q in range(n_qubits)])
        assert equal_up_to_global_phase(circuit_unitary(layer), expm(-1j * x * g), atol=1e-12)

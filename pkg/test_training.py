"""Tests for probability matrices, the pseudoinverse readout, scoring and sweeps"""

import numpy as np
import pytest

from conftest import random_state
from models import EncodingConfig, EncodingSpec, ShotPlan
from services.circuits import GateOp
from services.encoding import sample_reservoir
from services.errors import ConfigError, DataError, DimensionMismatchError, InsufficientDataError
from services.measurement import exact_probabilities
from services.statevector import apply_gate, new_zero_state
from services.training import (
    EvaluationCounter,
    ProbabilityMatrix,
    ReadoutMap,
    TargetMatrix,
    build_probability_matrix,
    effective_observables,
    fit_readout,
    predict,
    score,
    sweep,
    sweep_rows,
    target_matrix,
    train_and_score,
)


def readout(W) -> ReadoutMap:
    W = np.atleast_2d(W)
    return ReadoutMap(W, [f"t{k}" for k in range(W.shape[0])])


def targets(Y) -> TargetMatrix:
    Y = np.atleast_2d(Y)
    return TargetMatrix(Y, [f"t{k}" for k in range(Y.shape[0])])


def residual(W, P, Y) -> float:
    return float(np.linalg.norm(Y - W @ P))


class TestProbabilityMatrix:
    def test_single_column(self, lih, enc3, reservoir3, exact):
        P = build_probability_matrix([[1.6]], lih.molecule, enc3, reservoir3, exact)
        assert P.entries.shape == (8, 1)
        assert abs(P.entries.sum() - 1) < 1e-9

    def test_duplicates_exact(self, lih, enc3, reservoir3, exact):
        P = build_probability_matrix([[1.6], [1.6]], lih.molecule, enc3, reservoir3, exact)
        np.testing.assert_array_equal(P.entries[:, 0], P.entries[:, 1])

    def test_duplicates_sampled(self, lih, enc3, reservoir3):
        P = build_probability_matrix([[1.6], [1.6]], lih.molecule, enc3, reservoir3, ShotPlan(shots=200, seed=4))
        assert not np.array_equal(P.entries[:, 0], P.entries[:, 1])
        np.testing.assert_allclose(P.entries.sum(axis=0), 1.0, atol=1e-12)

    def test_workers_do_not_change_result(self, lih, enc3, reservoir3):
        geometries = [[r] for r in np.linspace(1.0, 4.0, 12)]
        plan = ShotPlan(shots=100, seed=8)
        serial = build_probability_matrix(geometries, lih.molecule, enc3, reservoir3, plan)
        pooled = build_probability_matrix(geometries, lih.molecule, enc3, reservoir3, plan, workers=4)
        np.testing.assert_array_equal(serial.entries, pooled.entries)

    def test_counter(self, lih, enc3, reservoir3, exact):
        counter = EvaluationCounter()
        build_probability_matrix([[1.0], [2.0], [3.0]], lih.molecule, enc3, reservoir3, exact, counter)
        assert counter.count == 3

    def test_counter_with_workers(self, lih, enc3, reservoir3):
        counter = EvaluationCounter()
        geometries = [[r] for r in np.linspace(1.0, 4.0, 9)]
        plan = ShotPlan(shots=50, seed=1)
        build_probability_matrix(geometries, lih.molecule, enc3, reservoir3, plan, counter, workers=4)
        assert counter.count == 9

    def test_columns_must_sum_to_one(self):
        with pytest.raises(DataError, match="column 1"):
            ProbabilityMatrix(np.array([[1.0, 0.5], [0.0, 0.4]]))

    def test_negative_entries_rejected(self):
        with pytest.raises(DataError):
            ProbabilityMatrix(np.array([[1.5], [-0.5]]))

    def test_subset_keeps_validation(self):
        P = ProbabilityMatrix(np.array([[0.25, 1.0], [0.75, 0.0]]), shots=4)
        assert P.columns([1]).shots == 4
        np.testing.assert_array_equal(P.columns([1]).entries, [[1.0], [0.0]])

    def test_empty(self, lih, enc3, reservoir3, exact):
        with pytest.raises(InsufficientDataError):
            build_probability_matrix([], lih.molecule, enc3, reservoir3, exact)


class TestFitReadout:
    def test_identity(self):
        fitted = fit_readout(ProbabilityMatrix(np.eye(2)), targets([[1.0, 2.0]]))
        np.testing.assert_allclose(fitted.W, [[1.0, 2.0]], atol=1e-15)

    def test_consistent_full_row_rank(self, rng):
        P = rng.random((6, 20))
        P /= P.sum(axis=0)
        W0 = rng.normal(size=(3, 6))
        fitted = fit_readout(ProbabilityMatrix(P), targets(W0 @ P))
        assert residual(fitted.W, P, W0 @ P) < 1e-9
        assert fitted.singular_values_kept == 6
        assert fitted.rank_bound == 6

    def test_rank_deficient_min_norm(self, rng):
        P = rng.random((5, 4))
        P /= P.sum(axis=0)
        P[:, 3] = P[:, 2]
        W0 = rng.normal(size=(2, 5))
        Y = W0 @ P
        fitted = fit_readout(ProbabilityMatrix(P), targets(Y))
        assert np.all(np.isfinite(fitted.W))
        assert residual(fitted.W, P, Y) < 1e-9
        np.testing.assert_allclose(fitted.W, Y @ np.linalg.pinv(P, rcond=1e-12), atol=1e-9)
        assert fitted.singular_values_kept == 3

    def test_cutoff_drops_small_singular_values(self):
        P = np.diag([1.0, 1e-6])
        fitted = fit_readout(ProbabilityMatrix(P, check_columns=False), targets([[1.0, 1.0]]), cutoff=1e-3)
        np.testing.assert_allclose(fitted.W, [[1.0, 0.0]])
        assert fitted.svd_cutoff_used == 1e-3
        assert fitted.sigma_max == pytest.approx(1.0)

    @pytest.mark.parametrize("cutoff", [-0.1, 1.0])
    def test_cutoff_range(self, cutoff):
        with pytest.raises(ConfigError):
            fit_readout(ProbabilityMatrix(np.eye(2)), targets([[1.0, 2.0]]), cutoff=cutoff)

    def test_column_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fit_readout(ProbabilityMatrix(np.eye(2)), targets([[1.0, 2.0, 3.0]]))

    def test_non_finite_targets(self):
        with pytest.raises(DataError):
            targets([[1.0, np.nan]])

    def test_centering_keeps_training_fit(self, rng):
        P = rng.random((4, 10))
        P /= P.sum(axis=0)
        Y = rng.normal(size=(2, 10)) + 5.0
        plain = fit_readout(ProbabilityMatrix(P), targets(Y))
        centered = fit_readout(ProbabilityMatrix(P), targets(Y), center=True)
        np.testing.assert_allclose(predict(centered, P), predict(plain, P), atol=1e-9)
        np.testing.assert_allclose(centered.target_offset, Y.mean(axis=1))

    @pytest.mark.slow
    def test_pseudoinverse_optimality(self, rng):
        for _ in range(10):
            P = rng.random((8, 30))
            P /= P.sum(axis=0)
            Y = rng.normal(size=(3, 30))
            fitted = fit_readout(ProbabilityMatrix(P), targets(Y))
            best = residual(fitted.W, P, Y)
            for _ in range(100):
                delta = rng.normal(size=fitted.W.shape)
                delta *= 1e-3 / np.linalg.norm(delta)
                assert residual(fitted.W + delta, P, Y) >= best - 1e-12


class TestPredict:
    def test_identity(self, rng):
        p = rng.random(4)
        np.testing.assert_allclose(predict(readout(np.eye(4)), p), p)

    def test_zeros(self, rng):
        np.testing.assert_array_equal(predict(readout(np.zeros((2, 4))), rng.random(4)), [0, 0])

    def test_matches_matmul(self, rng):
        W, p = rng.normal(size=(3, 8)), rng.random(8)
        expected = [sum(W[k, a] * p[a] for a in range(8)) for k in range(3)]
        np.testing.assert_allclose(predict(readout(W), p), expected, atol=1e-12)

    def test_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            predict(readout(np.eye(4)), np.ones(3))


class TestScore:
    def test_perfect(self):
        m = score(readout(np.eye(2)), ProbabilityMatrix(np.eye(2)), targets(np.eye(2)))
        np.testing.assert_allclose(m.rmse, [0, 0])

    def test_constant_targets(self):
        m = score(readout([[0.0, 0.0]]), ProbabilityMatrix(np.eye(2)), targets([[2.0, 2.0]]))
        assert m.sqrt_variance[0] == 0
        assert np.isnan(m.ratio[0])
        assert m.undefined_ratios == ["t0"]
        assert m.to_rows("X", 1, 1, "inf", 0, 1)[0].ratio is None

    def test_constant_targets_with_inexact_values(self):
        # 0.1 is not representable, so np.std of [0.1, 0.1, 0.1] is not exactly zero
        m = score(readout(np.zeros((1, 3))), ProbabilityMatrix(np.eye(3)), targets([[0.1, 0.1, 0.1]]))
        assert m.sqrt_variance[0] == 0
        assert np.isnan(m.ratio[0])
        assert m.undefined_ratios == ["t0"]

    def test_hand_computation(self):
        m = score(readout([[2.0, 2.0]]), ProbabilityMatrix(np.eye(2)), targets([[1.0, 3.0]]))
        assert m.rmse[0] == pytest.approx(1.0)
        assert m.sqrt_variance[0] == pytest.approx(1.0)
        assert m.ratio[0] == pytest.approx(1.0)

    def test_empty_test_set(self):
        with pytest.raises(InsufficientDataError):
            score(readout([[1.0, 1.0]]), ProbabilityMatrix(np.zeros((2, 0))), targets(np.zeros((1, 0))))


class TestEffectiveObservables:
    def test_all_ones_is_identity(self, rng):
        obs = effective_observables(readout(np.ones((1, 8))))[0]
        np.testing.assert_array_equal(obs.matrix(), np.eye(8))
        assert obs.expectation(random_state(rng, 3)) == pytest.approx(1.0, abs=1e-12)

    def test_sigma_z(self):
        obs = effective_observables(readout([[1.0, -1.0]]))[0]
        state = apply_gate(new_zero_state(1), GateOp.sqrt_x(0))
        assert obs.expectation(state) == pytest.approx(0.0, abs=1e-15)

    def test_agrees_with_predict(self, rng):
        fitted = readout(rng.normal(size=(3, 16)))
        for _ in range(5):
            state = random_state(rng, 4)
            direct = [o.expectation(state) for o in effective_observables(fitted)]
            np.testing.assert_allclose(predict(fitted, exact_probabilities(state)), direct, atol=1e-12)


class TestTargets:
    def test_labels(self, lih_dataset):
        assert target_matrix(lih_dataset).labels == ["energy", "force_1"]
        assert target_matrix(lih_dataset, "energy").labels == ["energy"]

    def test_unknown_mode(self, lih_dataset):
        with pytest.raises(ConfigError):
            target_matrix(lih_dataset, "forces")


class TestPipelines:
    def test_rank_bound(self, lih_dataset, exact):
        enc = EncodingSpec(n_qubits=4, n_coords=1, seed=0)
        result = train_and_score(lih_dataset, enc, exact, m_train=50)
        assert result.readout.rank_bound == 16
        assert result.readout.singular_values_kept <= 16
        assert result.circuit_evaluations == len(lih_dataset)

    def test_forces_cost_no_extra_circuits(self, lih_dataset, exact):
        enc = EncodingSpec(n_qubits=3, n_coords=1, seed=0)
        energy = train_and_score(lih_dataset, enc, exact, 50, targets="energy")
        joint = train_and_score(lih_dataset, enc, exact, 50, targets="joint")
        assert energy.circuit_evaluations == joint.circuit_evaluations
        assert joint.readout.n_targets == 2 and energy.readout.n_targets == 1

    @pytest.mark.slow
    def test_lih_statevector_accuracy(self, lih_dataset, exact):
        enc = EncodingSpec(n_qubits=5, n_coords=1, seed=0)
        result = train_and_score(lih_dataset, enc, exact, m_train=50)
        assert len(result.test_indices) == 120
        assert result.test_metrics.ratio[0] <= 1e-2

        sampled = train_and_score(lih_dataset, enc, ShotPlan(shots=40_000, seed=0), m_train=50)
        assert sampled.test_metrics.rmse[0] > result.test_metrics.rmse[0]

    def test_single_cell_sweep_matches_train(self, lih_dataset, exact):
        cells = sweep(lih_dataset, [3], [40], exact, seeds=[2], split_seed=5)
        direct = train_and_score(lih_dataset, EncodingSpec(n_qubits=3, n_coords=1, seed=2), exact, 40, split_seed=5)
        assert len(cells) == 1
        np.testing.assert_array_equal(cells[0].metrics.rmse, direct.test_metrics.rmse)
        assert cells[0].depth_native == direct.depth_native

    def test_sweep_grid_shape_and_order(self, lih_dataset, exact):
        cells = sweep(lih_dataset, [2, 3], [8, 16, 32], exact, seeds=[0, 1], workers=3)
        assert [(c.n_qubits, c.m_train, c.seed) for c in cells] == [
            (n, m, s) for n in [2, 3] for m in [8, 16, 32] for s in [0, 1]
        ]
        rows = sweep_rows(cells, "LiH", exact)
        assert len(rows) == 2 * 3 * 2 * 2
        assert {r.shots for r in rows} == {"inf"}

    def test_sweep_too_large(self, lih_dataset, exact):
        with pytest.raises(InsufficientDataError):
            sweep(lih_dataset, [2], [170], exact)

    @pytest.mark.slow
    def test_plateau(self, lih_dataset, exact):
        """Past 2^(N+1) training points the RMSE stops improving much"""
        cells = sweep(lih_dataset, [4], [8, 32, 64], exact, seeds=[0, 1, 2], targets="energy")
        rmse = {m: np.median([c.metrics.rmse[0] for c in cells if c.m_train == m]) for m in [8, 32, 64]}
        gain_late = 1 - rmse[64] / rmse[32]
        gain_early = 1 - rmse[32] / rmse[8]
        assert rmse[64] >= 0.5 * rmse[32]
        assert gain_early > gain_late

    @pytest.mark.slow
    def test_more_qubits_never_hurt(self, lih_dataset, exact):
        seeds = [0, 1, 2, 3, 4]
        cells = sweep(lih_dataset, [2, 3, 4, 5, 6], [50], exact, seeds=seeds,
                      encoding=EncodingConfig(), targets="energy")
        medians = [np.median([c.metrics.rmse[0] for c in cells if c.n_qubits == n]) for n in [2, 3, 4, 5, 6]]
        assert all(b <= a for a, b in zip(medians, medians[1:]))

    def test_reservoir_seed_matters(self, lih_dataset, exact):
        a = train_and_score(lih_dataset, EncodingSpec(n_qubits=3, n_coords=1, seed=0), exact, 50)
        b = train_and_score(lih_dataset, EncodingSpec(n_qubits=3, n_coords=1, seed=1), exact, 50)
        assert not np.array_equal(a.reservoir.block_angles, b.reservoir.block_angles)
        assert sample_reservoir(a.enc).block_angles.tobytes() == a.reservoir.block_angles.tobytes()

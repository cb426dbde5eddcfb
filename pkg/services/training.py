"""
QELM training: probability matrices, the pseudoinverse readout W = Y P^+,
prediction, scoring and (N, M_tr) sweeps.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models import EncodingConfig, EncodingSpec, MetricsRow, MoleculeSpec, ShotPlan
from services.datasets import Dataset, split_indices
from services.encoding import Reservoir, build_circuit, encode_state, rescale, sample_reservoir
from services.errors import (
    ConfigError,
    DataError,
    DimensionMismatchError,
    InsufficientDataError,
    NumericalError,
)
from services.gates import depth, transpile
from services.measurement import measure
from services.statevector import QuantumState

logger = logging.getLogger(__name__)

DEFAULT_SVD_CUTOFF = 1e-12
PROBABILITY_TOLERANCE = 1e-9


# ----------------------------
# Matrices
# ----------------------------

@dataclass
class ProbabilityMatrix:
    """Sigma x M; column j holds the outcome probabilities of geometry j"""

    entries: np.ndarray
    shots: Optional[int] = None
    check_columns: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise DimensionMismatchError(f"probability matrix must be 2-D, got shape {self.entries.shape}")
        if self.check_columns and self.entries.shape[1]:
            if np.any(self.entries < -PROBABILITY_TOLERANCE):
                raise DataError("probability matrix holds negative entries")
            sums = self.entries.sum(axis=0)
            off = np.flatnonzero(np.abs(sums - 1.0) > PROBABILITY_TOLERANCE)
            if off.size:
                j = int(off[0])
                raise DataError(f"column {j} of the probability matrix sums to {sums[j]!r}, not 1")

    @property
    def n_outcomes(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    def columns(self, indices: Sequence[int]) -> "ProbabilityMatrix":
        return ProbabilityMatrix(self.entries[:, np.asarray(indices, dtype=int)], self.shots, self.check_columns)


@dataclass
class TargetMatrix:
    entries: np.ndarray
    labels: List[str]

    def __post_init__(self):
        self.entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if self.entries.shape[0] != len(self.labels):
            raise DimensionMismatchError(f"{len(self.labels)} label(s) for {self.entries.shape[0]} target row(s)")
        if not np.all(np.isfinite(self.entries)):
            raise DataError("target matrix holds non-finite entries")

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    def columns(self, indices: Sequence[int]) -> "TargetMatrix":
        return TargetMatrix(self.entries[:, np.asarray(indices, dtype=int)], list(self.labels))


def target_matrix(dataset: Dataset, mode: str = "joint") -> TargetMatrix:
    """Energy row, plus one row per force component when `mode` is joint"""
    if dataset.energies is None:
        raise DataError(f"dataset {dataset.provenance or dataset.molecule.name} carries no energies")
    if mode == "energy":
        return TargetMatrix(dataset.energies[None, :], ["energy"])
    if mode != "joint":
        raise ConfigError(f"unknown target mode '{mode}', expected joint or energy")
    if dataset.forces is None:
        raise DataError(f"dataset {dataset.provenance or dataset.molecule.name} carries no forces")
    labels = ["energy"] + [f"force_{i + 1}" for i in range(dataset.molecule.n_coords)]
    return TargetMatrix(np.vstack([dataset.energies[None, :], dataset.forces.T]), labels)


class EvaluationCounter:
    """Counts prepared-and-measured circuits; safe to share across worker threads"""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


def build_probability_matrix(geometries, molecule: MoleculeSpec, enc: EncodingSpec, reservoir: Reservoir,
                             plan: ShotPlan, counter: Optional[EvaluationCounter] = None,
                             workers: int = 1) -> ProbabilityMatrix:
    """
    One column per geometry. With finite shots the sampling stream of
    column j is derived from (plan.seed, j), so the worker count never
    changes the result.
    """
    rows = [np.asarray(getattr(g, "coords", g), dtype=float) for g in geometries]
    if not rows:
        raise InsufficientDataError("cannot build a probability matrix from zero geometries")

    def column(j: int) -> np.ndarray:
        state = encode_state(rescale(rows[j], molecule), enc, reservoir)
        probs = measure(state, plan, geometry_index=j).probs
        if counter is not None:
            counter.add(1)
        return probs

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(len(rows))))
    else:
        cols = [column(j) for j in range(len(rows))]
    return ProbabilityMatrix(np.stack(cols, axis=1), plan.shots)


# ----------------------------
# Readout
# ----------------------------

@dataclass
class ReadoutMap:
    W: np.ndarray
    labels: List[str]
    svd_cutoff_used: float = DEFAULT_SVD_CUTOFF
    singular_values_kept: int = 0
    sigma_max: float = 0.0
    rank_bound: int = 0
    target_offset: Optional[np.ndarray] = None

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if self.target_offset is not None:
            self.target_offset = np.asarray(self.target_offset, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.W)):
            raise NumericalError("readout map holds non-finite entries")

    @property
    def n_targets(self) -> int:
        return self.W.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.W.shape[1]


def fit_readout(P: ProbabilityMatrix, Y: TargetMatrix, cutoff: float = DEFAULT_SVD_CUTOFF,
                center: bool = False) -> ReadoutMap:
    """
    Least-squares readout W = Y P^+ with the pseudoinverse taken through an
    SVD; singular values below cutoff * sigma_max count as zero, which gives
    the minimum-norm W among the minimizers of ||Y - W P||_F.
    """
    if P.n_cols != Y.n_cols:
        raise DimensionMismatchError(f"P has {P.n_cols} column(s), Y has {Y.n_cols}")
    if not 0.0 <= cutoff < 1.0:
        raise ConfigError(f"svd cutoff must be in [0, 1), got {cutoff}")

    targets = Y.entries
    offset = None
    if center:
        offset = targets.mean(axis=1)
        targets = targets - offset[:, None]

    try:
        U, s, Vt = np.linalg.svd(P.entries, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD of the probability matrix failed: {e}") from e

    sigma_max = float(s[0]) if s.size else 0.0
    keep = (s > 0) & (s >= cutoff * sigma_max)
    inverse = np.zeros_like(s)
    np.divide(1.0, s, out=inverse, where=keep)
    W = (targets @ Vt.T) * inverse @ U.T

    rank_bound = min(P.n_outcomes, P.n_cols)
    kept = int(keep.sum())
    logger.debug("fit: kept %d of %d singular value(s), sigma_max=%.3e, cutoff=%g, bound=%d",
                 kept, s.size, sigma_max, cutoff, rank_bound)
    if not np.all(np.isfinite(W)):
        raise NumericalError("pseudoinverse fit produced non-finite weights")
    return ReadoutMap(W, list(Y.labels), cutoff, kept, sigma_max, rank_bound, offset)


def predict(readout: ReadoutMap, p) -> np.ndarray:
    """f(x) = W p(x), plus the centering offset when the map was fitted centered"""
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    if probs.shape[0] != readout.n_outcomes:
        raise DimensionMismatchError(f"readout expects {readout.n_outcomes} outcome(s), got {probs.shape[0]}")
    out = readout.W @ probs
    if readout.target_offset is not None:
        out = out + (readout.target_offset if probs.ndim == 1 else readout.target_offset[:, None])
    return out


def predict_matrix(readout: ReadoutMap, P: ProbabilityMatrix) -> np.ndarray:
    return predict(readout, P.entries)


@dataclass
class Metrics:
    labels: List[str]
    rmse: np.ndarray
    sqrt_variance: np.ndarray
    ratio: np.ndarray

    @property
    def undefined_ratios(self) -> List[str]:
        return [label for label, r in zip(self.labels, self.ratio) if np.isnan(r)]

    def by_label(self) -> Dict[str, Tuple[float, float, float]]:
        return {
            label: (float(r), float(v), float(q))
            for label, r, v, q in zip(self.labels, self.rmse, self.sqrt_variance, self.ratio)
        }

    def to_rows(self, molecule: str, n_qubits: int, m_train: int, shots: str, seed: int,
                depth_native: int) -> List[MetricsRow]:
        return [
            MetricsRow(molecule=molecule, n_qubits=n_qubits, m_train=m_train, shots=shots, seed=seed,
                       target=label, rmse=r, sqrt_var=v, ratio=None if np.isnan(q) else q,
                       depth_native=depth_native)
            for label, (r, v, q) in self.by_label().items()
        ]


def score(readout: ReadoutMap, P_test: ProbabilityMatrix, Y_test: TargetMatrix) -> Metrics:
    """Per-target RMSE over the test columns, sqrt of the test-target variance, and their ratio"""
    if P_test.n_cols == 0 or Y_test.n_cols == 0:
        raise InsufficientDataError("cannot score on an empty test set")
    if P_test.n_cols != Y_test.n_cols:
        raise DimensionMismatchError(f"P has {P_test.n_cols} column(s), Y has {Y_test.n_cols}")
    if list(Y_test.labels) != list(readout.labels):
        raise DimensionMismatchError(f"readout predicts {readout.labels}, test targets are {Y_test.labels}")

    residual = Y_test.entries - predict_matrix(readout, P_test)
    rmse = np.sqrt(np.mean(residual ** 2, axis=1))
    # rounding leaves np.std of a constant row slightly above zero
    constant = np.ptp(Y_test.entries, axis=1) == 0
    sqrt_var = np.where(constant, 0.0, np.std(Y_test.entries, axis=1))
    ratio = np.full_like(rmse, np.nan)
    np.divide(rmse, sqrt_var, out=ratio, where=~constant)
    return Metrics(list(Y_test.labels), rmse, sqrt_var, ratio)


@dataclass(frozen=True)
class DiagonalObservable:
    """Observable diagonal in the computational basis, given by its eigenvalues"""

    eigenvalues: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.diag(self.eigenvalues)

    def expectation(self, state: QuantumState) -> float:
        if state.amplitudes.shape[0] != self.eigenvalues.shape[0]:
            raise DimensionMismatchError(
                f"observable acts on {self.eigenvalues.shape[0]} outcomes, state has {state.amplitudes.shape[0]}"
            )
        return float(self.eigenvalues @ state.probabilities())


def effective_observables(readout: ReadoutMap) -> List[DiagonalObservable]:
    """Row k of W as the spectrum of a diagonal observable; offsets shift every eigenvalue"""
    offsets = np.zeros(readout.n_targets) if readout.target_offset is None else readout.target_offset
    return [DiagonalObservable(row + c) for row, c in zip(readout.W, offsets)]


# ----------------------------
# Pipelines
# ----------------------------

def native_depth(enc: EncodingSpec, reservoir: Reservoir) -> int:
    """Depth of the transpiled circuit; it does not depend on the input values"""
    return depth(transpile(build_circuit(np.zeros(enc.n_coords), enc, reservoir))).native_depth


@dataclass
class TrainResult:
    enc: EncodingSpec
    reservoir: Reservoir
    readout: ReadoutMap
    train_metrics: Metrics
    test_metrics: Metrics
    depth_native: int
    circuit_evaluations: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    train_predictions: np.ndarray = field(repr=False, default=None)


def train_and_score(dataset: Dataset, enc: EncodingSpec, plan: ShotPlan, m_train: int, split_seed: int = 0,
                    cutoff: float = DEFAULT_SVD_CUTOFF, targets: str = "joint", center: bool = False,
                    counter: Optional[EvaluationCounter] = None, workers: int = 1) -> TrainResult:
    """Encode every geometry once, split the columns, fit on the training part and score both parts"""
    counter = counter if counter is not None else EvaluationCounter()
    train_idx, test_idx = split_indices(len(dataset), m_train, split_seed)
    reservoir = sample_reservoir(enc)
    P = build_probability_matrix(dataset.coords, dataset.molecule, enc, reservoir, plan, counter, workers)
    Y = target_matrix(dataset, targets)

    P_tr, Y_tr = P.columns(train_idx), Y.columns(train_idx)
    readout = fit_readout(P_tr, Y_tr, cutoff, center)
    result = TrainResult(
        enc=enc,
        reservoir=reservoir,
        readout=readout,
        train_metrics=score(readout, P_tr, Y_tr),
        test_metrics=score(readout, P.columns(test_idx), Y.columns(test_idx)),
        depth_native=native_depth(enc, reservoir),
        circuit_evaluations=counter.count,
        train_indices=train_idx,
        test_indices=test_idx,
        train_predictions=predict_matrix(readout, P_tr),
    )
    logger.info("[SUCCESS] %s N=%d M_tr=%d shots=%s: test RMSE(energy)=%.3e ratio=%.3e",
                dataset.molecule.name, enc.n_qubits, m_train, plan.label,
                result.test_metrics.rmse[0], result.test_metrics.ratio[0])
    return result


@dataclass
class SweepCell:
    n_qubits: int
    m_train: int
    seed: int
    metrics: Metrics
    depth_native: int
    singular_values_kept: int


def _sweep_group(dataset: Dataset, enc: EncodingSpec, plan: ShotPlan, pool_idx: np.ndarray,
                 test_idx: np.ndarray, train_sizes: Sequence[int], cutoff: float, targets: str,
                 center: bool) -> List[SweepCell]:
    reservoir = sample_reservoir(enc)
    P = build_probability_matrix(dataset.coords, dataset.molecule, enc, reservoir, plan)
    Y = target_matrix(dataset, targets)
    P_test, Y_test = P.columns(test_idx), Y.columns(test_idx)
    d = native_depth(enc, reservoir)

    cells = []
    for m in train_sizes:
        readout = fit_readout(P.columns(pool_idx[:m]), Y.columns(pool_idx[:m]), cutoff, center)
        metrics = score(readout, P_test, Y_test)
        cells.append(SweepCell(enc.n_qubits, m, enc.seed, metrics, d, readout.singular_values_kept))
        logger.info("sweep cell N=%d M_tr=%d seed=%d: RMSE(energy)=%.3e kept=%d/%d",
                    enc.n_qubits, m, enc.seed, metrics.rmse[0], readout.singular_values_kept, readout.rank_bound)
    return cells


def sweep(dataset: Dataset, qubit_counts: Sequence[int], train_sizes: Sequence[int], plan: ShotPlan,
          seeds: Sequence[int] = (0,), encoding: Optional[EncodingConfig] = None, split_seed: int = 0,
          cutoff: float = DEFAULT_SVD_CUTOFF, targets: str = "joint", center: bool = False,
          workers: int = 1) -> List[SweepCell]:
    """
    Train and score one model per (N, M_tr, seed). The test set is what the
    split leaves after the largest training size, so every cell is scored on
    the same geometries and each smaller training set is a prefix of the
    larger ones. The reservoir seed of a cell is its seed entry, which makes
    a 1x1 grid identical to `train_and_score` with the same seeds.

    Cells are grouped by (N, seed) so each group encodes the dataset once;
    groups run in a thread pool and come back in grid order.
    """
    if not qubit_counts or not train_sizes or not seeds:
        raise ConfigError("sweep needs at least one qubit count, train size and seed")
    m_max = max(train_sizes)
    pool_idx, test_idx = split_indices(len(dataset), m_max, split_seed)
    encoding = encoding or EncodingConfig()

    groups = [
        encoding.to_spec(dataset.molecule.n_coords, n_qubits=n, seed=seed)
        for n in qubit_counts for seed in seeds
    ]

    def run(enc: EncodingSpec) -> List[SweepCell]:
        return _sweep_group(dataset, enc, plan, pool_idx, test_idx, train_sizes, cutoff, targets, center)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, groups))
    else:
        results = [run(enc) for enc in groups]

    # grid order: N, then M_tr, then seed
    cells = [cell for group in results for cell in group]
    cells.sort(key=lambda c: (qubit_counts.index(c.n_qubits), train_sizes.index(c.m_train), seeds.index(c.seed)))
    logger.info("[SUCCESS] sweep finished: %d cell(s)", len(cells))
    return cells


def sweep_rows(cells: Sequence[SweepCell], molecule: str, plan: ShotPlan) -> List[MetricsRow]:
    rows: List[MetricsRow] = []
    for cell in cells:
        rows.extend(cell.metrics.to_rows(molecule, cell.n_qubits, cell.m_train, plan.label, cell.seed,
                                         cell.depth_native))
    return rows

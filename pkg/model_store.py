"""
Persistence for trained readouts (JSON model files) and the CSV result
files: metrics rows, predictions and kernel spectra.
"""

import json
import logging
import os
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

from models import METRICS_COLUMNS, EncodingSpec, MetricsRow, ModelFile, MoleculeSpec, ShotPlan
from services.encoding import Reservoir
from services.errors import ConfigError, DataError
from services.kernels import KernelSpectrum
from services.training import ReadoutMap, TrainResult

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "./output"
MODEL_FORMAT_VERSION = 1


def output_dir(override: Optional[str] = None, configured: Optional[str] = None) -> Path:
    """CLI flag, then config, then QELM_OUTPUT_DIR"""
    path = Path(override or configured or os.getenv("QELM_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"cannot create output directory {path}: {e}") from e
    return path


def _write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    return path


def _write_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8", na_rep="nan")
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    return path


# ----------------------------
# Model files
# ----------------------------

def model_from_result(result: TrainResult, molecule: MoleculeSpec, plan: ShotPlan,
                      metrics: Sequence[MetricsRow] = ()) -> ModelFile:
    readout = result.readout
    return ModelFile(
        format_version=MODEL_FORMAT_VERSION,
        molecule=molecule,
        encoding=result.enc,
        shots=plan,
        reservoir_angles=result.reservoir.to_list(),
        target_labels=list(readout.labels),
        weights=readout.W.tolist(),
        target_offset=None if readout.target_offset is None else readout.target_offset.tolist(),
        svd_cutoff=readout.svd_cutoff_used,
        singular_values_kept=readout.singular_values_kept,
        rank_bound=readout.rank_bound,
        circuit_evaluations=result.circuit_evaluations,
        metrics=list(metrics),
    )


def save_model(model: ModelFile, path: Union[str, Path]) -> Path:
    text = json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
    path = _write_text(Path(path), text)
    logger.info("[SUCCESS] Model saved to %s", path)
    return path


def load_model(path: Union[str, Path]) -> ModelFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise DataError(f"model file not found: {path}") from e
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    try:
        model = ModelFile.model_validate_json(text)
    except ValidationError as e:
        raise DataError(f"invalid model file {path}: {e}") from e
    if model.format_version != MODEL_FORMAT_VERSION:
        raise ConfigError(f"model format {model.format_version} is not supported (expected {MODEL_FORMAT_VERSION})")
    return model


def restore(model: ModelFile) -> Tuple[EncodingSpec, Reservoir, ReadoutMap]:
    """Rebuild the encoding, reservoir and readout a model file describes"""
    reservoir = Reservoir.from_list(model.encoding, model.reservoir_angles)
    readout = ReadoutMap(
        W=np.asarray(model.weights, dtype=float),
        labels=list(model.target_labels),
        svd_cutoff_used=model.svd_cutoff,
        singular_values_kept=model.singular_values_kept,
        rank_bound=model.rank_bound,
        target_offset=None if model.target_offset is None else np.asarray(model.target_offset),
    )
    if readout.n_outcomes != 1 << model.encoding.n_qubits:
        raise DataError(
            f"model weights cover {readout.n_outcomes} outcomes, encoding has {1 << model.encoding.n_qubits}"
        )
    return model.encoding, reservoir, readout


# ----------------------------
# CSV results
# ----------------------------

def write_metrics(rows: Iterable[MetricsRow], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=METRICS_COLUMNS)
    return _write_frame(frame, path)


def read_metrics(path: Union[str, Path]) -> List[MetricsRow]:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as e:
        raise DataError(f"cannot read metrics {path}: {e}") from e
    records = frame.to_dict(orient="records")
    for record in records:
        if record["ratio"] == "nan":
            record["ratio"] = None
    return [MetricsRow.model_validate(record) for record in records]


def write_predictions(coords: np.ndarray, labels: Sequence[str], predictions: np.ndarray,
                      path: Union[str, Path], targets: Optional[np.ndarray] = None) -> Path:
    """
    One row per geometry: coordinates, `pred_<label>` columns and, when
    reference targets are given, the targets and `residual_<label>` = target - prediction.
    """
    coords = np.atleast_2d(coords)
    columns = {f"coord_{i + 1}": coords[:, i] for i in range(coords.shape[1])}
    for k, label in enumerate(labels):
        columns[f"pred_{label}"] = predictions[k]
    if targets is not None:
        for k, label in enumerate(labels):
            columns[label] = targets[k]
        for k, label in enumerate(labels):
            columns[f"residual_{label}"] = targets[k] - predictions[k]
    return _write_frame(pd.DataFrame(columns), path)


def write_spectrum(spectra: Iterable[KernelSpectrum], path: Union[str, Path]) -> Path:
    rows = [row for s in spectra for row in s.rows()]
    return _write_frame(pd.DataFrame(rows, columns=["probe_axis", "frequency", "magnitude"]), path)

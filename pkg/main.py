# main.py
"""
QELM experiment runner.

    python main.py gen-data --config experiments/lih_statevector.toml
    python main.py train    --config experiments/lih_statevector.toml --out output/
    python main.py sweep    --config experiments/lih_sweep.toml
    python main.py predict  --model output/lih_statevector_model.json --geometries geoms.csv
    python main.py spectrum --config experiments/spectrum.toml

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from dotenv import load_dotenv

from model_store import (
    load_model,
    model_from_result,
    output_dir,
    restore,
    save_model,
    write_metrics,
    write_predictions,
    write_spectrum,
)
from models import ExperimentConfig
from services.datasets import Dataset, generate_dataset, load_dataset, write_dataset
from services.encoding import sample_reservoir
from services.errors import ConfigError, QELMError
from services.kernels import spectrum
from services.molecules import get_preset, resolve_ranges, resolve_surface
from services.training import (
    build_probability_matrix,
    predict_matrix,
    sweep,
    sweep_rows,
    target_matrix,
    train_and_score,
)

# ----------------------------
# 0️⃣ Load environment
# ----------------------------
load_dotenv()
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

logger = logging.getLogger("qelm")


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def default_workers(configured: Optional[int]) -> int:
    if configured is not None:
        return configured
    try:
        return max(1, int(os.getenv("QELM_WORKERS", "1")))
    except ValueError:
        raise ConfigError(f"QELM_WORKERS must be an integer, got {os.getenv('QELM_WORKERS')!r}") from None


# ----------------------------
# 1️⃣ Config and data
# ----------------------------
def load_config(path: str, seed: Optional[int] = None) -> ExperimentConfig:
    config = ExperimentConfig.from_toml_file(path)
    if seed is not None:
        config = config.with_seed(seed)
    return config


def synthesize(config: ExperimentConfig) -> Dataset:
    preset = get_preset(config.molecule)
    return generate_dataset(
        preset.molecule,
        resolve_ranges(preset, config.data),
        resolve_surface(preset, config.data),
        config.data.n_samples,
        config.data.sample_seed,
    )


def resolve_dataset(config: ExperimentConfig) -> Dataset:
    """The configured CSV, or a synthetic set drawn from the preset surface"""
    if config.data.path:
        return load_dataset(config.data.path, get_preset(config.molecule).molecule)
    return synthesize(config)


# ----------------------------
# 2️⃣ Commands
# ----------------------------
def cmd_gen_data(config: ExperimentConfig, out: Optional[str] = None) -> Path:
    dataset = synthesize(config)
    path = write_dataset(dataset, output_dir(out, config.output_dir) / f"{config.name}_dataset.csv")
    print(f"[SUCCESS] {len(dataset)} {dataset.molecule.name} geometries written to {path}")
    return path


def cmd_train(config: ExperimentConfig, out: Optional[str] = None) -> Tuple[Path, Path]:
    dataset = resolve_dataset(config)
    molecule = dataset.molecule
    enc = config.encoding.to_spec(molecule.n_coords)
    training = config.training
    result = train_and_score(
        dataset, enc, config.shots, training.m_train, training.split_seed, training.svd_cutoff,
        training.targets, training.center_targets, workers=default_workers(config.sweep.workers),
    )
    rows = result.test_metrics.to_rows(
        molecule.name, enc.n_qubits, training.m_train, config.shots.label, enc.seed, result.depth_native,
    )

    target = output_dir(out, config.output_dir)
    metrics_path = write_metrics(rows, target / f"{config.name}_metrics.csv")
    model_path = save_model(model_from_result(result, molecule, config.shots, rows), target / f"{config.name}_model.json")

    print(f"[SUCCESS] Trained {molecule.name} readout: N={enc.n_qubits}, M_tr={training.m_train}, "
          f"shots={config.shots.label}, depth={result.depth_native}, "
          f"singular values kept {result.readout.singular_values_kept}/{result.readout.rank_bound}, "
          f"circuit evaluations {result.circuit_evaluations}")
    for row in rows:
        ratio = "undefined" if row.ratio is None else f"{row.ratio:.3e}"
        print(f"  {row.target:>10}: rmse={row.rmse:.3e} sqrt_var={row.sqrt_var:.3e} ratio={ratio}")
    print(f"[SUCCESS] Model: {model_path}  Metrics: {metrics_path}")
    return model_path, metrics_path


def cmd_sweep(config: ExperimentConfig, out: Optional[str] = None) -> Path:
    dataset = resolve_dataset(config)
    training = config.training
    cells = sweep(
        dataset,
        config.sweep.qubit_counts,
        config.sweep.train_sizes,
        config.shots,
        seeds=config.sweep.seeds,
        encoding=config.encoding,
        split_seed=training.split_seed,
        cutoff=training.svd_cutoff,
        targets=training.targets,
        center=training.center_targets,
        workers=default_workers(config.sweep.workers),
    )
    rows = sweep_rows(cells, dataset.molecule.name, config.shots)
    path = write_metrics(rows, output_dir(out, config.output_dir) / f"{config.name}_sweep.csv")
    print(f"[SUCCESS] Sweep of {len(cells)} cell(s) written to {path}")
    return path


def cmd_predict(model_path: str, geometries_path: str, out: Optional[str] = None) -> Path:
    model = load_model(model_path)
    enc, reservoir, readout = restore(model)
    dataset = load_dataset(geometries_path, model.molecule, require_targets=False)

    P = build_probability_matrix(dataset.coords, model.molecule, enc, reservoir, model.shots)
    predictions = predict_matrix(readout, P)
    targets = None
    if dataset.has_targets:
        mode = "energy" if readout.labels == ["energy"] else "joint"
        targets = target_matrix(dataset, mode).entries

    path = write_predictions(
        dataset.coords, readout.labels, predictions,
        output_dir(out) / f"{Path(geometries_path).stem}_predictions.csv", targets,
    )
    print(f"[SUCCESS] Predictions for {len(dataset)} geometries written to {path}")
    return path


def cmd_spectrum(config: ExperimentConfig, out: Optional[str] = None) -> Path:
    molecule = get_preset(config.molecule).molecule
    enc = config.encoding.to_spec(molecule.n_coords)
    reservoir = sample_reservoir(enc)
    axes = config.spectrum.probe_axes if config.spectrum.probe_axes is not None else range(molecule.n_coords)
    workers = default_workers(config.sweep.workers)

    spectra = [
        spectrum(enc, reservoir, axis, config.spectrum.grid_size, config.spectrum.threshold, workers)
        for axis in axes
    ]
    path = write_spectrum(spectra, output_dir(out, config.output_dir) / f"{config.name}_spectrum.csv")
    for s in spectra:
        status = "[SUCCESS]" if s.within_band and s.positive_count <= s.frequency_bound else "[WARNING]"
        print(f"{status} axis {s.probe_axis}: frequencies {s.frequencies.tolist()}, "
              f"out-of-band energy {s.out_of_band_energy:.2e}")
    print(f"[SUCCESS] Spectrum written to {path}")
    return path


# ----------------------------
# 3️⃣ Command line
# ----------------------------
class QELMArgumentParser(argparse.ArgumentParser):
    """Usage errors raise ConfigError so they share exit code 1"""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = QELMArgumentParser(description="Quantum extreme learning machine for molecular PES and force fields")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level (default from LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("gen-data", "Generate a synthetic dataset CSV"),
        ("train", "Train and score a readout, write model and metrics"),
        ("sweep", "Metrics grid over qubit counts, training sizes and seeds"),
        ("spectrum", "Fourier spectrum of the encoding kernel per coordinate"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="Experiment TOML file")
        cmd.add_argument("--out", default=None, help="Output directory")
        cmd.add_argument("--seed", type=int, default=None, help="Override the reservoir seed")

    cmd = sub.add_parser("predict", help="Predict energies and forces with a saved model")
    cmd.add_argument("--model", required=True, help="Model JSON written by train")
    cmd.add_argument("--geometries", required=True, help="Geometry CSV (targets optional)")
    cmd.add_argument("--out", default=None, help="Output directory")
    return parser


def run(args: argparse.Namespace) -> None:
    if args.command == "predict":
        cmd_predict(args.model, args.geometries, args.out)
        return
    if args.seed is not None and args.seed < 0:
        raise ConfigError(f"--seed must be non-negative, got {args.seed}")
    config = load_config(args.config, args.seed)
    logger.info("running %s for experiment %s", args.command, config.name)
    commands = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "sweep": cmd_sweep,
        "spectrum": cmd_spectrum,
    }
    commands[args.command](config, args.out)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        run(args)
    except QELMError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

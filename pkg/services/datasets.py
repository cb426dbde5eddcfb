"""
Geometry/energy/force datasets.

CSV schema (UTF-8, LF, '.' decimal point):

    coord_1,...,coord_X,energy,force_1,...,force_X

Lengths in Angstrom, angles in radians, energy in Hartree, forces in
Hartree/Angstrom (per generalized coordinate, F_i = -dE/dq_i). Files used
only for prediction may carry the coordinate columns alone.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from models import CoordKind, MoleculeSpec, MorseParams, PolyquadParams, SamplingRanges, SurfaceSpec
from services.errors import (
    ConfigError,
    DataError,
    DatasetParseError,
    DimensionMismatchError,
    DomainError,
    InsufficientDataError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Geometry:
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).reshape(-1))


@dataclass
class Dataset:
    molecule: MoleculeSpec
    coords: np.ndarray
    energies: Optional[np.ndarray] = None
    forces: Optional[np.ndarray] = None
    provenance: str = ""

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        m, n = self.coords.shape
        if n != self.molecule.n_coords:
            raise DimensionMismatchError(f"{self.molecule.name} expects {self.molecule.n_coords} coordinate(s), got {n}")
        if self.energies is not None:
            self.energies = np.asarray(self.energies, dtype=float).reshape(-1)
            if self.energies.shape[0] != m:
                raise DimensionMismatchError(f"{m} geometries but {self.energies.shape[0]} energies")
        if self.forces is not None:
            self.forces = np.asarray(self.forces, dtype=float).reshape(m, n)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def geometries(self) -> List[Geometry]:
        return [Geometry(row) for row in self.coords]

    @property
    def has_targets(self) -> bool:
        return self.energies is not None and self.forces is not None

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            molecule=self.molecule,
            coords=self.coords[indices],
            energies=None if self.energies is None else self.energies[indices],
            forces=None if self.forces is None else self.forces[indices],
            provenance=self.provenance,
        )


def csv_header(n_coords: int, with_targets: bool = True) -> List[str]:
    header = [f"coord_{i + 1}" for i in range(n_coords)]
    if with_targets:
        header += ["energy"] + [f"force_{i + 1}" for i in range(n_coords)]
    return header


def validate_geometry(coords: np.ndarray, molecule: MoleculeSpec, row: Optional[int] = None) -> None:
    """Lengths > 0, angles in (0, pi)"""
    for value, kind, name in zip(coords, molecule.coord_kinds, molecule.coord_names):
        if kind is CoordKind.BOND_LENGTH and not value > 0:
            raise DomainError(f"bond length {name} must be positive, got {value}", row=row)
        if kind is CoordKind.BOND_ANGLE and not 0 < value < np.pi:
            raise DomainError(f"bond angle {name} must lie in (0, pi) radians, got {value}", row=row)


# ----------------------------
# CSV I/O
# ----------------------------

def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise DataError(f"dataset not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise DatasetParseError(f"{path} is empty", line=1) from e
    except pd.errors.ParserError as e:
        raise DatasetParseError(f"{path}: {e}") from e
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e


def _numeric(frame: pd.DataFrame) -> np.ndarray:
    values = np.empty(frame.shape, dtype=float)
    for j, column in enumerate(frame.columns):
        text = frame[column].str.strip()
        try:
            # Python's float() round-trips the repr written by write_dataset
            parsed = text.map(float).to_numpy(dtype=float)
        except ValueError:
            parsed = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(parsed))
        if bad.size:
            i = int(bad[0])
            raise DatasetParseError(
                f"column {column} holds non-numeric value {frame[column].iloc[i]!r}", line=i + 2
            )
        values[:, j] = parsed
    return values


def load_dataset(path: Union[str, Path], molecule: MoleculeSpec, require_targets: bool = True) -> Dataset:
    """
    Parse a dataset CSV. Line numbers in errors count the header as line 1.
    With `require_targets=False` a coordinates-only file is accepted too.
    """
    frame = _read_frame(path)
    header = list(frame.columns)
    n = molecule.n_coords
    full, bare = csv_header(n), csv_header(n, with_targets=False)
    if header != full and (require_targets or header != bare):
        raise DatasetParseError(
            f"header {','.join(header)} does not match {','.join(full)}"
            f" (expected {n} coordinate(s) for {molecule.name})",
            line=1,
        )
    if len(frame) == 0:
        raise DatasetParseError(f"{path} has a header but no rows", line=2)

    values = _numeric(frame)
    coords = values[:, :n]
    for i, row in enumerate(coords):
        validate_geometry(row, molecule, row=i + 1)

    energies = forces = None
    if header == full:
        energies = values[:, n]
        forces = values[:, n + 1:]
    logger.info("[SUCCESS] Loaded %d geometries from %s", len(frame), path)
    return Dataset(molecule, coords, energies, forces, provenance=str(path))


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    n = dataset.molecule.n_coords
    columns = {name: dataset.coords[:, i] for i, name in enumerate(csv_header(n, with_targets=False))}
    if dataset.has_targets:
        columns["energy"] = dataset.energies
        for i in range(n):
            columns[f"force_{i + 1}"] = dataset.forces[:, i]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot write dataset {path}: {e}") from e
    return path


# ----------------------------
# Splitting and sampling
# ----------------------------

def split_indices(size: int, m_train: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle of range(size); the first `m_train` go to training, the rest to test"""
    if not 1 <= m_train < size:
        raise InsufficientDataError(
            f"m_train must be in [1, {size - 1}] for {size} geometries, got {m_train}"
        )
    order = np.random.Generator(np.random.PCG64(seed)).permutation(size)
    return order[:m_train], order[m_train:]


def split(dataset: Dataset, m_train: int, seed: int) -> Tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(len(dataset), m_train, seed)
    return dataset.subset(train_idx), dataset.subset(test_idx)


def sample_geometries(ranges: SamplingRanges, m: int, seed: int) -> List[Geometry]:
    """i.i.d. uniform coordinates inside the closed intervals"""
    if m < 1:
        raise InsufficientDataError(f"need at least one geometry, got m={m}")
    rng = np.random.Generator(np.random.PCG64(seed))
    low = np.asarray(ranges.lower)
    high = np.asarray(ranges.upper)
    samples = low + (high - low) * rng.random((m, low.shape[0]))
    return [Geometry(row) for row in samples]


# ----------------------------
# Analytic surfaces
# ----------------------------

def morse_surface(r, params: MorseParams) -> Tuple[np.ndarray, np.ndarray]:
    """E = E0 + D (1 - exp(-a (r - r0)))^2 and F = -dE/dr"""
    r = np.asarray(r, dtype=float)
    decay = np.exp(-params.width * (r - params.r0))
    energy = params.e0 + params.depth * (1.0 - decay) ** 2
    force = -2.0 * params.depth * params.width * (1.0 - decay) * decay
    return energy, force


def polyquad_surface(coords, params: PolyquadParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    E = E0 + sum_i k_i d_i^2 + sum_{i<j} c_ij d_i d_j + sum_i g_i d_i^3, d = q - q0.

    Accepts one geometry (X,) or a batch (M, X); forces are -dE/dq.
    """
    q = np.asarray(coords, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    q0 = np.asarray(params.q0)
    if q.shape[1] != q0.shape[0]:
        raise DimensionMismatchError(f"surface has {q0.shape[0]} coordinate(s), got {q.shape[1]}")
    k = np.asarray(params.k)
    g = np.zeros_like(k) if params.g is None else np.asarray(params.g)
    upper = np.zeros((k.shape[0], k.shape[0])) if params.c is None else np.triu(np.asarray(params.c), 1)
    coupling = upper + upper.T

    d = q - q0
    energy = params.e0 + d ** 2 @ k + 0.5 * np.einsum("mi,ij,mj->m", d, coupling, d) + d ** 3 @ g
    grad = 2.0 * k * d + d @ coupling + 3.0 * g * d ** 2
    if single:
        return energy[0], -grad[0]
    return energy, -grad


def evaluate_surface(surface: SurfaceSpec, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if surface.kind == "morse":
        if coords.shape[1] != 1:
            raise ConfigError(f"morse surface takes one bond length, dataset has {coords.shape[1]} coordinates")
        energy, force = morse_surface(coords[:, 0], surface.morse)
        return energy, force.reshape(-1, 1)
    return polyquad_surface(coords, surface.polyquad)


def generate_dataset(molecule: MoleculeSpec, ranges: SamplingRanges, surface: SurfaceSpec,
                     m: int, seed: int) -> Dataset:
    if len(ranges.intervals) != molecule.n_coords:
        raise ConfigError(
            f"{molecule.name} has {molecule.n_coords} coordinate(s), got {len(ranges.intervals)} interval(s)"
        )
    coords = np.stack([g.coords for g in sample_geometries(ranges, m, seed)])
    for i, row in enumerate(coords):
        validate_geometry(row, molecule, row=i + 1)
    energies, forces = evaluate_surface(surface, coords)
    logger.info("[SUCCESS] Generated %d synthetic %s geometries (%s surface)", m, molecule.name, surface.kind)
    return Dataset(molecule, coords, energies, forces, provenance=f"synthetic:{surface.kind}:seed={seed}")

import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import tomli_w
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from services.errors import ConfigError

# ----------------------------
# Molecule / encoding / measurement specs
# ----------------------------

class CoordKind(str, Enum):
    BOND_LENGTH = "BondLength"
    BOND_ANGLE = "BondAngle"


class MoleculeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Molecule name")
    coord_names: List[str] = Field(..., min_length=1, description="Generalized coordinate labels")
    coord_kinds: List[CoordKind] = Field(..., min_length=1, description="Kind of each coordinate")
    reference_length: float = Field(..., gt=0, description="Reference bond length r_bar in Angstrom")
    angle_divisor: float = Field(default=2.0, gt=0, description="Bond angles are divided by this")

    @model_validator(mode="after")
    def _lengths_match(self):
        if len(self.coord_names) != len(self.coord_kinds):
            raise ValueError("coord_names and coord_kinds must have the same length")
        return self

    @property
    def n_coords(self) -> int:
        return len(self.coord_kinds)


class EncodingSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(..., ge=1, le=20, description="Encoding qubits N")
    n_coords: int = Field(..., ge=1, description="Input coordinates")
    seed: int = Field(default=0, ge=0, description="Reservoir seed")
    layers_per_block: int = Field(default=1, ge=1, description="Entangling layers in each W block")
    mixing_blocks: int = Field(default=3, ge=0, description="Trailing mixing blocks")
    topology: Literal["linear", "ring"] = Field(default="linear", description="ECR entangler layout")


class ShotPlan(BaseModel):
    """`shots=None` is the infinite-statistics (statevector) sentinel"""

    model_config = ConfigDict(frozen=True)

    shots: Optional[int] = Field(default=None, ge=1, description="Shots per geometry, None for exact")
    seed: int = Field(default=0, ge=0, description="Sampling seed")

    @field_validator("shots", mode="before")
    @classmethod
    def _parse_infinite(cls, value):
        if isinstance(value, str) and value.strip().lower() in {"inf", "infinite", "statevector", "exact"}:
            return None
        if isinstance(value, float) and math.isinf(value):
            return None
        return value

    @field_serializer("shots")
    def _dump_shots(self, shots: Optional[int]):
        return "inf" if shots is None else shots

    @property
    def is_exact(self) -> bool:
        return self.shots is None

    @property
    def label(self) -> str:
        return "inf" if self.shots is None else str(self.shots)


class SamplingRanges(BaseModel):
    """Closed per-coordinate intervals in Geometry units (Angstrom, radians)"""

    model_config = ConfigDict(frozen=True)

    intervals: List[Tuple[float, float]] = Field(..., min_length=1)

    @field_validator("intervals")
    @classmethod
    def _ordered(cls, intervals):
        for i, (low, high) in enumerate(intervals):
            if not (math.isfinite(low) and math.isfinite(high)):
                raise ValueError(f"interval {i} is not finite")
            if low > high:
                raise ValueError(f"interval {i} has lower bound {low} above upper bound {high}")
        return intervals

    @property
    def lower(self) -> List[float]:
        return [low for low, _ in self.intervals]

    @property
    def upper(self) -> List[float]:
        return [high for _, high in self.intervals]


class ShiftRuleSpec(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(..., gt=0, alias="lambda", description="Half-gap of the generator eigenvalues")
    n_shifts: int = Field(default=1, ge=1, description="Number of shift pairs S")


# ----------------------------
# Synthetic surfaces
# ----------------------------

class MorseParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    depth: float = Field(..., gt=0, description="Well depth D in Hartree")
    width: float = Field(..., gt=0, description="Range parameter a in 1/Angstrom")
    r0: float = Field(..., gt=0, description="Equilibrium bond length in Angstrom")
    e0: float = Field(default=0.0, description="Energy at the minimum in Hartree")


class PolyquadParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    e0: float = Field(default=0.0, description="Energy at the reference point in Hartree")
    q0: List[float] = Field(..., min_length=1, description="Reference coordinates")
    k: List[float] = Field(..., description="Quadratic coefficients")
    g: Optional[List[float]] = Field(default=None, description="Cubic coefficients")
    c: Optional[List[List[float]]] = Field(
        default=None, description="Pair couplings; only entries above the diagonal are used"
    )

    @model_validator(mode="after")
    def _shapes(self):
        n = len(self.q0)
        if len(self.k) != n:
            raise ValueError(f"k needs {n} entries, got {len(self.k)}")
        if self.g is not None and len(self.g) != n:
            raise ValueError(f"g needs {n} entries, got {len(self.g)}")
        if self.c is not None and (len(self.c) != n or any(len(row) != n for row in self.c)):
            raise ValueError(f"c must be {n}x{n}")
        return self


class SurfaceSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["morse", "polyquad"]
    morse: Optional[MorseParams] = None
    polyquad: Optional[PolyquadParams] = None

    @model_validator(mode="after")
    def _params_present(self):
        if self.kind == "morse" and self.morse is None:
            raise ValueError("morse surface needs [morse] parameters")
        if self.kind == "polyquad" and self.polyquad is None:
            raise ValueError("polyquad surface needs [polyquad] parameters")
        return self


# ----------------------------
# Experiment config (TOML)
# ----------------------------

class EncodingConfig(BaseModel):
    n_qubits: int = Field(default=4, ge=1, le=20)
    seed: int = Field(default=0, ge=0)
    layers_per_block: int = Field(default=1, ge=1)
    mixing_blocks: int = Field(default=3, ge=0)
    topology: Literal["linear", "ring"] = "linear"

    def to_spec(self, n_coords: int, n_qubits: Optional[int] = None, seed: Optional[int] = None) -> EncodingSpec:
        return EncodingSpec(
            n_qubits=self.n_qubits if n_qubits is None else n_qubits,
            n_coords=n_coords,
            seed=self.seed if seed is None else seed,
            layers_per_block=self.layers_per_block,
            mixing_blocks=self.mixing_blocks,
            topology=self.topology,
        )


class DataConfig(BaseModel):
    path: Optional[str] = Field(default=None, description="Dataset CSV; synthetic data when unset")
    n_samples: int = Field(default=170, ge=1)
    sample_seed: int = Field(default=0, ge=0)
    ranges: Optional[List[Tuple[float, float]]] = Field(
        default=None, description="Per-coordinate sampling intervals; preset ranges when unset"
    )
    angle_unit: Literal["deg", "rad"] = Field(default="deg", description="Unit of angle intervals in `ranges`")
    surface: Optional[SurfaceSpec] = Field(default=None, description="Overrides the preset surface")


class TrainingConfig(BaseModel):
    m_train: int = Field(default=50, ge=1)
    split_seed: int = Field(default=0, ge=0)
    svd_cutoff: float = Field(default=1e-12, ge=0.0, lt=1.0)
    targets: Literal["joint", "energy"] = "joint"
    center_targets: bool = False


class SweepConfig(BaseModel):
    qubit_counts: List[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6], min_length=1)
    train_sizes: List[int] = Field(default_factory=lambda: [8, 16, 32, 64], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator("qubit_counts")
    @classmethod
    def _qubits_in_range(cls, counts):
        for n in counts:
            if not 1 <= n <= 20:
                raise ValueError(f"qubit count {n} outside [1, 20]")
        return counts


class SpectrumConfig(BaseModel):
    probe_axes: Optional[List[int]] = Field(default=None, description="Coordinates to probe; all when unset")
    grid_size: int = Field(default=64, ge=3)
    threshold: float = Field(default=1e-8, gt=0.0, lt=1.0)


class ExperimentConfig(BaseModel):
    name: str = Field(..., min_length=1)
    molecule: str = Field(..., min_length=1, description="Preset name: lih, h2o or hconh2")
    encoding: EncodingConfig = Field(default_factory=EncodingConfig)
    shots: ShotPlan = Field(default_factory=ShotPlan)
    data: DataConfig = Field(default_factory=DataConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)
    output_dir: Optional[str] = None

    @classmethod
    def from_toml_str(cls, text: str) -> "ExperimentConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML: {e}") from e
        try:
            return cls.model_validate(raw)
        except ValueError as e:
            raise ConfigError(f"invalid experiment config: {e}") from e

    @classmethod
    def from_toml_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_toml_str(text)

    def to_toml_str(self) -> str:
        return tomli_w.dumps(self.model_dump(mode="json", exclude_none=True))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Override the reservoir seed; sweeps then run that single seed"""
        return self.model_copy(update={
            "encoding": self.encoding.model_copy(update={"seed": seed}),
            "sweep": self.sweep.model_copy(update={"seeds": [seed]}),
        })


# ----------------------------
# Results / persisted model
# ----------------------------

METRICS_COLUMNS = [
    "molecule", "n_qubits", "m_train", "shots", "seed",
    "target", "rmse", "sqrt_var", "ratio", "depth_native",
]


class MetricsRow(BaseModel):
    molecule: str
    n_qubits: int
    m_train: int
    shots: str
    seed: int
    target: str
    rmse: float
    sqrt_var: float
    ratio: Optional[float] = Field(default=None, description="rmse / sqrt_var; None when the test targets are constant")
    depth_native: int


class ModelFile(BaseModel):
    format_version: int = 1
    molecule: MoleculeSpec
    encoding: EncodingSpec
    shots: ShotPlan
    reservoir_angles: List[List[float]]
    target_labels: List[str]
    weights: List[List[float]]
    target_offset: Optional[List[float]] = None
    svd_cutoff: float
    singular_values_kept: int
    rank_bound: int
    circuit_evaluations: int
    metrics: List[MetricsRow] = Field(default_factory=list)

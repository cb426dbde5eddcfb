"""
Molecule presets: generalized coordinates, rescaling reference lengths,
sampling intervals and default synthetic surfaces for LiH, H2O and HCONH2.

Surface parameters are desk-scale stand-ins for the electronic-structure
datasets. The LiH Morse curve uses spectroscopic constants (D = 2.515 eV,
omega_e = 1405.6 cm^-1, r_e = 1.5957 A); the polyquad surfaces use harmonic
constants of typical stretch/bend force constants with cubic softening.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from models import (
    CoordKind,
    DataConfig,
    MoleculeSpec,
    MorseParams,
    PolyquadParams,
    SamplingRanges,
    SurfaceSpec,
)
from services.errors import ConfigError

L = CoordKind.BOND_LENGTH
A = CoordKind.BOND_ANGLE


@dataclass(frozen=True)
class MoleculePreset:
    molecule: MoleculeSpec
    ranges: SamplingRanges
    surface: SurfaceSpec
    n_samples: int
    m_train: int
    n_qubits: int


def _centered(center: float, half_width: float) -> Tuple[float, float]:
    return (center - half_width, center + half_width)


def _lih() -> MoleculePreset:
    molecule = MoleculeSpec(name="LiH", coord_names=["r"], coord_kinds=[L], reference_length=6.0)
    surface = SurfaceSpec(
        kind="morse",
        morse=MorseParams(depth=0.09243, width=1.128, r0=1.5957, e0=-8.0705),
    )
    return MoleculePreset(molecule, SamplingRanges(intervals=[(0.9, 4.5)]), surface,
                          n_samples=170, m_train=50, n_qubits=5)


def _h2o() -> MoleculePreset:
    phi0 = float(np.deg2rad(102.792))
    molecule = MoleculeSpec(
        name="H2O", coord_names=["r1", "r2", "phi"], coord_kinds=[L, L, A], reference_length=2.0,
    )
    ranges = SamplingRanges(intervals=[
        _centered(0.964, 0.2),
        _centered(0.964, 0.2),
        _centered(phi0, float(np.deg2rad(13.0))),
    ])
    surface = SurfaceSpec(kind="polyquad", polyquad=PolyquadParams(
        e0=-76.36,
        q0=[0.964, 0.964, phi0],
        k=[0.97, 0.97, 0.08],
        g=[-2.1, -2.1, -0.03],
        c=[[0.0, -0.02, 0.03],
           [0.0, 0.0, 0.03],
           [0.0, 0.0, 0.0]],
    ))
    return MoleculePreset(molecule, ranges, surface, n_samples=900, m_train=300, n_qubits=7)


def _hconh2() -> MoleculePreset:
    # planar formamide, both N-H bonds share one length
    names = ["r_CO", "r_CN", "r_CH", "r_NH", "a_OCN", "a_HCN", "a_H1NC", "a_H2NC"]
    kinds = [L, L, L, L, A, A, A, A]
    bonds = [1.212, 1.352, 1.098, 1.002]
    angles = [float(np.deg2rad(a)) for a in (124.7, 112.7, 119.3, 121.7)]
    bond_half_widths = [0.15, 0.15, 0.10, 0.10]
    angle_half_width = float(np.deg2rad(8.0))
    ranges = SamplingRanges(intervals=(
        [_centered(b, w) for b, w in zip(bonds, bond_half_widths)]
        + [_centered(a, angle_half_width) for a in angles]
    ))
    k = [1.38, 0.69, 0.55, 0.73, 0.12, 0.08, 0.06, 0.06]
    c = np.zeros((8, 8))
    c[0, 1] = 0.10
    c[1, 4] = 0.05
    c[3, 6] = 0.02
    c[3, 7] = 0.02
    surface = SurfaceSpec(kind="polyquad", polyquad=PolyquadParams(
        e0=-168.93,
        q0=bonds + angles,
        k=k,
        g=[-2.2 * kb for kb in k[:4]] + [-0.02] * 4,
        c=c.tolist(),
    ))
    molecule = MoleculeSpec(name="HCONH2", coord_names=names, coord_kinds=kinds, reference_length=2.0)
    return MoleculePreset(molecule, ranges, surface, n_samples=6500, m_train=300, n_qubits=9)


PRESETS: Dict[str, MoleculePreset] = {
    "lih": _lih(),
    "h2o": _h2o(),
    "hconh2": _hconh2(),
}


def get_preset(name: str) -> MoleculePreset:
    try:
        return PRESETS[name.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown molecule '{name}', expected one of {sorted(PRESETS)}") from None


def resolve_ranges(preset: MoleculePreset, data: Optional[DataConfig] = None) -> SamplingRanges:
    """Preset ranges, or the config's ranges with angle intervals converted to radians"""
    if data is None or data.ranges is None:
        return preset.ranges
    kinds = preset.molecule.coord_kinds
    if len(data.ranges) != len(kinds):
        raise ConfigError(
            f"{preset.molecule.name} has {len(kinds)} coordinate(s), ranges list has {len(data.ranges)}"
        )
    intervals: List[Tuple[float, float]] = []
    for kind, (low, high) in zip(kinds, data.ranges):
        if kind is A and data.angle_unit == "deg":
            low, high = float(np.deg2rad(low)), float(np.deg2rad(high))
        intervals.append((low, high))
    try:
        return SamplingRanges(intervals=intervals)
    except ValueError as e:
        raise ConfigError(f"invalid sampling ranges: {e}") from e


def resolve_surface(preset: MoleculePreset, data: Optional[DataConfig] = None) -> SurfaceSpec:
    if data is not None and data.surface is not None:
        return data.surface
    return preset.surface

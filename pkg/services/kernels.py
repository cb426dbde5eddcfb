"""
Kernel diagnostics for the encodings.

kappa(x, y) = |<psi(x)|psi(y)>|^2. With the Fourier encoding the kernel is a
trigonometric polynomial in each input whose integer frequencies are the
gaps of G = 1/2 sum_i Z_i, so they lie in {-N, ..., N}.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import pi
from typing import Dict, List, Sequence

import numpy as np

from models import EncodingSpec
from services.circuits import Circuit, GateOp
from services.encoding import Reservoir, encode_state
from services.errors import AliasingError, DimensionMismatchError
from services.statevector import QuantumState, apply_circuit, new_zero_state, overlap

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-8
CONVENTION_CANDIDATES = (0.5, 1.0)


def _inputs(x, y, n_coords: int):
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != n_coords or y.shape[0] != n_coords:
        raise DimensionMismatchError(
            f"kernel inputs need {n_coords} coordinate(s), got {x.shape[0]} and {y.shape[0]}"
        )
    return x, y


def kernel(x, y, enc: EncodingSpec, reservoir: Reservoir) -> float:
    """Overlap of the Fourier-encoded states of two (rescaled) inputs"""
    x, y = _inputs(x, y, enc.n_coords)
    return overlap(encode_state(x, enc, reservoir), encode_state(y, enc, reservoir))


def gram_matrix(points, enc: EncodingSpec, reservoir: Reservoir) -> np.ndarray:
    states = np.stack([encode_state(p, enc, reservoir).amplitudes for p in points], axis=1)
    return np.abs(states.conj().T @ states) ** 2


# ----------------------------
# Rotation encoding
# ----------------------------

def rotation_encoding_state(x) -> QuantumState:
    """Rx(x_i) on qubit i of |0...0>, one qubit per input"""
    x = np.asarray(x, dtype=float).reshape(-1)
    circuit = Circuit(x.shape[0], [GateOp.rx(i, value) for i, value in enumerate(x)])
    return apply_circuit(new_zero_state(x.shape[0]), circuit)


def rotation_kernel(x, y) -> float:
    x, y = _inputs(x, y, np.asarray(x).size)
    return overlap(rotation_encoding_state(x), rotation_encoding_state(y))


def rotation_kernel_closed_form(x, y, scale: float = 0.5) -> float:
    """prod_i cos^2(scale * (x_i - y_i))"""
    x, y = _inputs(x, y, np.asarray(x).size)
    return float(np.prod(np.cos(scale * (x - y)) ** 2))


@dataclass
class ConventionFit:
    scale: float
    max_deviation: float
    deviations: Dict[float, float] = field(default_factory=dict)


def fit_convention_scale(n_coords: int = 1, n_pairs: int = 200, seed: int = 0,
                         candidates: Sequence[float] = CONVENTION_CANDIDATES) -> ConventionFit:
    """Pick the closed-form scale that best matches brute-force rotation-encoding overlaps"""
    rng = np.random.Generator(np.random.PCG64(seed))
    pairs = rng.uniform(-pi, pi, size=(n_pairs, 2, n_coords))
    simulated = np.array([rotation_kernel(a, b) for a, b in pairs])
    deviations = {
        s: float(np.max(np.abs(simulated - [rotation_kernel_closed_form(a, b, s) for a, b in pairs])))
        for s in candidates
    }
    best = min(deviations, key=deviations.get)
    logger.debug("rotation-kernel scale fit over %d pair(s): %s", n_pairs, deviations)
    return ConventionFit(best, deviations[best], deviations)


# ----------------------------
# Spectrum
# ----------------------------

@dataclass
class KernelSpectrum:
    n_qubits: int
    probe_axis: int
    grid_size: int
    frequencies: np.ndarray
    coefficients: np.ndarray
    out_of_band_energy: float

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coefficients)

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self.frequencies > 0))

    @property
    def frequency_bound(self) -> int:
        """Upper bound 2^(2N-1) - 1 on distinct frequencies per coordinate"""
        return 2 ** (2 * self.n_qubits - 1) - 1

    @property
    def within_band(self) -> bool:
        return bool(np.all(np.abs(self.frequencies) <= self.n_qubits))

    def rows(self) -> List[tuple]:
        return [(self.probe_axis, int(f), float(m)) for f, m in zip(self.frequencies, self.magnitudes)]


def spectrum(enc: EncodingSpec, reservoir: Reservoir, probe_axis: int = 0, grid_size: int = 64,
             threshold: float = DEFAULT_THRESHOLD, workers: int = 1) -> KernelSpectrum:
    """
    DFT of kappa(t e_axis, 0) over a uniform grid on [0, 2 pi). Frequencies
    whose coefficient magnitude exceeds `threshold` times the largest are
    reported; energy outside |n| <= N is returned relative to the total.
    """
    if not 0 <= probe_axis < enc.n_coords:
        raise DimensionMismatchError(f"probe axis {probe_axis} outside [0, {enc.n_coords})")
    if grid_size < 2 * enc.n_qubits + 1:
        raise AliasingError(
            f"grid of {grid_size} point(s) aliases frequencies up to {enc.n_qubits}; "
            f"use at least {2 * enc.n_qubits + 1}"
        )

    origin = encode_state(np.zeros(enc.n_coords), enc, reservoir)
    grid = 2 * pi * np.arange(grid_size) / grid_size

    def value(t: float) -> float:
        x = np.zeros(enc.n_coords)
        x[probe_axis] = t
        return overlap(encode_state(x, enc, reservoir), origin)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = np.array(list(pool.map(value, grid)))
    else:
        values = np.array([value(t) for t in grid])

    coefficients = np.fft.fft(values) / grid_size
    frequencies = np.rint(np.fft.fftfreq(grid_size, d=1.0 / grid_size)).astype(int)
    power = np.abs(coefficients) ** 2
    total = power.sum()
    outside = np.abs(frequencies) > enc.n_qubits
    out_of_band = float(power[outside].sum() / total) if total > 0 else 0.0

    magnitudes = np.abs(coefficients)
    detected = magnitudes > threshold * magnitudes.max()
    order = np.argsort(frequencies[detected], kind="stable")
    result = KernelSpectrum(
        n_qubits=enc.n_qubits,
        probe_axis=probe_axis,
        grid_size=grid_size,
        frequencies=frequencies[detected][order],
        coefficients=coefficients[detected][order],
        out_of_band_energy=out_of_band,
    )
    logger.info("[SUCCESS] spectrum axis %d (N=%d): %d frequency(ies), out-of-band energy %.2e",
                probe_axis, enc.n_qubits, result.frequencies.size, out_of_band)
    return result

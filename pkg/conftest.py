"""Shared pytest fixtures"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from models import EncodingSpec, ShotPlan  # noqa: E402
from services.datasets import generate_dataset  # noqa: E402
from services.encoding import sample_reservoir  # noqa: E402
from services.molecules import get_preset  # noqa: E402
from services.statevector import QuantumState  # noqa: E402


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def lih():
    return get_preset("lih")


@pytest.fixture
def h2o():
    return get_preset("h2o")


@pytest.fixture(scope="session")
def lih_dataset():
    """Synthetic Morse LiH set: 170 geometries over 0.9-4.5 A"""
    preset = get_preset("lih")
    return generate_dataset(preset.molecule, preset.ranges, preset.surface, 170, seed=0)


@pytest.fixture
def exact():
    return ShotPlan(shots=None)


@pytest.fixture
def enc3():
    return EncodingSpec(n_qubits=3, n_coords=1, seed=11)


@pytest.fixture
def reservoir3(enc3):
    return sample_reservoir(enc3)


def random_state(rng, n_qubits: int) -> QuantumState:
    amps = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return QuantumState.from_amplitudes(amps, normalize=True)

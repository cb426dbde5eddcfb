"""
Computational-basis measurement of every encoding qubit: exact outcome
probabilities and finite-shot estimates. Outcome a is the little-endian
basis index, as in the simulator.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models import ShotPlan
from services.errors import ConfigError
from services.statevector import QuantumState


@dataclass(frozen=True)
class ProbVector:
    probs: np.ndarray
    shots: Optional[int] = None

    @property
    def size(self) -> int:
        return self.probs.shape[0]


def exact_probabilities(state: QuantumState) -> ProbVector:
    return ProbVector(np.abs(state.amplitudes) ** 2)


def geometry_rng(seed: int, geometry_index: int) -> np.random.Generator:
    """Per-geometry stream, independent of the order geometries are processed in"""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, geometry_index])))


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF multinomial draw of `shots` outcomes"""
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.bincount(outcomes, minlength=probs.shape[0])


def sampled_probabilities(state: QuantumState, plan: ShotPlan, geometry_index: int = 0) -> ProbVector:
    """Relative frequencies of `plan.shots` outcomes; deterministic in (plan.seed, geometry_index)"""
    if plan.is_exact:
        raise ConfigError("sampled_probabilities needs a finite number of shots")
    exact = np.abs(state.amplitudes) ** 2
    counts = sample_counts(exact, plan.shots, geometry_rng(plan.seed, geometry_index))
    return ProbVector(counts / plan.shots, shots=plan.shots)


def measure(state: QuantumState, plan: ShotPlan, geometry_index: int = 0) -> ProbVector:
    if plan.is_exact:
        return exact_probabilities(state)
    return sampled_probabilities(state, plan, geometry_index)

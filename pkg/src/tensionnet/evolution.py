"""Stage 2: iterative tension-driven feature evolution, conflict/consensus.

All core operations accept arbitrary leading batch dimensions on top of the
(n, d) feature-space shape, so the same code serves the single-sample API
and the vectorized training path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigurationError, DataError, NumericalError
from .nn import Mlp

SPACE_TAGS = ("fact", "sentiment")


@dataclass
class FeatureSpace:
    """An ordered set of n same-dimension feature vectors."""

    features: np.ndarray  # (n, d)
    space_tag: str = "fact"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise DataError("feature space must be a non-empty (n, d) array")
        if self.space_tag not in SPACE_TAGS:
            raise DataError(f"space_tag must be one of {SPACE_TAGS}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass
class TensionMatrix:
    """Pairwise squared differences, elementwise and reduced to scalars."""

    elementwise: Tensor  # (..., n, n, d)
    scalar: Tensor       # (..., n, n), mean over the d components

    @property
    def scalar_array(self) -> np.ndarray:
        return self.scalar.data


@dataclass
class EvolutionUnit:
    """The shared non-linear transform plus temperature and iteration count."""

    g: Mlp
    tau: float = 1.5
    iterations: int = 4

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigurationError("tau must be positive")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.g.dim_in != self.g.dim_out:
            raise ConfigurationError("evolution transform must map d -> d")


@dataclass
class EvolutionTrace:
    """All intermediate states S^(0..M) and tension matrices T^(0..M-1)."""

    states: list[Tensor] = field(default_factory=list)
    tensions: list[TensionMatrix] = field(default_factory=list)

    @property
    def final_state(self) -> Tensor:
        return self.states[-1]

    @property
    def final_tension(self) -> TensionMatrix:
        return self.tensions[-1]

    def state_arrays(self) -> list[np.ndarray]:
        return [s.data for s in self.states]

    def to_record(self) -> dict:
        """Human-readable summary: scalar tensions and feature norms per step."""
        return {
            "iterations": len(self.tensions),
            "feature_norms": [
                np.linalg.norm(s.data, axis=-1).tolist() for s in self.states
            ],
            "scalar_tensions": [t.scalar.data.tolist() for t in self.tensions],
        }


def compute_tension(features: Tensor | np.ndarray) -> TensionMatrix:
    """Pairwise squared differences over the feature axis."""
    S = ag.as_tensor(features)
    n, d = S.shape[-2], S.shape[-1]
    lead = S.shape[:-2]
    left = S.reshape(lead + (n, 1, d))
    right = S.reshape(lead + (1, n, d))
    elementwise = ag.square(left - right)
    return TensionMatrix(elementwise=elementwise, scalar=elementwise.mean(axis=-1))


def tension_to_weights(tension: TensionMatrix, tau: float,
                       mode: str = "elementwise") -> Tensor:
    """Attraction weights: softmax over j of -T/tau.

    In elementwise mode each feature dimension gets its own weight slice
    (shape ..., n, n, d, softmax over axis -2); in scalar mode one weight per
    pair is broadcast over dimensions (shape ..., n, n, 1).
    """
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    if mode == "elementwise":
        return ag.softmax(-tension.elementwise * (1.0 / tau), axis=-2)
    if mode == "scalar":
        w = ag.softmax(-tension.scalar * (1.0 / tau), axis=-1)
        return w.reshape(w.shape + (1,))
    raise ConfigurationError(f"unknown tension mode {mode!r}")


def evolve_step(features: Tensor, unit: EvolutionUnit, *,
                tension_mode: str = "elementwise",
                uniform_weights: bool = False) -> tuple[Tensor, TensionMatrix]:
    """One synchronous update f_i <- f_i + g(sum_j W_ij * f_j)."""
    S = ag.as_tensor(features)
    if S.shape[-1] != unit.g.dim_in:
        raise ConfigurationError(
            f"feature dim {S.shape[-1]} does not match transform dim {unit.g.dim_in}"
        )
    n, d = S.shape[-2], S.shape[-1]
    lead = S.shape[:-2]
    tension = compute_tension(S)
    if uniform_weights:
        weights = Tensor(np.full(lead + (n, n, 1), 1.0 / n))
    else:
        weights = tension_to_weights(tension, unit.tau, mode=tension_mode)
    aggregated = (weights * S.reshape(lead + (1, n, d))).sum(axis=-2)
    updated = S + unit.g(aggregated)
    return updated, tension


def evolve(space: FeatureSpace, unit: EvolutionUnit, *,
           tension_mode: str = "elementwise",
           uniform_weights: bool = False) -> EvolutionTrace:
    """Apply the update `iterations` times, recording every state."""
    state = ag.as_tensor(space.features)
    trace = EvolutionTrace(states=[state])
    for t in range(unit.iterations):
        state, tension = evolve_step(
            state, unit, tension_mode=tension_mode, uniform_weights=uniform_weights
        )
        if not np.all(np.isfinite(state.data)):
            raise NumericalError(f"non-finite features at evolution iteration {t}")
        trace.states.append(state)
        trace.tensions.append(tension)
    return trace


def conflict_indices(scalar_tension: np.ndarray) -> tuple[int, int]:
    """Off-diagonal argmax pair (i < j), ties broken lexicographically."""
    n = scalar_tension.shape[-1]
    if n < 2:
        raise DataError("need at least two features for a conflict pair")
    iu, ju = np.triu_indices(n, k=1)
    # row-major upper-triangle order is lexicographic; argmax takes the first max
    k = int(np.argmax(scalar_tension[iu, ju]))
    return int(iu[k]), int(ju[k])


def batched_conflict_indices(scalar_tension: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized conflict_indices over a (..., n, n) stack."""
    n = scalar_tension.shape[-1]
    if n < 2:
        raise DataError("need at least two features for a conflict pair")
    iu, ju = np.triu_indices(n, k=1)
    flat = scalar_tension.reshape(-1, n, n)[:, iu, ju]
    k = np.argmax(flat, axis=1)
    return iu[k], ju[k]


def extract_conflict(trace: EvolutionTrace) -> tuple[tuple[int, int], Tensor]:
    """Select the maximal-tension pair from T' and concatenate its features."""
    if not trace.tensions:
        raise DataError("trace has no tension matrices")
    i, j = conflict_indices(trace.final_tension.scalar.data)
    S = trace.final_state
    return (i, j), ag.concatenate([S[i], S[j]], axis=-1)


def extract_consensus(trace: EvolutionTrace) -> Tensor:
    """Arithmetic mean of the final-state features."""
    return trace.final_state.mean(axis=-2)


def standardize(g_std: Mlp, conflict: Tensor, consensus: Tensor) -> Tensor:
    """Evaluate the conflict relative to the consensus via one MLP."""
    joint = ag.concatenate([ag.as_tensor(conflict), ag.as_tensor(consensus)], axis=-1)
    if joint.shape[-1] != g_std.dim_in:
        raise ConfigurationError(
            f"standardizer expects input dim {g_std.dim_in}, got {joint.shape[-1]}"
        )
    return g_std(joint)

"""Singlet spin correlations, CHSH statistic, and canonical measurement settings.

Spin outcomes are modeled through their closed-form statistics: the two-spin
singlet correlation along axes ``a`` and ``b`` is ``-a.b``, and the joint
outcome distribution is the unique two-outcome law with uniform marginals
consistent with that correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12
CHSH_INPUT_TOL = 1e-9

# |S| <= 2 for every local model; the quantum maximum is 2*sqrt(2).
CHSH_CLASSICAL_BOUND = 2.0
CHSH_QUANTUM_BOUND = 2.0 * math.sqrt(2.0)

OUTCOME_PAIRS = ((+1, +1), (+1, -1), (-1, +1), (-1, -1))


@dataclass(frozen=True)
class Direction:
    """Unit measurement axis in three-dimensional space.

    The constructor rescales the input to unit length; a zero or non-finite
    vector is rejected.
    """

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(norm) or norm == 0.0:
            raise ValueError("direction must be a nonzero finite 3-vector")
        object.__setattr__(self, "x", float(self.x) / norm)
        object.__setattr__(self, "y", float(self.y) / norm)
        object.__setattr__(self, "z", float(self.z) / norm)

    @classmethod
    def from_plane_angle(cls, angle_deg: float) -> "Direction":
        """Direction at ``angle_deg`` from the z axis, in the x-z plane."""
        rad = math.radians(angle_deg)
        return cls(math.sin(rad), 0.0, math.cos(rad))

    def dot(self, other: "Direction") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class SettingSet:
    """Ordered measurement directions for Alice and Bob."""

    alice_directions: tuple[Direction, ...]
    bob_directions: tuple[Direction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alice_directions", tuple(self.alice_directions))
        object.__setattr__(self, "bob_directions", tuple(self.bob_directions))
        if not self.alice_directions or not self.bob_directions:
            raise ValueError("each party needs at least one measurement direction")
        for d in self.alice_directions + self.bob_directions:
            if not isinstance(d, Direction):
                raise TypeError(f"expected Direction, got {type(d).__name__}")

    @property
    def n_alice(self) -> int:
        return len(self.alice_directions)

    @property
    def n_bob(self) -> int:
        return len(self.bob_directions)

    def singlet_matrix(self) -> "CorrelationMatrix":
        """Correlation matrix -a_i.b_j predicted for the singlet state."""
        entries = np.array(
            [
                [singlet_correlation(a, b) for b in self.bob_directions]
                for a in self.alice_directions
            ]
        )
        return CorrelationMatrix(entries)


class CorrelationMatrix:
    """Two-party correlation values indexed by (Alice setting, Bob setting)."""

    def __init__(self, entries) -> None:
        arr = np.asarray(entries, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("correlation matrix must be a nonempty 2-d array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("correlation entries must be finite")
        if np.any(np.abs(arr) > 1.0 + UNIT_TOL):
            raise ValueError("correlation entries must lie in [-1, 1]")
        self._entries = arr
        self._entries.setflags(write=False)

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def shape(self) -> tuple[int, int]:
        return self._entries.shape

    def entry(self, i: int, j: int) -> float:
        return float(self._entries[i, j])

    def scaled(self, factor: float) -> "CorrelationMatrix":
        return CorrelationMatrix(self._entries * factor)

    def __repr__(self) -> str:
        return f"CorrelationMatrix({self._entries.tolist()!r})"


def singlet_correlation(a: Direction, b: Direction) -> float:
    """Expectation of the product of spin outcomes along ``a`` and ``b``."""
    return -a.dot(b)


def singlet_joint_distribution(a: Direction, b: Direction) -> dict[tuple[int, int], float]:
    """Joint outcome probabilities p(s_A, s_B) = (1 - s_A*s_B*(a.b)) / 4.

    This is the unique two-outcome distribution with uniform single-party
    marginals whose correlation equals ``singlet_correlation(a, b)``.
    """
    ab = a.dot(b)
    return {(sa, sb): (1.0 - sa * sb * ab) / 4.0 for sa, sb in OUTCOME_PAIRS}


def sample_singlet_outcomes(a: Direction, b: Direction, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one (s_A, s_B) pair from the singlet joint distribution."""
    dist = singlet_joint_distribution(a, b)
    u = rng.random()
    acc = 0.0
    for pair in OUTCOME_PAIRS:
        acc += dist[pair]
        if u < acc:
            return pair
    return OUTCOME_PAIRS[-1]


def chsh_statistic(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> float:
    """CHSH combination S = E(a,b) - E(a,b') + E(a',b) + E(a',b')."""
    for name, value in (("e_ab", e_ab), ("e_abp", e_abp), ("e_apb", e_apb), ("e_apbp", e_apbp)):
        if not math.isfinite(value) or abs(value) > 1.0 + CHSH_INPUT_TOL:
            raise ValueError(f"{name}={value!r} is not a correlation in [-1, 1]")
    return e_ab - e_abp + e_apb + e_apbp


def tsirelson_settings() -> SettingSet:
    """The 2x2 settings attaining the quantum CHSH maximum.

    Coplanar axes at 0 and 90 degrees (Alice) and 45 and 135 degrees (Bob):
    the four pairwise dot products are +-sqrt(2)/2 and the singlet CHSH value
    is -2*sqrt(2).
    """
    return SettingSet(
        alice_directions=(Direction.from_plane_angle(0.0), Direction.from_plane_angle(90.0)),
        bob_directions=(Direction.from_plane_angle(45.0), Direction.from_plane_angle(135.0)),
    )


def ekert_settings() -> SettingSet:
    """The 3x3 settings of the full key-distribution protocol.

    Alice measures at 0, 45, 90 degrees and Bob at 45, 90, 135 degrees in a
    common plane.  The sub-block Alice {0, 90} x Bob {45, 135} coincides with
    ``tsirelson_settings()`` and drives the eavesdropper test, while the
    parallel pairs (45, 45) and (90, 90) produce perfectly anti-correlated
    outcomes for key generation.
    """
    return SettingSet(
        alice_directions=tuple(Direction.from_plane_angle(t) for t in (0.0, 45.0, 90.0)),
        bob_directions=tuple(Direction.from_plane_angle(t) for t in (45.0, 90.0, 135.0)),
    )

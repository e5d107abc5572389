"""Deterministic local strategies, local-polytope feasibility, and eavesdropper programs.

An eavesdropper who controls the source can try to reproduce a target
correlation matrix with a probability mixture over deterministic local
strategies: independent per-setting output tables for Alice and Bob.  Whether
a target lies inside the convex hull of those strategies (the local polytope)
is an exact linear-programming question.  A feasible answer comes with the
forging mixture itself; an infeasible answer comes with a separating
Bell-type certificate extracted from the LP dual and re-verified against
every enumerated strategy.

The outcome alphabet is either {+1, -1} or {+1, -1, 0}, with 0 modeling an
undetected trial; the 0-augmented alphabet supports an optional constraint
pinning the coincidence probability of every setting pair.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .simplex import SimplexDiagnosticError, find_feasible
from .spin import CorrelationMatrix, Direction, SettingSet

LpDiagnosticError = SimplexDiagnosticError

WEIGHT_TOL = 1e-9
RESIDUAL_TOL = 1e-7
CERTIFICATE_MARGIN = 1e-9
MAX_SETTINGS_PER_PARTY = 4
BISECTION_TOL = 1e-6


class Alphabet(enum.Enum):
    """Allowed per-setting outputs of a deterministic strategy."""

    PLUS_MINUS = (+1, -1)
    PLUS_MINUS_NULL = (+1, -1, 0)

    @property
    def values(self) -> tuple[int, ...]:
        return self.value


@dataclass(frozen=True)
class DeterministicStrategy:
    """One hidden-variable value: fixed outputs for every setting of each party."""

    alice_outputs: tuple[int, ...]
    bob_outputs: tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self) -> None:
        object.__setattr__(self, "alice_outputs", tuple(int(v) for v in self.alice_outputs))
        object.__setattr__(self, "bob_outputs", tuple(int(v) for v in self.bob_outputs))
        allowed = set(self.alphabet.values)
        if not self.alice_outputs or not self.bob_outputs:
            raise ValueError("strategies need at least one output per party")
        for v in self.alice_outputs + self.bob_outputs:
            if v not in allowed:
                raise ValueError(f"output {v} not in alphabet {self.alphabet.name}")

    def correlation_matrix(self) -> np.ndarray:
        a = np.array(self.alice_outputs, dtype=float)
        b = np.array(self.bob_outputs, dtype=float)
        return np.outer(a, b)

    def coincidence_matrix(self) -> np.ndarray:
        a = np.array(self.alice_outputs) != 0
        b = np.array(self.bob_outputs) != 0
        return np.outer(a, b).astype(float)


def enumerate_strategies(n_alice: int, n_bob: int, alphabet: Alphabet) -> list[DeterministicStrategy]:
    """All deterministic strategies: |alphabet|^n_alice * |alphabet|^n_bob of them."""
    for name, n in (("n_alice", n_alice), ("n_bob", n_bob)):
        if not 1 <= n <= MAX_SETTINGS_PER_PARTY:
            raise ValueError(f"{name}={n} outside [1, {MAX_SETTINGS_PER_PARTY}]")
    values = alphabet.values
    return [
        DeterministicStrategy(a_out, b_out, alphabet)
        for a_out in itertools.product(values, repeat=n_alice)
        for b_out in itertools.product(values, repeat=n_bob)
    ]


class StrategyMixture:
    """A probability measure over deterministic strategies: Eve's forging program."""

    def __init__(self, strategies, weights) -> None:
        strategies = tuple(strategies)
        weights = np.asarray(weights, dtype=float)
        if len(strategies) == 0 or weights.shape != (len(strategies),):
            raise ValueError("need one weight per strategy, at least one strategy")
        first = strategies[0]
        for s in strategies:
            if (
                len(s.alice_outputs) != len(first.alice_outputs)
                or len(s.bob_outputs) != len(first.bob_outputs)
                or s.alphabet is not first.alphabet
            ):
                raise ValueError("mixture strategies must share shape and alphabet")
        if np.any(weights < -WEIGHT_TOL):
            raise ValueError("mixture weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"mixture weights sum to {total}, expected 1")
        self.strategies = strategies
        self.weights = np.clip(weights, 0.0, None)
        self.weights.setflags(write=False)
        self._cumulative = np.cumsum(self.weights)

    @property
    def n_alice(self) -> int:
        return len(self.strategies[0].alice_outputs)

    @property
    def n_bob(self) -> int:
        return len(self.strategies[0].bob_outputs)

    def correlation_matrix(self) -> np.ndarray:
        out = np.zeros((self.n_alice, self.n_bob))
        for w, s in zip(self.weights, self.strategies):
            out += w * s.correlation_matrix()
        return out

    def coincidence_matrix(self) -> np.ndarray:
        out = np.zeros((self.n_alice, self.n_bob))
        for w, s in zip(self.weights, self.strategies):
            out += w * s.coincidence_matrix()
        return out

    def draw_strategy(self, rng: np.random.Generator) -> DeterministicStrategy:
        k = int(np.searchsorted(self._cumulative, rng.random(), side="right"))
        return self.strategies[min(k, len(self.strategies) - 1)]


def sample_forged_outcomes(
    mixture: StrategyMixture, i: int, j: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Draw a hidden variable from the mixture and emit both parties' outputs."""
    if not (0 <= i < mixture.n_alice and 0 <= j < mixture.n_bob):
        raise IndexError(f"setting pair ({i}, {j}) out of range")
    strategy = mixture.draw_strategy(rng)
    return strategy.alice_outputs[i], strategy.bob_outputs[j]


@dataclass(frozen=True)
class BellCertificate:
    """Separating hyperplane: a Bell-type inequality every local model satisfies.

    ``evaluate(correlations, coincidences)`` stays at or below ``bound`` for
    every strategy mixture, while the targets that produced this certificate
    reach ``target_value`` > bound.  Coefficients are scaled so the largest
    magnitude is 1; ``bound`` is the exact maximum over all enumerated
    strategies, recomputed primally after the dual extraction.
    """

    coefficients: np.ndarray
    rate_coefficients: np.ndarray | None
    bound: float
    target_value: float

    @property
    def violation(self) -> float:
        return self.target_value - self.bound

    def evaluate(self, correlations: np.ndarray, coincidences: np.ndarray | None = None) -> float:
        total = float(np.sum(self.coefficients * np.asarray(correlations, dtype=float)))
        if self.rate_coefficients is not None:
            if coincidences is None:
                raise ValueError("certificate has rate terms; coincidence matrix required")
            total += float(np.sum(self.rate_coefficients * np.asarray(coincidences, dtype=float)))
        return total


@dataclass(frozen=True)
class Feasible:
    mixture: StrategyMixture
    max_residual: float


@dataclass(frozen=True)
class Infeasible:
    certificate: BellCertificate


FeasibilityResult = Feasible | Infeasible


def _target_entries(targets) -> np.ndarray:
    if isinstance(targets, CorrelationMatrix):
        return targets.entries
    return CorrelationMatrix(np.asarray(targets, dtype=float)).entries


def lhv_feasibility(
    targets,
    settings: SettingSet,
    alphabet: Alphabet,
    rate_constraint: float | None = None,
) -> FeasibilityResult:
    """Decide whether the target correlations admit a local strategy mixture.

    Builds the exact phase-1 LP over mixture weights: one equality row per
    correlation entry, one per coincidence entry when ``rate_constraint`` is
    given, plus normalization.  Numerical failure inside the solver raises
    LpDiagnosticError and is never reported as Infeasible.
    """
    t_matrix = _target_entries(targets)
    n_alice, n_bob = settings.n_alice, settings.n_bob
    if t_matrix.shape != (n_alice, n_bob):
        raise ValueError(
            f"targets shape {t_matrix.shape} does not match settings {(n_alice, n_bob)}"
        )
    if rate_constraint is not None:
        if alphabet is not Alphabet.PLUS_MINUS_NULL:
            raise ValueError("rate constraints need the 0-augmented alphabet")
        if not 0.0 <= rate_constraint <= 1.0:
            raise ValueError("coincidence rate must lie in [0, 1]")

    strategies = enumerate_strategies(n_alice, n_bob, alphabet)
    corr_cols = np.column_stack([s.correlation_matrix().ravel() for s in strategies])
    rows = [corr_cols]
    rhs = [t_matrix.ravel()]
    if rate_constraint is not None:
        rows.append(np.column_stack([s.coincidence_matrix().ravel() for s in strategies]))
        rhs.append(np.full(n_alice * n_bob, rate_constraint))
    rows.append(np.ones((1, len(strategies))))
    rhs.append(np.array([1.0]))
    M = np.vstack(rows)
    t = np.concatenate(rhs)

    result = find_feasible(M, t)

    if result.status == "optimal":
        return _build_feasible(strategies, result.x, M, t)
    if result.status == "infeasible":
        return _build_infeasible(
            strategies, result.y, n_alice, n_bob, t_matrix, rate_constraint
        )
    raise LpDiagnosticError(f"unexpected LP status {result.status!r} in feasibility problem")


def _build_feasible(strategies, weights, M, t) -> Feasible:
    keep = weights > 1e-12
    if not np.any(keep):
        keep = weights == weights.max()
    kept_weights = weights[keep]
    kept_weights = kept_weights / kept_weights.sum()
    mixture = StrategyMixture(
        [s for s, k in zip(strategies, keep) if k],
        kept_weights,
    )
    full = np.zeros(len(strategies))
    full[keep] = kept_weights
    residual = float(np.max(np.abs(M @ full - t)))
    if residual > RESIDUAL_TOL:
        raise LpDiagnosticError(
            f"feasible basis reproduces targets only to {residual:.2e} (> {RESIDUAL_TOL})"
        )
    return Feasible(mixture=mixture, max_residual=residual)


def _build_infeasible(
    strategies, y, n_alice, n_bob, t_matrix, rate_constraint
) -> Infeasible:
    n_corr = n_alice * n_bob
    coeff = y[:n_corr].reshape(n_alice, n_bob).copy()
    rate_coeff = None
    if rate_constraint is not None:
        rate_coeff = y[n_corr : 2 * n_corr].reshape(n_alice, n_bob).copy()

    scale = float(np.max(np.abs(coeff)))
    if rate_coeff is not None:
        scale = max(scale, float(np.max(np.abs(rate_coeff))))
    if scale <= 0.0:
        raise LpDiagnosticError("degenerate separating direction (all-zero coefficients)")
    coeff /= scale
    if rate_coeff is not None:
        rate_coeff /= scale

    # Primal re-verification: the reported bound is the exact strategy maximum.
    values = []
    for s in strategies:
        v = float(np.sum(coeff * s.correlation_matrix()))
        if rate_coeff is not None:
            v += float(np.sum(rate_coeff * s.coincidence_matrix()))
        values.append(v)
    bound = max(values)

    target_value = float(np.sum(coeff * t_matrix))
    if rate_coeff is not None:
        target_value += float(np.sum(rate_coeff) * rate_constraint)

    if target_value - bound <= CERTIFICATE_MARGIN:
        raise LpDiagnosticError(
            f"separating direction failed primal verification "
            f"(target {target_value:.6g} vs bound {bound:.6g})"
        )
    coeff.setflags(write=False)
    if rate_coeff is not None:
        rate_coeff.setflags(write=False)
    return Infeasible(
        BellCertificate(
            coefficients=coeff,
            rate_coefficients=rate_coeff,
            bound=bound,
            target_value=target_value,
        )
    )


def max_forgeable_scale(
    settings: SettingSet,
    alphabet: Alphabet,
    rate_constraint: float | None = None,
    tol: float = BISECTION_TOL,
) -> float:
    """Largest v in [0, 1] for which v times the singlet correlations is forgeable.

    Bisection on lhv_feasibility, exploiting that feasibility is monotone in v
    (the local polytope is convex and contains the zero matrix).
    """
    spin_matrix = settings.singlet_matrix().entries

    def feasible(v: float) -> bool:
        return isinstance(
            lhv_feasibility(CorrelationMatrix(v * spin_matrix), settings, alphabet, rate_constraint),
            Feasible,
        )

    if feasible(1.0):
        return 1.0
    if not feasible(0.0):
        raise LpDiagnosticError("zero correlations reported infeasible; solver is inconsistent")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            assert mid > lo  # monotone shrink, anchored at a feasible point
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class InterceptResendDraw:
    """One intercept-resend trial with Eve's full private record."""

    alice_outcome: int
    bob_outcome: int
    eve_axis: tuple[float, float, float]
    eve_sign: int
    eve_alice_guess: int
    eve_bob_guess: int
    deterministic: bool


def random_unit_vector(rng: np.random.Generator) -> tuple[float, float, float]:
    """Uniform direction on the sphere (cos-polar / azimuth construction)."""
    z = 2.0 * rng.random() - 1.0
    phi = 2.0 * math.pi * rng.random()
    r = math.sqrt(max(0.0, 1.0 - z * z))
    return (r * math.cos(phi), r * math.sin(phi), z)


def intercept_resend_trial(a: Direction, b: Direction, rng: np.random.Generator) -> InterceptResendDraw:
    """Eve measures along a random axis and forwards freshly prepared spins.

    She draws a uniform axis e and a fair sign s, sends spin state s*e toward
    Alice and -s*e toward Bob; each party's outcome is then +-1 with
    expectation s*(a.e) and -s*(b.e) respectively, independently.
    """
    e = random_unit_vector(rng)
    s = 1 if rng.random() < 0.5 else -1
    ae = a.x * e[0] + a.y * e[1] + a.z * e[2]
    be = b.x * e[0] + b.y * e[1] + b.z * e[2]
    alice = 1 if rng.random() < 0.5 * (1.0 + s * ae) else -1
    bob = 1 if rng.random() < 0.5 * (1.0 - s * be) else -1
    return InterceptResendDraw(
        alice_outcome=alice,
        bob_outcome=bob,
        eve_axis=e,
        eve_sign=s,
        eve_alice_guess=s if ae >= 0.0 else -s,
        eve_bob_guess=-s if be >= 0.0 else s,
        deterministic=bool(abs(ae) >= 1.0 - 1e-12 and abs(be) >= 1.0 - 1e-12),
    )


def intercept_resend_outcomes(a: Direction, b: Direction, rng: np.random.Generator) -> tuple[int, int]:
    draw = intercept_resend_trial(a, b, rng)
    return draw.alice_outcome, draw.bob_outcome


def intercept_resend_correlation(a: Direction, b: Direction) -> float:
    """Closed form for the attack: averaging (a.e)(b.e) over the sphere gives (a.b)/3."""
    return -a.dot(b) / 3.0

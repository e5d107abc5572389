"""End-to-end entanglement-based key distribution sessions.

A session pumps singlet pairs through a channel (honest, intercept-resend, or
a local-strategy forge), lets both parties pick settings at random, sifts the
announced settings into a CHSH-test group and a same-direction key group,
estimates the CHSH statistic with standard errors, extracts the key with its
error rate, and issues a security decision.

Detectors are spatially localized: each side registers a click only with its
single-particle region mass (g_alice, g_bob), so raw correlations are scaled
by g = g_alice * g_bob while coincidence-conditioned ones are not.  That gap
is the whole game: the raw CHSH statistic loses its discriminating power once
g drops to 1/sqrt(2), and post-selecting on coincidences reopens the
detection loophole an eavesdropper can exploit.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lhv import (
    Alphabet,
    BellCertificate,
    Feasible,
    StrategyMixture,
    lhv_feasibility,
)
from .spatial import (
    DEFAULT_QUADRATURE_ORDER,
    Box,
    Detectability,
    GaussianPacket,
    GEstimate,
    Region,
    clamp01,
    classify_detectability,
    region_mass,
)
from .spin import CorrelationMatrix, SettingSet

TRIAL_CHUNK = 4096
MIN_TRIALS_PER_PAIR = 100
PARALLEL_TOL = 1e-9
CHSH_SIGNS = (1, -1, 1, 1)


class Analysis(enum.Enum):
    RAW = "raw"
    POST_SELECTED = "post_selected"


class ChannelKind(enum.Enum):
    HONEST = "honest"
    INTERCEPT_RESEND = "intercept_resend"
    LHV_FORGE = "lhv_forge"


class Decision(enum.Enum):
    SECURE_ACCEPT = "secure_accept"
    EVE_DETECTED = "eve_detected"
    INCONCLUSIVE = "inconclusive"


class NoKeyMaterialError(RuntimeError):
    """The key group has no coincident trials to turn into bits."""


class ForgeInfeasibleError(RuntimeError):
    """The requested forge target lies outside the local polytope."""

    def __init__(self, g: float, certificate: BellCertificate) -> None:
        super().__init__(
            f"no local strategy mixture reproduces the scaled correlations at g={g:.6g}; "
            f"the separating inequality is violated by {certificate.violation:.3g}"
        )
        self.g = g
        self.certificate = certificate


@dataclass(frozen=True)
class DecisionPolicy:
    """Security test: compare |S| against the bound with a z-sigma buffer."""

    bound: float = 2.0
    z: float = 3.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.bound) and self.bound > 0.0):
            raise ValueError("bound must be positive and finite")
        if not (math.isfinite(self.z) and self.z >= 0.0):
            raise ValueError("z must be nonnegative and finite")


@dataclass(frozen=True)
class SourceSpec:
    """Physical source description: the packet plus both detector regions.

    ``eve_region`` is an extension point for modeling where an eavesdropper
    could sit; it is currently accepted, ignored, and flagged in run notes.
    """

    packet: GaussianPacket
    region_a: Region
    region_b: Region
    eve_region: Region | None = None


@dataclass(frozen=True)
class SessionConfig:
    settings: SettingSet
    channel: ChannelKind
    analysis: Analysis
    n_pairs: int
    seed: int
    source: SourceSpec | None = None
    g_override: float | None = None
    rate_monitoring: bool = False
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER

    def __post_init__(self) -> None:
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if (self.source is None) == (self.g_override is None):
            raise ValueError("exactly one of source and g_override must be given")
        if self.g_override is not None and not 0.0 <= self.g_override <= 1.0:
            raise ValueError("g_override must lie in [0, 1]")
        if self.quadrature_order < 4:
            raise ValueError("quadrature_order must be >= 4")


@dataclass(frozen=True)
class EveRecord:
    """What the eavesdropper privately knows about one trial's outcomes."""

    alice_outcome: int
    bob_outcome: int
    deterministic: bool


@dataclass(frozen=True)
class TrialRecord:
    index: int
    alice_setting: int
    bob_setting: int
    alice_outcome: int
    bob_outcome: int
    eve: EveRecord | None = None


@dataclass(frozen=True)
class ChshBlock:
    """Ordered 2x2 sub-block of settings feeding the CHSH combination.

    The statistic is E[a,b] - E[a,b'] + E[a',b] + E[a',b'] with
    (a, a') = alice_indices and (b, b') = bob_indices.
    """

    alice_indices: tuple[int, int]
    bob_indices: tuple[int, int]

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        (ia, iap), (jb, jbp) = self.alice_indices, self.bob_indices
        return ((ia, jb), (ia, jbp), (iap, jb), (iap, jbp))

    def spin_value(self, settings: SettingSet) -> float:
        e = settings.singlet_matrix().entries
        return float(sum(s * e[i, j] for s, (i, j) in zip(CHSH_SIGNS, self.pairs)))


@dataclass(frozen=True)
class PairClassification:
    key_pairs: tuple[tuple[int, int], ...]
    chsh_block: ChshBlock | None
    discarded_pairs: tuple[tuple[int, int], ...]


def classify_pairs(settings: SettingSet) -> PairClassification:
    """Partition setting pairs into the CHSH block, key pairs, and discards.

    The CHSH block is the ordered 2x2 sub-block maximizing |S| under the
    singlet prediction (ties broken lexicographically); key pairs are the
    same-direction pairs not claimed by the block.
    """
    e = settings.singlet_matrix().entries
    block = None
    if settings.n_alice >= 2 and settings.n_bob >= 2:
        best = None
        for ia, iap in itertools.permutations(range(settings.n_alice), 2):
            for jb, jbp in itertools.permutations(range(settings.n_bob), 2):
                s = e[ia, jb] - e[ia, jbp] + e[iap, jb] + e[iap, jbp]
                key = (-abs(s), ia, iap, jb, jbp)
                if best is None or key < best[0]:
                    best = (key, ChshBlock((ia, iap), (jb, jbp)))
        block = best[1]

    block_pairs = set(block.pairs) if block is not None else set()
    key_pairs = []
    discarded = []
    for i, a in enumerate(settings.alice_directions):
        for j, b in enumerate(settings.bob_directions):
            if (i, j) in block_pairs:
                continue
            if a.dot(b) >= 1.0 - PARALLEL_TOL:
                key_pairs.append((i, j))
            else:
                discarded.append((i, j))
    return PairClassification(tuple(key_pairs), block, tuple(discarded))


class HonestChannel:
    """Singlet source with independent per-side detection.

    Spin outcomes follow the singlet joint distribution for the chosen
    settings; each side's click is an independent Bernoulli draw with its
    region mass, so E[A*B] = g_alice * g_bob * (-a.b) over raw trials.
    """

    kind = ChannelKind.HONEST

    def __init__(self, settings: SettingSet, g_alice: float, g_bob: float) -> None:
        self.settings = settings
        self.g_alice = float(g_alice)
        self.g_bob = float(g_bob)
        self._dots = np.array(
            [[a.dot(b) for b in settings.bob_directions] for a in settings.alice_directions]
        )

    def simulate_batch(self, ii, jj, rng):
        m = ii.shape[0]
        u = rng.random((m, 4))
        d = self._dots[ii, jj]
        a_out = np.where(u[:, 0] < 0.5, 1, -1)
        b_out = np.where(u[:, 1] < 0.5 * (1.0 - d), a_out, -a_out)
        alice = np.where(u[:, 2] < self.g_alice, a_out, 0)
        bob = np.where(u[:, 3] < self.g_bob, b_out, 0)
        return alice, bob, None

    def simulate(self, i: int, j: int, rng) -> tuple[int, int, EveRecord | None]:
        a, b, _ = self.simulate_batch(np.array([i]), np.array([j]), rng)
        return int(a[0]), int(b[0]), None


class InterceptResendChannel:
    """Eve measures every pair along a fresh random axis and resends.

    Particle 1 is projected along a uniform axis e (outcome s); Alice then
    receives spin state s*e and Bob -s*e, so their outcomes have expectations
    s*(a.e) and -s*(b.e), independently.  Averaged over e this dilutes the
    correlation to -(a.b)/3.  Detection masking applies unchanged.
    """

    kind = ChannelKind.INTERCEPT_RESEND

    def __init__(self, settings: SettingSet, g_alice: float, g_bob: float) -> None:
        self.settings = settings
        self.g_alice = float(g_alice)
        self.g_bob = float(g_bob)
        self._a_dirs = np.array([d.as_array() for d in settings.alice_directions])
        self._b_dirs = np.array([d.as_array() for d in settings.bob_directions])

    def simulate_batch(self, ii, jj, rng):
        m = ii.shape[0]
        u = rng.random((m, 7))
        z = 2.0 * u[:, 0] - 1.0
        phi = 2.0 * math.pi * u[:, 1]
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        e = np.column_stack((rho * np.cos(phi), rho * np.sin(phi), z))
        s = np.where(u[:, 2] < 0.5, 1, -1)
        ae = np.einsum("ij,ij->i", self._a_dirs[ii], e)
        be = np.einsum("ij,ij->i", self._b_dirs[jj], e)
        a_out = np.where(u[:, 3] < 0.5 * (1.0 + s * ae), 1, -1)
        b_out = np.where(u[:, 4] < 0.5 * (1.0 - s * be), 1, -1)
        alice = np.where(u[:, 5] < self.g_alice, a_out, 0)
        bob = np.where(u[:, 6] < self.g_bob, b_out, 0)
        guess_a = np.where(ae >= 0.0, s, -s)
        guess_b = np.where(be >= 0.0, -s, s)
        det = (np.abs(ae) >= 1.0 - 1e-12) & (np.abs(be) >= 1.0 - 1e-12)
        eve = [
            EveRecord(int(guess_a[k]), int(guess_b[k]), bool(det[k]))
            for k in range(m)
        ]
        return alice, bob, eve

    def simulate(self, i: int, j: int, rng) -> tuple[int, int, EveRecord | None]:
        a, b, eve = self.simulate_batch(np.array([i]), np.array([j]), rng)
        return int(a[0]), int(b[0]), eve[0]


class LhvForgeChannel:
    """Eve replaces the source with a local deterministic-strategy program.

    CHSH-block pairs are drawn from a mixture solving the feasibility problem
    for the scaled targets g * E_spin (with the coincidence rate additionally
    pinned to g when rate monitoring is on).  Key pairs are emitted as
    perfectly anti-correlated coincidences with rate g, and remaining pairs
    as rate-g coincidences matching the singlet conditional correlation, so
    every raw correlation and coincidence rate reproduces the honest
    channel's.  Eve records every outcome she fabricates.
    """

    kind = ChannelKind.LHV_FORGE

    def __init__(
        self,
        settings: SettingSet,
        g: float,
        classification: PairClassification,
        rate_monitoring: bool,
    ) -> None:
        if classification.chsh_block is None:
            raise ValueError("forging needs at least two settings per party")
        self.settings = settings
        self.g = float(g)
        self.block = classification.chsh_block
        (ia, iap), (jb, jbp) = self.block.alice_indices, self.block.bob_indices
        block_settings = SettingSet(
            (settings.alice_directions[ia], settings.alice_directions[iap]),
            (settings.bob_directions[jb], settings.bob_directions[jbp]),
        )
        targets = CorrelationMatrix(self.g * block_settings.singlet_matrix().entries)
        alphabet = Alphabet.PLUS_MINUS_NULL if rate_monitoring else Alphabet.PLUS_MINUS
        rate = self.g if rate_monitoring else None
        result = lhv_feasibility(targets, block_settings, alphabet, rate)
        if not isinstance(result, Feasible):
            raise ForgeInfeasibleError(self.g, result.certificate)
        self.mixture: StrategyMixture = result.mixture

        self._alice_table = np.array([s.alice_outputs for s in self.mixture.strategies])
        self._bob_table = np.array([s.bob_outputs for s in self.mixture.strategies])
        self._cum = np.cumsum(self.mixture.weights)
        self._pos_a = np.full(settings.n_alice, -1)
        self._pos_a[ia], self._pos_a[iap] = 0, 1
        self._pos_b = np.full(settings.n_bob, -1)
        self._pos_b[jb], self._pos_b[jbp] = 0, 1
        in_block = np.zeros((settings.n_alice, settings.n_bob), dtype=bool)
        for i, j in self.block.pairs:
            in_block[i, j] = True
        self._in_block = in_block
        self._cond = settings.singlet_matrix().entries

    def simulate_batch(self, ii, jj, rng):
        m = ii.shape[0]
        u = rng.random((m, 4))
        alice = np.zeros(m, dtype=int)
        bob = np.zeros(m, dtype=int)

        on_block = self._in_block[ii, jj]
        if np.any(on_block):
            k = np.searchsorted(self._cum, u[on_block, 0], side="right")
            k = np.minimum(k, len(self.mixture.strategies) - 1)
            alice[on_block] = self._alice_table[k, self._pos_a[ii[on_block]]]
            bob[on_block] = self._bob_table[k, self._pos_b[jj[on_block]]]

        off = ~on_block
        if np.any(off):
            coincide = u[off, 0] < self.g
            a_out = np.where(u[off, 1] < 0.5, 1, -1)
            cond = self._cond[ii[off], jj[off]]
            aligned = u[off, 2] < np.abs(cond)
            b_corr = np.where(cond >= 0.0, a_out, -a_out)
            b_ind = np.where(u[off, 3] < 0.5, 1, -1)
            b_out = np.where(aligned, b_corr, b_ind)
            alice[off] = np.where(coincide, a_out, 0)
            bob[off] = np.where(coincide, b_out, 0)

        eve = [EveRecord(int(alice[k]), int(bob[k]), True) for k in range(m)]
        return alice, bob, eve

    def simulate(self, i: int, j: int, rng) -> tuple[int, int, EveRecord | None]:
        a, b, eve = self.simulate_batch(np.array([i]), np.array([j]), rng)
        return int(a[0]), int(b[0]), eve[0]


Channel = HonestChannel | InterceptResendChannel | LhvForgeChannel


def build_channel(
    kind: ChannelKind,
    settings: SettingSet,
    g: float,
    g_alice: float,
    g_bob: float,
    classification: PairClassification,
    rate_monitoring: bool,
) -> Channel:
    if kind is ChannelKind.HONEST:
        return HonestChannel(settings, g_alice, g_bob)
    if kind is ChannelKind.INTERCEPT_RESEND:
        return InterceptResendChannel(settings, g_alice, g_bob)
    if kind is ChannelKind.LHV_FORGE:
        # Eve runs the source herself: the per-side masses are replaced by her
        # program, which imitates the honest coincidence statistics at g.
        return LhvForgeChannel(settings, g, classification, rate_monitoring)
    raise ValueError(f"unknown channel kind {kind!r}")


def simulate_trial(channel: Channel, i: int, j: int, rng, index: int = 0) -> TrialRecord:
    """Run one pair through the channel at the given settings."""
    if not (0 <= i < channel.settings.n_alice and 0 <= j < channel.settings.n_bob):
        raise IndexError(f"setting pair ({i}, {j}) out of range")
    a, b, eve = channel.simulate(i, j, rng)
    return TrialRecord(index, i, j, a, b, eve)


@dataclass
class SiftResult:
    chsh_group: dict[tuple[int, int], list[TrialRecord]]
    key_group: list[TrialRecord]
    discarded: list[TrialRecord]


def sift(records, settings: SettingSet) -> SiftResult:
    """Split announced settings into CHSH-test pairs, key pairs, and discards."""
    classification = classify_pairs(settings)
    chsh_pairs = set(classification.chsh_block.pairs) if classification.chsh_block else set()
    key_pairs = set(classification.key_pairs)
    chsh_group: dict[tuple[int, int], list[TrialRecord]] = {p: [] for p in chsh_pairs}
    key_group: list[TrialRecord] = []
    discarded: list[TrialRecord] = []
    for r in records:
        pair = (r.alice_setting, r.bob_setting)
        if pair in chsh_pairs:
            chsh_group[pair].append(r)
        elif pair in key_pairs:
            key_group.append(r)
        else:
            discarded.append(r)
    return SiftResult(chsh_group, key_group, discarded)


@dataclass(frozen=True)
class PairEstimate:
    alice_setting: int
    bob_setting: int
    sign: int
    n_included: int
    n_coincident: int
    correlation: float
    std_error: float


@dataclass(frozen=True)
class ChshEstimate:
    s: float
    std_error: float
    analysis: Analysis
    pairs: tuple[PairEstimate, ...]
    sufficient: bool


def _pair_products(records) -> tuple[np.ndarray, np.ndarray]:
    a = np.fromiter((r.alice_outcome for r in records), dtype=float, count=len(records))
    b = np.fromiter((r.bob_outcome for r in records), dtype=float, count=len(records))
    return a * b, (a != 0.0) & (b != 0.0)


def estimate_chsh(
    chsh_group: dict[tuple[int, int], list[TrialRecord]],
    analysis: Analysis,
    block: ChshBlock,
) -> ChshEstimate:
    """CHSH statistic with uncorrelated error propagation over the four pairs.

    Raw analysis averages A*B over every trial (no-clicks contribute 0);
    post-selected analysis restricts to coincidences.  A pair with no
    coincidences at all carries an infinite standard error: the data fix the
    correlation scale not at all, and the session ends Inconclusive rather
    than mistaking silence for classicality.
    """
    pair_estimates = []
    sufficient = True
    for sign, pair in zip(CHSH_SIGNS, block.pairs):
        records = chsh_group.get(pair, [])
        products, coincident = _pair_products(records)
        n_coincident = int(np.count_nonzero(coincident))
        if analysis is Analysis.POST_SELECTED:
            products = products[coincident]
        n = products.size
        if n < MIN_TRIALS_PER_PAIR:
            sufficient = False
        if n == 0:
            corr, se = 0.0, math.inf
        else:
            corr = float(np.mean(products))
            if n_coincident == 0:
                se = math.inf
            elif n > 1:
                se = float(np.std(products, ddof=1) / math.sqrt(n))
            else:
                se = math.inf
        pair_estimates.append(
            PairEstimate(pair[0], pair[1], sign, n, n_coincident, corr, se)
        )
    s = float(sum(p.sign * p.correlation for p in pair_estimates))
    variance = sum(p.std_error**2 for p in pair_estimates)
    std_error = math.sqrt(variance) if math.isfinite(variance) else math.inf
    return ChshEstimate(s, std_error, analysis, tuple(pair_estimates), sufficient)


@dataclass(frozen=True)
class KeyResult:
    alice_bits: str
    bob_bits: str
    qber: float
    eve_knowledge_fraction: float
    n_retained: int
    n_dropped: int


def extract_key(key_group) -> KeyResult:
    """Turn coincident same-direction trials into bits; Bob flips his outcome.

    The singlet anti-correlates equal settings, so Bob encodes -B while Alice
    encodes A; the mismatch fraction is the error rate.  Eve is credited with
    a key bit when her record determines both outcomes.
    """
    retained = [r for r in key_group if r.alice_outcome != 0 and r.bob_outcome != 0]
    if not retained:
        raise NoKeyMaterialError("no coincident trials in the key group")
    alice_bits = "".join("1" if r.alice_outcome > 0 else "0" for r in retained)
    bob_bits = "".join("1" if -r.bob_outcome > 0 else "0" for r in retained)
    mismatches = sum(1 for x, y in zip(alice_bits, bob_bits) if x != y)
    known = sum(1 for r in retained if r.eve is not None and r.eve.deterministic)
    return KeyResult(
        alice_bits=alice_bits,
        bob_bits=bob_bits,
        qber=mismatches / len(retained),
        eve_knowledge_fraction=known / len(retained),
        n_retained=len(retained),
        n_dropped=len(key_group) - len(retained),
    )


def decide_security(s: float, std_error: float, policy: DecisionPolicy | None = None) -> Decision:
    """Three-way verdict with a z-sigma buffer around the classical bound."""
    policy = policy or DecisionPolicy()
    if math.isnan(s) or math.isnan(std_error):
        return Decision.INCONCLUSIVE
    if abs(s) - policy.z * std_error > policy.bound:
        return Decision.SECURE_ACCEPT
    if abs(s) + policy.z * std_error < policy.bound:
        return Decision.EVE_DETECTED
    return Decision.INCONCLUSIVE


@dataclass(frozen=True)
class PairStat:
    alice_setting: int
    bob_setting: int
    group: str
    n_trials: int
    n_coincident: int
    raw_correlation: float
    post_selected_correlation: float | None


@dataclass(frozen=True)
class RunReport:
    config: SessionConfig
    g_used: float
    g_alice: float
    g_bob: float
    g_method: str
    g_estimate: GEstimate | None
    detectability: Detectability
    chsh: ChshEstimate | None
    decision: Decision
    key: KeyResult | None
    pair_stats: tuple[PairStat, ...]
    sift_counts: dict[str, int]
    notes: tuple[str, ...]
    records: tuple[TrialRecord, ...]


def _trial_stream(seed: int, chunk: int) -> np.random.Generator:
    """Chunk generator derived from (seed, chunk index) alone."""
    return np.random.Generator(np.random.Philox(key=seed, counter=chunk << 128))


def _resolve_g(config: SessionConfig) -> tuple[float, float, float, str, GEstimate | None]:
    if config.g_override is not None:
        g = clamp01(config.g_override)
        # Only the product is physical; split it evenly per side.
        side = math.sqrt(g)
        return g, side, side, "override", None
    src = config.source
    g_alice = region_mass(src.packet, 0, src.region_a, config.quadrature_order)
    g_bob = region_mass(src.packet, 1, src.region_b, config.quadrature_order)
    g = clamp01(g_alice * g_bob)
    method = (
        "analytic"
        if isinstance(src.region_a, Box) and isinstance(src.region_b, Box)
        else "quadrature"
    )
    estimate = GEstimate(
        value=g, std_error=0.0, method=method, samples_or_order=config.quadrature_order
    )
    return g, clamp01(g_alice), clamp01(g_bob), method, estimate


def _generate_trials(config: SessionConfig, channel: Channel):
    n = config.n_pairs
    n_alice, n_bob = config.settings.n_alice, config.settings.n_bob
    ii_all = np.empty(n, dtype=np.int64)
    jj_all = np.empty(n, dtype=np.int64)
    a_all = np.empty(n, dtype=np.int64)
    b_all = np.empty(n, dtype=np.int64)
    eve_all: list[EveRecord | None] = []
    for chunk, start in enumerate(range(0, n, TRIAL_CHUNK)):
        m = min(TRIAL_CHUNK, n - start)
        rng = _trial_stream(config.seed, chunk)
        ii = rng.integers(0, n_alice, size=m)
        jj = rng.integers(0, n_bob, size=m)
        a, b, eve = channel.simulate_batch(ii, jj, rng)
        sl = slice(start, start + m)
        ii_all[sl], jj_all[sl], a_all[sl], b_all[sl] = ii, jj, a, b
        eve_all.extend(eve if eve is not None else [None] * m)
    records = tuple(
        TrialRecord(k, int(ii_all[k]), int(jj_all[k]), int(a_all[k]), int(b_all[k]), eve_all[k])
        for k in range(n)
    )
    return records, ii_all, jj_all, a_all, b_all


def _pair_statistics(
    ii: np.ndarray,
    jj: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    settings: SettingSet,
    classification: PairClassification,
) -> tuple[PairStat, ...]:
    chsh_pairs = (
        set(classification.chsh_block.pairs) if classification.chsh_block else set()
    )
    key_pairs = set(classification.key_pairs)
    stats = []
    for i in range(settings.n_alice):
        for j in range(settings.n_bob):
            mask = (ii == i) & (jj == j)
            n = int(np.count_nonzero(mask))
            prods = (a[mask] * b[mask]).astype(float)
            coinc = (a[mask] != 0) & (b[mask] != 0)
            n_coinc = int(np.count_nonzero(coinc))
            raw = float(np.mean(prods)) if n else 0.0
            post = float(np.mean(prods[coinc])) if n_coinc else None
            group = (
                "chsh" if (i, j) in chsh_pairs else "key" if (i, j) in key_pairs else "discarded"
            )
            stats.append(PairStat(i, j, group, n, n_coinc, raw, post))
    return tuple(stats)


def run_session(config: SessionConfig) -> RunReport:
    """Execute one full protocol session, deterministically in the seed."""
    notes: list[str] = []
    g, g_alice, g_bob, g_method, g_estimate = _resolve_g(config)
    classification = classify_pairs(config.settings)
    channel = build_channel(
        config.channel,
        config.settings,
        g,
        g_alice,
        g_bob,
        classification,
        config.rate_monitoring,
    )

    records, ii, jj, a, b = _generate_trials(config, channel)
    sifted = sift(records, config.settings)

    chsh_estimate = None
    if classification.chsh_block is None:
        decision = Decision.INCONCLUSIVE
        notes.append("fewer than two settings per party: no CHSH block, no security test")
    else:
        chsh_estimate = estimate_chsh(sifted.chsh_group, config.analysis, classification.chsh_block)
        if chsh_estimate.sufficient:
            decision = decide_security(chsh_estimate.s, chsh_estimate.std_error)
        else:
            decision = Decision.INCONCLUSIVE
            notes.append(
                f"a CHSH setting pair retained fewer than {MIN_TRIALS_PER_PAIR} trials"
            )

    key = None
    if not classification.key_pairs:
        notes.append("no same-direction setting pairs: no key material by construction")
    else:
        try:
            key = extract_key(sifted.key_group)
        except NoKeyMaterialError:
            notes.append("no coincident same-direction trials: key extraction skipped")

    if config.source is not None and config.source.eve_region is not None:
        notes.append(
            "eve_region is an unused extension point: g depends only on the detector regions"
        )

    return RunReport(
        config=config,
        g_used=g,
        g_alice=g_alice,
        g_bob=g_bob,
        g_method=g_method,
        g_estimate=g_estimate,
        detectability=classify_detectability(g),
        chsh=chsh_estimate,
        decision=decision,
        key=key,
        pair_stats=_pair_statistics(ii, jj, a, b, config.settings, classification),
        sift_counts={
            "chsh": sum(len(v) for v in sifted.chsh_group.values()),
            "key": len(sifted.key_group),
            "discarded": len(sifted.discarded),
        },
        notes=tuple(notes),
        records=records,
    )

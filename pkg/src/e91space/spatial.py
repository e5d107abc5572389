"""Two-particle Gaussian wavepackets, detector regions, and the spatial factor g.

g(region_A, region_B) is the probability that particle 1 is found inside
Alice's detector volume and particle 2 inside Bob's, i.e. the squared spatial
wavefunction integrated over region_A x region_B.  It multiplies the spin
correlation observed with localized detectors and so controls whether the CHSH
test retains any discriminating power.

Three estimators are provided: a closed form for box regions (per-axis
Gaussian masses via the error function), tensor Gauss-Legendre quadrature over
each region's bounding box (spheres handled through an indicator function),
and a seeded Monte Carlo estimate with a binomial standard error.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .spin import Direction

# Boundary of the forgeable regime: with g at or below this value an
# eavesdropper running a local deterministic-strategy mixture reproduces every
# correlation the CHSH test can see.  Recomputed independently by
# lhv.max_forgeable_scale; this constant only drives classification.
FORGEABLE_THRESHOLD = 1.0 / math.sqrt(2.0)

G_TOL = 1e-9
DEFAULT_QUADRATURE_ORDER = 32
MC_CHUNK_SIZE = 1 << 16


class QuadratureConvergenceWarning(UserWarning):
    """Successive quadrature orders disagree beyond tolerance."""


class AnalyticFormUnavailable(ValueError):
    """The closed-form g exists only for box regions."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned detector volume with strictly positive halfwidths."""

    center: tuple[float, float, float]
    halfwidths: tuple[float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_triple(self.center, "center"))
        object.__setattr__(self, "halfwidths", _as_triple(self.halfwidths, "halfwidths"))
        if any(h <= 0.0 for h in self.halfwidths):
            raise ValueError("box halfwidths must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all(np.abs(pts - np.array(self.center)) <= np.array(self.halfwidths), axis=1)
        return inside

    def bounding_box(self) -> "Box":
        return self

    def bounds(self) -> list[tuple[float, float]]:
        return [(c - h, c + h) for c, h in zip(self.center, self.halfwidths)]


@dataclass(frozen=True)
class Sphere:
    """Spherical detector volume with strictly positive radius."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_triple(self.center, "center"))
        object.__setattr__(self, "radius", float(self.radius))
        if not math.isfinite(self.radius) or self.radius <= 0.0:
            raise ValueError("sphere radius must be positive and finite")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = np.sum((pts - np.array(self.center)) ** 2, axis=1)
        return d2 <= self.radius * self.radius

    def bounding_box(self) -> Box:
        return Box(self.center, (self.radius, self.radius, self.radius))


Region = Box | Sphere


def _as_triple(value, name: str) -> tuple[float, float, float]:
    vals = tuple(float(v) for v in value)
    if len(vals) != 3:
        raise ValueError(f"{name} must have exactly 3 components")
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"{name} components must be finite")
    return vals


@dataclass(frozen=True)
class GaussianPacket:
    """Separable two-particle spatial wavefunction.

    Each particle k and axis d carries an independent Gaussian factor with
    center ``centers[k][d]`` and initial width ``sigmas0[k][d]``; the squared
    wavefunction is then a product of six one-dimensional normal densities.
    Free evolution (hbar = m = 1, zero mean momentum) spreads each width as
    sigma(t) = sigma0 * sqrt(1 + (t / (2 sigma0^2))^2) while leaving the
    centers fixed.
    """

    centers: tuple[tuple[float, float, float], tuple[float, float, float]]
    sigmas0: tuple[tuple[float, float, float], tuple[float, float, float]]
    elapsed_time: float = 0.0

    def __post_init__(self) -> None:
        centers = tuple(_as_triple(row, "centers") for row in self.centers)
        sigmas = tuple(_as_triple(row, "sigmas0") for row in self.sigmas0)
        if len(centers) != 2 or len(sigmas) != 2:
            raise ValueError("packet needs center and width rows for exactly 2 particles")
        if any(s <= 0.0 for row in sigmas for s in row):
            raise ValueError("all initial widths must be positive")
        t = float(self.elapsed_time)
        if not math.isfinite(t) or t < 0.0:
            raise ValueError("elapsed_time must be finite and >= 0")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigmas0", sigmas)
        object.__setattr__(self, "elapsed_time", t)

    @classmethod
    def isotropic(cls, sigma: float = 1.0, center1=(0.0, 0.0, 0.0), center2=(0.0, 0.0, 0.0)) -> "GaussianPacket":
        s = (sigma, sigma, sigma)
        return cls(centers=(tuple(center1), tuple(center2)), sigmas0=(s, s))

    def widths(self) -> np.ndarray:
        """Per-particle, per-axis widths at the packet's elapsed time."""
        s0 = np.array(self.sigmas0)
        t = self.elapsed_time
        return s0 * np.sqrt(1.0 + (t / (2.0 * s0 * s0)) ** 2)

    def centers_array(self) -> np.ndarray:
        return np.array(self.centers)

    def axis_mass(self, particle: int, axis: int, lo: float, hi: float) -> float:
        """Probability mass of one particle's coordinate in [lo, hi]."""
        mu = self.centers[particle][axis]
        sigma = float(self.widths()[particle, axis])
        rt2 = sigma * math.sqrt(2.0)
        return 0.5 * (math.erf((hi - mu) / rt2) - math.erf((lo - mu) / rt2))

    def box_mass(self, particle: int, box: Box) -> float:
        """Probability mass of one particle inside a box region."""
        mass = 1.0
        for axis, (lo, hi) in enumerate(box.bounds()):
            mass *= self.axis_mass(particle, axis, lo, hi)
        return mass

    def sample_positions(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw n joint positions (r1, r2) from the squared wavefunction."""
        z = rng.standard_normal((n, 6))
        w = self.widths()
        mu = self.centers_array()
        r1 = mu[0] + w[0] * z[:, :3]
        r2 = mu[1] + w[1] * z[:, 3:]
        return r1, r2


class Detectability(enum.Enum):
    FORGEABLE = "forgeable"
    VIOLATION_POSSIBLE = "violation_possible"


@dataclass(frozen=True)
class GEstimate:
    """One estimate of g with its provenance."""

    value: float
    std_error: float
    method: str  # "analytic" | "quadrature" | "monte_carlo"
    samples_or_order: int

    def __post_init__(self) -> None:
        if self.method not in ("analytic", "quadrature", "monte_carlo"):
            raise ValueError(f"unknown estimation method {self.method!r}")
        if self.std_error < 0.0:
            raise ValueError("std_error must be >= 0")
        lo = 0.0 - 3.0 * self.std_error - G_TOL
        hi = 1.0 + 3.0 * self.std_error + G_TOL
        if not (lo <= self.value <= hi):
            raise ValueError(f"estimate {self.value} outside statistical bounds [0, 1]")


def density(packet: GaussianPacket, r1, r2):
    """Squared wavefunction |phi(r1, r2)|^2, a product of six normal densities.

    Accepts single 3-vectors or (n, 3) arrays; returns a scalar or (n,) array.
    """
    p1 = np.atleast_2d(np.asarray(r1, dtype=float))
    p2 = np.atleast_2d(np.asarray(r2, dtype=float))
    w = packet.widths()
    mu = packet.centers_array()
    z1 = (p1 - mu[0]) / w[0]
    z2 = (p2 - mu[1]) / w[1]
    norm = (2.0 * math.pi) ** -3 / (np.prod(w[0]) * np.prod(w[1]))
    vals = norm * np.exp(-0.5 * (np.sum(z1 * z1, axis=1) + np.sum(z2 * z2, axis=1)))
    if np.ndim(r1) == 1:
        return float(vals[0])
    return vals


def g_analytic(packet: GaussianPacket, region_a: Region, region_b: Region) -> float:
    """Closed-form g for box regions.

    The separable packet factorizes the six-dimensional integral into per-axis
    Gaussian masses, each an error-function difference.  Raises
    AnalyticFormUnavailable for spheres.
    """
    if not isinstance(region_a, Box) or not isinstance(region_b, Box):
        raise AnalyticFormUnavailable(
            "closed-form g requires box regions; use g_quadrature or g_monte_carlo for spheres"
        )
    return packet.box_mass(0, region_a) * packet.box_mass(1, region_b)


@lru_cache(maxsize=32)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _region_mass_quadrature(packet: GaussianPacket, particle: int, region: Region, order: int) -> float:
    """Tensor Gauss-Legendre mass of one particle inside one region."""
    nodes, weights = _leggauss(order)
    bounds = region.bounding_box().bounds()
    axes_x, axes_w = [], []
    for lo, hi in bounds:
        half = 0.5 * (hi - lo)
        axes_x.append(half * nodes + 0.5 * (hi + lo))
        axes_w.append(half * weights)

    mu = packet.centers_array()[particle]
    sig = packet.widths()[particle]
    pdfs = [
        np.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
        for x, m, s in zip(axes_x, mu, sig)
    ]

    if isinstance(region, Box):
        # Separable integrand over its own bounding box: three 1-d sums.
        return float(np.prod([np.dot(w, p) for w, p in zip(axes_w, pdfs)]))

    grid = np.stack(np.meshgrid(*axes_x, indexing="ij"), axis=-1).reshape(-1, 3)
    dens = (pdfs[0][:, None, None] * pdfs[1][None, :, None] * pdfs[2][None, None, :]).reshape(-1)
    wts = (axes_w[0][:, None, None] * axes_w[1][None, :, None] * axes_w[2][None, None, :]).reshape(-1)
    inside = region.contains(grid)
    return float(np.sum(wts[inside] * dens[inside]))


def region_mass(
    packet: GaussianPacket, particle: int, region: Region, order: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    """Probability mass of one particle inside one region (closed form for boxes).

    This is the per-side detection probability; g factorizes as the product of
    the two sides' masses because the packet is separable.
    """
    if particle not in (0, 1):
        raise ValueError("particle index must be 0 or 1")
    if isinstance(region, Box):
        return packet.box_mass(particle, region)
    return _region_mass_quadrature(packet, particle, region, order)


def g_quadrature(
    packet: GaussianPacket,
    region_a: Region,
    region_b: Region,
    order: int = DEFAULT_QUADRATURE_ORDER,
) -> float:
    """g via tensor Gauss-Legendre quadrature over each region's bounding box.

    Warns (QuadratureConvergenceWarning) when the estimate at half the order
    differs by more than 1e-4, which flags an under-resolved region.
    """
    if order < 4:
        raise ValueError("quadrature order must be >= 4")
    value = _region_mass_quadrature(packet, 0, region_a, order) * _region_mass_quadrature(
        packet, 1, region_b, order
    )
    half_order = max(4, order // 2)
    if half_order < order:
        coarse = _region_mass_quadrature(packet, 0, region_a, half_order) * _region_mass_quadrature(
            packet, 1, region_b, half_order
        )
        if abs(value - coarse) > 1e-4:
            warnings.warn(
                f"quadrature not converged: order {order} and {half_order} differ by "
                f"{abs(value - coarse):.2e}",
                QuadratureConvergenceWarning,
                stacklevel=2,
            )
    return value


def clamp01(g: float) -> float:
    """Clamp numerical noise outside [0, 1]; values beyond tolerance raise."""
    if g < -G_TOL or g > 1.0 + G_TOL:
        raise ValueError(f"g={g!r} outside [0, 1] beyond tolerance")
    return min(1.0, max(0.0, g))


def g_monte_carlo(
    packet: GaussianPacket,
    region_a: Region,
    region_b: Region,
    n: int,
    seed: int,
) -> GEstimate:
    """Monte Carlo g: the fraction of joint position draws landing in both regions.

    Sampling runs in fixed-size chunks whose generators are derived from the
    seed by a counter (chunk index), so the estimate is bit-identical for a
    given seed however the chunks are scheduled.
    """
    if n < 1000:
        raise ValueError("Monte Carlo needs n >= 1000 samples")
    hits = 0
    done = 0
    chunk_index = 0
    while done < n:
        m = min(MC_CHUNK_SIZE, n - done)
        rng = _counter_stream(seed, chunk_index)
        r1, r2 = packet.sample_positions(m, rng)
        hits += int(np.count_nonzero(region_a.contains(r1) & region_b.contains(r2)))
        done += m
        chunk_index += 1
    value = hits / n
    std_error = math.sqrt(value * (1.0 - value) / n)
    return GEstimate(value=value, std_error=std_error, method="monte_carlo", samples_or_order=n)


def _counter_stream(seed: int, counter: int) -> np.random.Generator:
    """Generator for one chunk, derived from (seed, counter) alone."""
    return np.random.Generator(np.random.Philox(key=seed, counter=counter << 128))


def evolve(packet: GaussianPacket, t: float) -> GaussianPacket:
    """Advance free evolution by t: widths spread, centers stay put."""
    if not math.isfinite(t) or t < 0.0:
        raise ValueError("evolution time must be finite and >= 0")
    if t == 0.0:
        return packet
    return replace(packet, elapsed_time=packet.elapsed_time + t)


def effective_correlation(g: float, a: Direction, b: Direction) -> float:
    """Correlation seen by localized detectors: g times the spin correlation."""
    if not math.isfinite(g) or g < -G_TOL or g > 1.0 + G_TOL:
        raise ValueError(f"g={g!r} must lie in [0, 1]")
    return clamp01(g) * -a.dot(b)


def classify_detectability(g: float) -> Detectability:
    """Forgeable at or below 1/sqrt(2); above it a CHSH violation is possible."""
    if not math.isfinite(g) or g < -G_TOL or g > 1.0 + G_TOL:
        raise ValueError(f"g={g!r} must lie in [0, 1]")
    if g <= FORGEABLE_THRESHOLD:
        return Detectability.FORGEABLE
    return Detectability.VIOLATION_POSSIBLE

"""Structured configuration documents for the command-line tools.

A config is a single JSON file with a versioned schema.  Validation is strict:
unknown keys are rejected with the offending path named, every physical
quantity must be finite, and cross-field rules (a source is a packet plus
regions, and exactly one of source or g_override) are enforced before any
computation starts.  ``serialize_config`` inverts ``build_config`` exactly,
so accepted documents round-trip.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from .protocol import Analysis, ChannelKind, SessionConfig, SourceSpec
from .spatial import Box, GaussianPacket, Region, Sphere
from .spin import Direction, SettingSet, ekert_settings, tsirelson_settings

SCHEMA_VERSION = 1
MAX_SETTINGS_PER_PARTY = 4
SWEEP_VARIABLES = ("time", "region_halfwidth", "g_override")
OUTPUT_FORMATS = ("json", "csv")

_TOP_LEVEL_KEYS = {
    "schema_version",
    "session",
    "packet",
    "regions",
    "sweep",
    "output",
    "gfactor",
    "lhv",
}
_SESSION_KEYS = {
    "settings",
    "channel",
    "analysis",
    "n_pairs",
    "seed",
    "rate_monitoring",
    "quadrature_order",
    "g_override",
}


class ConfigError(ValueError):
    """A rejected document; the message starts with the offending path."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple[float, ...]


@dataclass(frozen=True)
class OutputOptions:
    directory: str = "."
    formats: tuple[str, ...] = ("json", "csv")


@dataclass(frozen=True)
class GfactorOptions:
    mc_samples: int = 100_000


@dataclass(frozen=True)
class LhvOptions:
    rate_constraint: float | None = None


@dataclass(frozen=True)
class ToolConfig:
    """Everything the command line needs: the session plus tool sections."""

    session: SessionConfig
    settings_spec: str | tuple[tuple[float, ...], tuple[float, ...]]
    output: OutputOptions = OutputOptions()
    sweep: SweepSpec | None = None
    gfactor: GfactorOptions = GfactorOptions()
    lhv: LhvOptions = LhvOptions()


def _expect_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _reject_unknown(doc: dict, allowed, path: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")


def _finite(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return v


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
    return value


def _boolean(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected a boolean, got {type(value).__name__}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {type(value).__name__}")
    return value


def _triple(value, path: str) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(path, "expected a list of exactly 3 numbers")
    return tuple(_finite(v, f"{path}[{k}]") for k, v in enumerate(value))


def _parse_settings(value, path: str):
    """Returns (SettingSet, spec) where spec reserializes the document form."""
    if isinstance(value, str):
        if value == "ekert":
            return ekert_settings(), "ekert"
        if value == "tsirelson":
            return tsirelson_settings(), "tsirelson"
        raise ConfigError(path, f"unknown named setting set {value!r} (ekert, tsirelson)")
    doc = _expect_mapping(value, path)
    _reject_unknown(doc, {"alice_degrees", "bob_degrees"}, path)

    def angles(key: str) -> tuple[float, ...]:
        if key not in doc:
            raise ConfigError(f"{path}.{key}", "required")
        raw = doc[key]
        if not isinstance(raw, list) or not 1 <= len(raw) <= MAX_SETTINGS_PER_PARTY:
            raise ConfigError(
                f"{path}.{key}", f"expected a list of 1..{MAX_SETTINGS_PER_PARTY} angles"
            )
        return tuple(_finite(a, f"{path}.{key}[{i}]") for i, a in enumerate(raw))

    alice = angles("alice_degrees")
    bob = angles("bob_degrees")
    settings = SettingSet(
        tuple(Direction.from_plane_angle(a) for a in alice),
        tuple(Direction.from_plane_angle(b) for b in bob),
    )
    return settings, (alice, bob)


def _parse_region(value, path: str) -> Region:
    doc = _expect_mapping(value, path)
    shape = _string(doc.get("shape", ""), f"{path}.shape")
    if shape == "box":
        _reject_unknown(doc, {"shape", "center", "halfwidths"}, path)
        for key in ("center", "halfwidths"):
            if key not in doc:
                raise ConfigError(f"{path}.{key}", "required")
        try:
            return Box(_triple(doc["center"], f"{path}.center"),
                       _triple(doc["halfwidths"], f"{path}.halfwidths"))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
    if shape == "sphere":
        _reject_unknown(doc, {"shape", "center", "radius"}, path)
        for key in ("center", "radius"):
            if key not in doc:
                raise ConfigError(f"{path}.{key}", "required")
        try:
            return Sphere(_triple(doc["center"], f"{path}.center"),
                          _finite(doc["radius"], f"{path}.radius"))
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.shape", f"expected 'box' or 'sphere', got {shape!r}")


def _parse_sigmas(value, path: str):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        s = _finite(value, path)
        return ((s, s, s), (s, s, s))
    if isinstance(value, list) and len(value) == 3 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        row = _triple(value, path)
        return (row, row)
    if isinstance(value, list) and len(value) == 2:
        return tuple(_triple(row, f"{path}[{k}]") for k, row in enumerate(value))
    raise ConfigError(path, "expected a number, a list of 3, or a list of two 3-lists")


def _parse_packet(value, path: str) -> GaussianPacket:
    doc = _expect_mapping(value, path)
    _reject_unknown(doc, {"centers", "sigmas", "time"}, path)
    for key in ("centers", "sigmas"):
        if key not in doc:
            raise ConfigError(f"{path}.{key}", "required")
    centers_raw = doc["centers"]
    if not isinstance(centers_raw, list) or len(centers_raw) != 2:
        raise ConfigError(f"{path}.centers", "expected a list of two 3-lists")
    centers = tuple(_triple(row, f"{path}.centers[{k}]") for k, row in enumerate(centers_raw))
    sigmas = _parse_sigmas(doc["sigmas"], f"{path}.sigmas")
    time = _finite(doc.get("time", 0.0), f"{path}.time")
    try:
        return GaussianPacket(centers=centers, sigmas0=sigmas, elapsed_time=time)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def build_config(doc) -> ToolConfig:
    """Validate a parsed JSON document and assemble the tool configuration."""
    _expect_mapping(doc, "document")
    _reject_unknown(doc, _TOP_LEVEL_KEYS, "")
    if "schema_version" not in doc:
        raise ConfigError("schema_version", "required")
    version = _integer(doc["schema_version"], "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version}")

    session_doc = _expect_mapping(doc.get("session", {}), "session")
    _reject_unknown(session_doc, _SESSION_KEYS, "session")

    settings, settings_spec = _parse_settings(session_doc.get("settings", "ekert"), "session.settings")

    channel_name = _string(session_doc.get("channel", "honest"), "session.channel")
    try:
        channel = ChannelKind(channel_name)
    except ValueError:
        raise ConfigError(
            "session.channel",
            f"expected one of {[c.value for c in ChannelKind]}, got {channel_name!r}",
        ) from None

    analysis_name = _string(session_doc.get("analysis", "raw"), "session.analysis")
    try:
        analysis = Analysis(analysis_name)
    except ValueError:
        raise ConfigError(
            "session.analysis",
            f"expected one of {[a.value for a in Analysis]}, got {analysis_name!r}",
        ) from None

    n_pairs = _integer(session_doc.get("n_pairs", 100_000), "session.n_pairs")
    seed = _integer(session_doc.get("seed", 0), "session.seed")
    rate_monitoring = _boolean(session_doc.get("rate_monitoring", False), "session.rate_monitoring")
    quadrature_order = _integer(session_doc.get("quadrature_order", 32), "session.quadrature_order")
    g_override = None
    if "g_override" in session_doc:
        g_override = _finite(session_doc["g_override"], "session.g_override")

    has_packet = "packet" in doc
    has_regions = "regions" in doc
    if has_packet != has_regions:
        missing = "regions" if has_packet else "packet"
        raise ConfigError(missing, "a source needs both packet and regions sections")
    source = None
    if has_packet:
        packet = _parse_packet(doc["packet"], "packet")
        regions_doc = _expect_mapping(doc["regions"], "regions")
        _reject_unknown(regions_doc, {"A", "B", "eve"}, "regions")
        for key in ("A", "B"):
            if key not in regions_doc:
                raise ConfigError(f"regions.{key}", "required")
        source = SourceSpec(
            packet=packet,
            region_a=_parse_region(regions_doc["A"], "regions.A"),
            region_b=_parse_region(regions_doc["B"], "regions.B"),
            eve_region=(
                _parse_region(regions_doc["eve"], "regions.eve") if "eve" in regions_doc else None
            ),
        )

    try:
        session = SessionConfig(
            settings=settings,
            channel=channel,
            analysis=analysis,
            n_pairs=n_pairs,
            seed=seed,
            source=source,
            g_override=g_override,
            rate_monitoring=rate_monitoring,
            quadrature_order=quadrature_order,
        )
    except ValueError as exc:
        raise ConfigError("session", str(exc)) from exc

    sweep = None
    if "sweep" in doc:
        sweep_doc = _expect_mapping(doc["sweep"], "sweep")
        _reject_unknown(sweep_doc, {"variable", "grid"}, "sweep")
        variable = _string(sweep_doc.get("variable", ""), "sweep.variable")
        if variable not in SWEEP_VARIABLES:
            raise ConfigError("sweep.variable", f"expected one of {list(SWEEP_VARIABLES)}")
        grid_raw = sweep_doc.get("grid")
        if not isinstance(grid_raw, list) or not grid_raw:
            raise ConfigError("sweep.grid", "expected a nonempty list of numbers")
        grid = tuple(_finite(v, f"sweep.grid[{k}]") for k, v in enumerate(grid_raw))
        if variable in ("time", "region_halfwidth") and source is None:
            raise ConfigError("sweep.variable", f"sweeping {variable} needs a packet and regions")
        if variable == "g_override" and g_override is None:
            raise ConfigError(
                "sweep.variable", "sweeping g_override needs session.g_override as the base value"
            )
        sweep = SweepSpec(variable, grid)

    output = OutputOptions()
    if "output" in doc:
        output_doc = _expect_mapping(doc["output"], "output")
        _reject_unknown(output_doc, {"directory", "formats"}, "output")
        directory = _string(output_doc.get("directory", "."), "output.directory")
        formats_raw = output_doc.get("formats", list(OUTPUT_FORMATS))
        if not isinstance(formats_raw, list) or not formats_raw:
            raise ConfigError("output.formats", "expected a nonempty list")
        formats = []
        for k, fmt in enumerate(formats_raw):
            name = _string(fmt, f"output.formats[{k}]")
            if name not in OUTPUT_FORMATS:
                raise ConfigError(f"output.formats[{k}]", f"expected one of {list(OUTPUT_FORMATS)}")
            if name in formats:
                raise ConfigError(f"output.formats[{k}]", f"duplicate format {name!r}")
            formats.append(name)
        output = OutputOptions(directory=directory, formats=tuple(formats))

    gfactor = GfactorOptions()
    if "gfactor" in doc:
        gfactor_doc = _expect_mapping(doc["gfactor"], "gfactor")
        _reject_unknown(gfactor_doc, {"mc_samples"}, "gfactor")
        mc_samples = _integer(gfactor_doc.get("mc_samples", 100_000), "gfactor.mc_samples")
        if mc_samples < 1000:
            raise ConfigError("gfactor.mc_samples", "must be >= 1000")
        gfactor = GfactorOptions(mc_samples=mc_samples)

    lhv = LhvOptions()
    if "lhv" in doc:
        lhv_doc = _expect_mapping(doc["lhv"], "lhv")
        _reject_unknown(lhv_doc, {"rate_constraint"}, "lhv")
        rate = lhv_doc.get("rate_constraint")
        if rate is not None:
            rate = _finite(rate, "lhv.rate_constraint")
            if not 0.0 <= rate <= 1.0:
                raise ConfigError("lhv.rate_constraint", "must lie in [0, 1]")
        lhv = LhvOptions(rate_constraint=rate)

    return ToolConfig(
        session=session,
        settings_spec=settings_spec,
        output=output,
        sweep=sweep,
        gfactor=gfactor,
        lhv=lhv,
    )


def load_config(path: str) -> ToolConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return build_config(doc)


def serialize_settings(settings: SettingSet):
    """Document form of a setting set, preferring the named presets."""
    if settings == ekert_settings():
        return "ekert"
    if settings == tsirelson_settings():
        return "tsirelson"

    def recover(d: Direction) -> float:
        return math.degrees(math.atan2(d.x, d.z))

    return {
        "alice_degrees": [recover(d) for d in settings.alice_directions],
        "bob_degrees": [recover(d) for d in settings.bob_directions],
    }


def serialize_region(region: Region) -> dict:
    if isinstance(region, Box):
        return {
            "shape": "box",
            "center": list(region.center),
            "halfwidths": list(region.halfwidths),
        }
    return {"shape": "sphere", "center": list(region.center), "radius": region.radius}


def serialize_packet(packet: GaussianPacket) -> dict:
    return {
        "centers": [list(row) for row in packet.centers],
        "sigmas": [list(row) for row in packet.sigmas0],
        "time": packet.elapsed_time,
    }


def session_echo(session: SessionConfig, settings_spec=None) -> dict:
    """The reproducibility-relevant config subtree (no output options)."""
    if settings_spec is None:
        settings_spec = serialize_settings(session.settings)
    elif isinstance(settings_spec, tuple):
        settings_spec = {
            "alice_degrees": list(settings_spec[0]),
            "bob_degrees": list(settings_spec[1]),
        }
    session_doc = {
        "settings": settings_spec,
        "channel": session.channel.value,
        "analysis": session.analysis.value,
        "n_pairs": session.n_pairs,
        "seed": session.seed,
        "rate_monitoring": session.rate_monitoring,
        "quadrature_order": session.quadrature_order,
    }
    if session.g_override is not None:
        session_doc["g_override"] = session.g_override
    echo = {"schema_version": SCHEMA_VERSION, "session": session_doc}
    if session.source is not None:
        echo["packet"] = serialize_packet(session.source.packet)
        regions = {
            "A": serialize_region(session.source.region_a),
            "B": serialize_region(session.source.region_b),
        }
        if session.source.eve_region is not None:
            regions["eve"] = serialize_region(session.source.eve_region)
        echo["regions"] = regions
    return echo


def serialize_config(cfg: ToolConfig) -> dict:
    """Inverse of build_config on accepted documents (defaults made explicit)."""
    doc = session_echo(cfg.session, cfg.settings_spec)
    if cfg.sweep is not None:
        doc["sweep"] = {"variable": cfg.sweep.variable, "grid": list(cfg.sweep.grid)}
    doc["output"] = {"directory": cfg.output.directory, "formats": list(cfg.output.formats)}
    doc["gfactor"] = {"mc_samples": cfg.gfactor.mc_samples}
    doc["lhv"] = {"rate_constraint": cfg.lhv.rate_constraint}
    return doc


def with_overrides(cfg: ToolConfig, seed: int | None = None, out_dir: str | None = None,
                   formats: tuple[str, ...] | None = None) -> ToolConfig:
    """Apply command-line overrides on top of a parsed config."""
    session = cfg.session
    if seed is not None:
        session = dataclasses.replace(session, seed=seed)
    output = cfg.output
    if out_dir is not None:
        output = dataclasses.replace(output, directory=out_dir)
    if formats is not None:
        output = dataclasses.replace(output, formats=formats)
    return dataclasses.replace(cfg, session=session, output=output)

"""Command-line entry point.

Subcommands: ``gfactor`` (all applicable spatial-factor estimators with
agreement checks), ``lhv-threshold`` (largest forgeable scale per outcome
alphabet, with the separating inequality just above it), ``run`` (one full
protocol session), and ``sweep`` (one session per grid point of a swept
variable).  Outputs are machine-readable (report.json, trials.csv,
sweep.csv) plus a short human summary on stdout.

Exit codes are a stable contract: 0 ok, 1 config error, 3 estimator
disagreement, 4 LP diagnostic failure, 5 inconclusive session.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import reports
from .config import (
    ConfigError,
    ToolConfig,
    load_config,
    session_echo,
    with_overrides,
)
from .lhv import (
    Alphabet,
    Infeasible,
    LpDiagnosticError,
    lhv_feasibility,
    max_forgeable_scale,
)
from .protocol import Decision, ForgeInfeasibleError, SessionConfig, run_session
from .spatial import (
    FORGEABLE_THRESHOLD,
    AnalyticFormUnavailable,
    Box,
    GEstimate,
    Sphere,
    clamp01,
    classify_detectability,
    g_analytic,
    g_monte_carlo,
    g_quadrature,
)
from .spin import CHSH_CLASSICAL_BOUND, CorrelationMatrix

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ESTIMATOR_DISAGREEMENT = 3
EXIT_LP_DIAGNOSTIC = 4
EXIT_INCONCLUSIVE = 5

G_AGREEMENT_TOL = 1e-6
CERTIFICATE_PROBE_STEP = 1e-3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="e91space",
        description="Entanglement-based key distribution with spatially localized detectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("gfactor", "compute the spatial factor g with every applicable estimator"),
        ("lhv-threshold", "largest forgeable correlation scale per outcome alphabet"),
        ("run", "run one protocol session and decide security"),
        ("sweep", "run one session per grid point of the swept variable"),
    ]
    for name, help_text in specs:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the JSON config document")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides session.seed)")
        sp.add_argument(
            "--format",
            help="comma-separated subset of json,csv (overrides output.formats)",
        )
    return parser


def _parse_formats(raw: str) -> tuple[str, ...]:
    formats = tuple(part.strip() for part in raw.split(",") if part.strip())
    if not formats:
        raise ConfigError("--format", "expected a comma-separated subset of json,csv")
    for fmt in formats:
        if fmt not in ("json", "csv"):
            raise ConfigError("--format", f"unknown format {fmt!r}")
    return formats


def _report_path(cfg: ToolConfig, filename: str) -> str:
    return os.path.join(cfg.output.directory, filename)


def cmd_gfactor(cfg: ToolConfig) -> int:
    src = cfg.session.source
    if src is None:
        raise ConfigError("packet", "the gfactor command needs packet and regions sections")
    order = cfg.session.quadrature_order
    notes: list[str] = []

    analytic = None
    try:
        analytic = g_analytic(src.packet, src.region_a, src.region_b)
    except AnalyticFormUnavailable:
        notes.append("no closed form for sphere regions; quadrature is the reference")
    quadrature = g_quadrature(src.packet, src.region_a, src.region_b, order)
    monte_carlo = g_monte_carlo(
        src.packet, src.region_a, src.region_b, cfg.gfactor.mc_samples, cfg.session.seed
    )

    reference = analytic if analytic is not None else quadrature
    agree_aq = None if analytic is None else bool(abs(analytic - quadrature) <= G_AGREEMENT_TOL)
    agree_mc = bool(
        abs(reference - monte_carlo.value) <= 3.0 * monte_carlo.std_error + 1e-12
    )
    g_value = clamp01(reference)
    doc = {
        "kind": "gfactor",
        "config": session_echo(cfg.session, cfg.settings_spec),
        "estimates": {
            "analytic": (
                None
                if analytic is None
                else reports.gestimate_dict(GEstimate(analytic, 0.0, "analytic", 0))
            ),
            "quadrature": reports.gestimate_dict(GEstimate(quadrature, 0.0, "quadrature", order)),
            "monte_carlo": reports.gestimate_dict(monte_carlo),
        },
        "agreement": {
            "analytic_vs_quadrature": agree_aq,
            "reference_vs_monte_carlo": agree_mc,
            "tolerance": G_AGREEMENT_TOL,
        },
        "g": g_value,
        "detectability": classify_detectability(g_value).value,
        "notes": notes,
    }
    if "json" in cfg.output.formats:
        path = _report_path(cfg, "report.json")
        reports.write_json(path, doc)
        print(f"wrote {path}")
    print(f"g = {g_value:.6g} ({doc['detectability']})")
    disagreement = agree_aq is False or not agree_mc
    if disagreement:
        print("estimators disagree beyond tolerance", file=sys.stderr)
        return EXIT_ESTIMATOR_DISAGREEMENT
    return EXIT_OK


def cmd_lhv_threshold(cfg: ToolConfig) -> int:
    settings = cfg.session.settings
    notes: list[str] = []
    thresholds = {
        "plus_minus": max_forgeable_scale(settings, Alphabet.PLUS_MINUS),
        "plus_minus_null": max_forgeable_scale(settings, Alphabet.PLUS_MINUS_NULL),
    }
    if cfg.lhv.rate_constraint is not None:
        thresholds["plus_minus_null_rate_constrained"] = max_forgeable_scale(
            settings, Alphabet.PLUS_MINUS_NULL, cfg.lhv.rate_constraint
        )

    probe_scale = thresholds["plus_minus"] + CERTIFICATE_PROBE_STEP
    certificate = None
    if probe_scale <= 1.0:
        probe = lhv_feasibility(
            CorrelationMatrix(probe_scale * settings.singlet_matrix().entries),
            settings,
            Alphabet.PLUS_MINUS,
        )
        if isinstance(probe, Infeasible):
            certificate = reports.certificate_dict(probe.certificate)
        else:
            notes.append("probe scale still feasible within bisection slack")
    else:
        notes.append("threshold is 1: every scale in [0, 1] is forgeable at these settings")

    doc = {
        "kind": "lhv_threshold",
        "config": session_echo(cfg.session, cfg.settings_spec),
        "thresholds": thresholds,
        "rate_constraint": cfg.lhv.rate_constraint,
        "bisection_tolerance": 1e-6,
        "certificate_probe": {"scale": probe_scale, "certificate": certificate},
        "notes": notes,
    }
    if "json" in cfg.output.formats:
        path = _report_path(cfg, "report.json")
        reports.write_json(path, doc)
        print(f"wrote {path}")
    for name, value in thresholds.items():
        print(f"max forgeable scale ({name}) = {value:.6f}")
    return EXIT_OK


def cmd_run(cfg: ToolConfig) -> int:
    report = run_session(cfg.session)
    doc = reports.run_report_dict(report, cfg.settings_spec)
    written = []
    if "json" in cfg.output.formats:
        path = _report_path(cfg, "report.json")
        reports.write_json(path, doc)
        written.append(path)
    if "csv" in cfg.output.formats:
        path = _report_path(cfg, "trials.csv")
        reports.write_text(path, reports.trials_csv(report.records))
        written.append(path)

    print(f"decision: {report.decision.value}")
    if report.chsh is not None:
        print(
            f"S = {report.chsh.s:.6g} +/- {report.chsh.std_error:.3g} "
            f"({report.chsh.analysis.value}), g = {report.g_used:.6g}"
        )
    if report.key is not None:
        print(
            f"key bits = {report.key.n_retained}, qber = {report.key.qber:.6g}, "
            f"eve knowledge = {report.key.eve_knowledge_fraction:.6g}"
        )
    for note in report.notes:
        print(f"note: {note}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK if report.decision is not Decision.INCONCLUSIVE else EXIT_INCONCLUSIVE


def _derive_row_session(session: SessionConfig, variable: str, value: float, index: int) -> SessionConfig:
    seed = (session.seed + index) % 2**64
    if variable == "g_override":
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"grid value {value} outside [0, 1] for g_override")
        return dataclasses.replace(session, seed=seed, g_override=float(value), source=None)
    if variable == "time":
        packet = dataclasses.replace(session.source.packet, elapsed_time=float(value))
        source = dataclasses.replace(session.source, packet=packet)
        return dataclasses.replace(session, seed=seed, source=source)
    if variable == "region_halfwidth":
        if value <= 0.0:
            raise ValueError(f"grid value {value} must be positive for region_halfwidth")

        def resize(region):
            if isinstance(region, Box):
                return Box(region.center, (value, value, value))
            return Sphere(region.center, value)

        source = dataclasses.replace(
            session.source,
            region_a=resize(session.source.region_a),
            region_b=resize(session.source.region_b),
        )
        return dataclasses.replace(session, seed=seed, source=source)
    raise ValueError(f"unknown sweep variable {variable!r}")


def cmd_sweep(cfg: ToolConfig) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep", "required for the sweep command")
    rows = []
    n_ok = 0
    for index, value in enumerate(cfg.sweep.grid):
        try:
            session = _derive_row_session(cfg.session, cfg.sweep.variable, value, index)
            report = run_session(session)
            rows.append(reports.sweep_row_dict(index, value, report, None))
            n_ok += 1
        except (ForgeInfeasibleError, LpDiagnosticError, ValueError) as exc:
            rows.append(reports.sweep_row_dict(index, value, None, str(exc)))

    echo = session_echo(cfg.session, cfg.settings_spec)
    echo["sweep"] = {"variable": cfg.sweep.variable, "grid": list(cfg.sweep.grid)}
    doc = {
        "kind": "sweep",
        "config": echo,
        "reference": {
            "forgeable_threshold": FORGEABLE_THRESHOLD,
            "classical_bound": CHSH_CLASSICAL_BOUND,
        },
        "rows": rows,
    }
    written = []
    if "json" in cfg.output.formats:
        path = _report_path(cfg, "report.json")
        reports.write_json(path, doc)
        written.append(path)
    if "csv" in cfg.output.formats:
        path = _report_path(cfg, "sweep.csv")
        reports.write_text(path, reports.sweep_csv(rows))
        written.append(path)

    print(f"sweep rows: {n_ok} succeeded, {len(rows) - n_ok} failed")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK if n_ok >= 1 else EXIT_CONFIG


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        formats = _parse_formats(args.format) if args.format else None
        cfg = with_overrides(cfg, seed=args.seed, out_dir=args.out, formats=formats)
        if args.command == "gfactor":
            return cmd_gfactor(cfg)
        if args.command == "lhv-threshold":
            return cmd_lhv_threshold(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        raise ConfigError("command", f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ForgeInfeasibleError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        print(
            "the requested forge lies outside the local polytope; "
            "lower g or inspect the certificate via lhv-threshold",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    except LpDiagnosticError as exc:
        print(f"LP diagnostic: {exc}", file=sys.stderr)
        return EXIT_LP_DIAGNOSTIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()

"""Acceptance gate: eleven end-to-end checks of the package's core claims.

Each test prints exactly one PASS/FAIL line on the terminal (bypassing
capture) before asserting, so a full run reads as a checklist.  All random
draws use fixed seeds; every statistical comparison carries an explicit
three-sigma gate against an independently computed oracle.
"""

import json
import math

import numpy as np
import pytest

from e91space.cli import main as cli_main
from e91space.lhv import (
    Alphabet,
    Infeasible,
    enumerate_strategies,
    intercept_resend_correlation,
    lhv_feasibility,
    max_forgeable_scale,
)
from e91space.protocol import (
    Analysis,
    ChannelKind,
    Decision,
    SessionConfig,
    classify_pairs,
    estimate_chsh,
    run_session,
    sift,
)
from e91space.spatial import (
    Box,
    GaussianPacket,
    g_analytic,
    g_monte_carlo,
    g_quadrature,
)
from e91space.spin import (
    Direction,
    chsh_statistic,
    ekert_settings,
    sample_singlet_outcomes,
    singlet_correlation,
    tsirelson_settings,
)

SQRT2 = math.sqrt(2.0)
TSIRELSON = 2.0 * SQRT2


def _report(capsys, number: int, ok: bool, description: str, detail: str) -> None:
    with capsys.disabled():
        status = "PASS" if ok else "FAIL"
        print(f"acceptance {number:02d} {status} {description}: {detail}")
    assert ok, f"check {number} ({description}): {detail}"


def _random_direction(rng) -> Direction:
    v = rng.normal(size=3)
    return Direction(float(v[0]), float(v[1]), float(v[2]))


def _random_box_instance(rng):
    packet = GaussianPacket(
        centers=tuple(tuple(rng.uniform(-0.5, 0.5, 3)) for _ in range(2)),
        sigmas0=tuple(tuple(rng.uniform(0.5, 1.5, 3)) for _ in range(2)),
        elapsed_time=float(rng.uniform(0.0, 1.0)),
    )
    box_a = Box(
        center=tuple(rng.uniform(-0.3, 0.3, 3)),
        halfwidths=tuple(rng.uniform(0.8, 2.0, 3)),
    )
    box_b = Box(
        center=tuple(rng.uniform(-0.3, 0.3, 3)),
        halfwidths=tuple(rng.uniform(0.8, 2.0, 3)),
    )
    return packet, box_a, box_b


def _session(**kwargs) -> SessionConfig:
    base = dict(
        settings=ekert_settings(),
        channel=ChannelKind.HONEST,
        analysis=Analysis.RAW,
        n_pairs=100_000,
        seed=0,
        g_override=1.0,
    )
    base.update(kwargs)
    return SessionConfig(**base)


def _raw_estimate(report):
    """Re-estimate the CHSH statistic of a finished session without post-selection."""
    classification = classify_pairs(report.config.settings)
    sifted = sift(report.records, report.config.settings)
    return estimate_chsh(sifted.chsh_group, Analysis.RAW, classification.chsh_block)


class TestAcceptance:
    def test_01_singlet_law(self, capsys):
        rng = np.random.default_rng(1001)
        worst = 0.0
        for _ in range(1000):
            a, b = _random_direction(rng), _random_direction(rng)
            worst = max(worst, abs(singlet_correlation(a, b) - (-a.dot(b))))
        a = _random_direction(rng)
        b = _random_direction(rng)
        n = 100_000
        products = np.empty(n)
        for k in range(n):
            sa, sb = sample_singlet_outcomes(a, b, rng)
            products[k] = sa * sb
        expected = -a.dot(b)
        sigma = math.sqrt((1.0 - expected**2) / n)
        dev = abs(float(products.mean()) - expected)
        ok = worst <= 1e-12 and dev <= 3.0 * sigma
        _report(
            capsys, 1, ok,
            "singlet correlation equals -a.b",
            f"worst analytic residual {worst:.2e} (tol 1e-12), "
            f"sampled deviation {dev:.2e} vs 3 sigma {3 * sigma:.2e}",
        )

    def test_02_tsirelson_value(self, capsys):
        e = tsirelson_settings().singlet_matrix().entries
        s_analytic = chsh_statistic(e[0, 0], e[0, 1], e[1, 0], e[1, 1])
        analytic_err = abs(s_analytic - (-TSIRELSON))
        report = run_session(_session(seed=2002))
        dev = abs(abs(report.chsh.s) - TSIRELSON)
        ok = analytic_err <= 1e-12 and dev <= 3.0 * report.chsh.std_error
        _report(
            capsys, 2, ok,
            "CHSH reaches the quantum bound 2*sqrt(2)",
            f"analytic error {analytic_err:.2e} (tol 1e-12), simulated |S| "
            f"{abs(report.chsh.s):.4f} within {dev / report.chsh.std_error:.2f} sigma",
        )

    def test_03_g_estimator_cross_validation(self, capsys):
        rng = np.random.default_rng(3003)
        worst_quad = 0.0
        worst_mc_sigmas = 0.0
        for k in range(20):
            packet, box_a, box_b = _random_box_instance(rng)
            exact = g_analytic(packet, box_a, box_b)
            quad = g_quadrature(packet, box_a, box_b, order=32)
            mc = g_monte_carlo(packet, box_a, box_b, n=1_000_000, seed=30_000 + k)
            worst_quad = max(worst_quad, abs(exact - quad))
            if mc.std_error > 0.0:
                worst_mc_sigmas = max(worst_mc_sigmas, abs(exact - mc.value) / mc.std_error)
        packet = GaussianPacket.isotropic(1.0)
        cube = Box(center=(0.0, 0.0, 0.0), halfwidths=(1.0, 1.0, 1.0))
        worked = math.erf(1.0 / SQRT2) ** 6
        an = g_analytic(packet, cube, cube)
        qu = g_quadrature(packet, cube, cube, order=32)
        mc = g_monte_carlo(packet, cube, cube, n=1_000_000, seed=30_999)
        worked_ok = (
            abs(an - worked) <= 1e-12
            and abs(qu - worked) <= 1e-6
            and abs(mc.value - worked) <= 3.0 * mc.std_error
        )
        ok = worst_quad <= 1e-6 and worst_mc_sigmas <= 3.0 and worked_ok
        _report(
            capsys, 3, ok,
            "three g estimators agree on random box instances",
            f"max |analytic-quadrature| {worst_quad:.2e} (tol 1e-6), max MC deviation "
            f"{worst_mc_sigmas:.2f} sigma, worked value erf(1/sqrt(2))^6 = {worked:.17g} "
            f"reproduced ({worked_ok})",
        )

    def test_04_g_bounds_and_monotonicity(self, capsys):
        rng = np.random.default_rng(4004)
        in_bounds = True
        for _ in range(1000):
            packet, box_a, box_b = _random_box_instance(rng)
            g = g_analytic(packet, box_a, box_b)
            if not 0.0 <= g <= 1.0:
                in_bounds = False
                break
        monotone = True
        for _ in range(100):
            packet, box_a, box_b = _random_box_instance(rng)
            grow = tuple(h * float(rng.uniform(1.1, 2.0)) for h in box_a.halfwidths)
            bigger_a = Box(center=box_a.center, halfwidths=grow)
            if g_analytic(packet, box_a, box_b) > g_analytic(packet, bigger_a, box_b) + 1e-15:
                monotone = False
                break
        ok = in_bounds and monotone
        _report(
            capsys, 4, ok,
            "g stays in [0, 1] and grows with region containment",
            f"bounds on 1000 instances: {in_bounds}, containment monotonicity on "
            f"100 nested pairs: {monotone}",
        )

    def test_05_forgeable_threshold_recomputed(self, capsys):
        v = max_forgeable_scale(tsirelson_settings(), Alphabet.PLUS_MINUS)
        err = abs(v - 1.0 / SQRT2)
        ok = err <= 1e-6
        _report(
            capsys, 5, ok,
            "LP bisection recovers the forgeable threshold 1/sqrt(2)",
            f"threshold {v:.8f}, |error| {err:.2e} (tol 1e-6)",
        )

    def test_06_raw_correlation_scaling(self, capsys):
        devs = []
        ok = True
        for k, g in enumerate((0.3, 1.0 / SQRT2, 0.9)):
            report = run_session(_session(g_override=g, seed=6006 + k))
            expected = g * (-TSIRELSON)
            dev = abs(report.chsh.s - expected) / report.chsh.std_error
            devs.append(f"g={g:.4g}: {dev:.2f} sigma")
            ok = ok and dev <= 3.0
        _report(
            capsys, 6, ok,
            "raw CHSH scales as g times the quantum value",
            "; ".join(devs),
        )

    def test_07_forging_invisible_at_and_below_threshold(self, capsys):
        details = []
        ok = True
        for k, g in enumerate((0.65, 1.0 / SQRT2)):
            report = run_session(
                _session(
                    channel=ChannelKind.LHV_FORGE,
                    analysis=Analysis.POST_SELECTED,
                    rate_monitoring=True,
                    g_override=g,
                    seed=7007 + k,
                )
            )
            raw = _raw_estimate(report)
            hidden = abs(raw.s) <= 2.0 + 3.0 * raw.std_error
            undetected = report.decision is not Decision.EVE_DETECTED
            known = report.key is not None and report.key.eve_knowledge_fraction == 1.0
            ok = ok and hidden and undetected and known
            details.append(
                f"g={g:.4g}: raw |S|={abs(raw.s):.3f}, decision={report.decision.value}, "
                f"eve knows {report.key.eve_knowledge_fraction:.0%}"
            )
        _report(
            capsys, 7, ok,
            "forged sessions evade the security test with full key knowledge",
            "; ".join(details),
        )

    def test_08_forging_impossible_above_threshold(self, capsys):
        settings = tsirelson_settings()
        targets = settings.singlet_matrix().scaled(0.75)
        result = lhv_feasibility(targets, settings, Alphabet.PLUS_MINUS)
        infeasible = isinstance(result, Infeasible)
        primal_ok = False
        violation = float("nan")
        if infeasible:
            cert = result.certificate
            primal_ok = all(
                cert.evaluate(s.correlation_matrix()) <= cert.bound + 1e-9
                for s in enumerate_strategies(2, 2, Alphabet.PLUS_MINUS)
            )
            target_value = cert.evaluate(targets.entries)
            primal_ok = primal_ok and target_value > cert.bound + 1e-9
            violation = cert.violation
        ok = infeasible and primal_ok
        _report(
            capsys, 8, ok,
            "scaling 0.75 is certified unforgeable",
            f"infeasible={infeasible}, certificate re-verified over all 16 strategies="
            f"{primal_ok}, violation={violation:.6f}",
        )

    def test_09_post_selection_reopens_the_loophole(self, capsys):
        report = run_session(_session(g_override=0.5, seed=9009))
        raw = report.chsh
        classification = classify_pairs(report.config.settings)
        sifted = sift(report.records, report.config.settings)
        post = estimate_chsh(sifted.chsh_group, Analysis.POST_SELECTED, classification.chsh_block)
        raw_dev = abs(abs(raw.s) - SQRT2) / raw.std_error
        post_dev = abs(abs(post.s) - TSIRELSON) / post.std_error
        ok = raw_dev <= 3.0 and post_dev <= 3.0
        _report(
            capsys, 9, ok,
            "post-selection restores the full violation at g = 0.5",
            f"raw |S|={abs(raw.s):.4f} ({raw_dev:.2f} sigma from sqrt(2)), "
            f"post-selected |S|={abs(post.s):.4f} ({post_dev:.2f} sigma from 2*sqrt(2))",
        )

    def test_10_intercept_resend_statistics(self, capsys):
        settings = ekert_settings()
        report = run_session(
            _session(channel=ChannelKind.INTERCEPT_RESEND, seed=1010)
        )
        pair_ok = True
        worst_pair = 0.0
        for p in report.pair_stats:
            a = settings.alice_directions[p.alice_setting]
            b = settings.bob_directions[p.bob_setting]
            expected = intercept_resend_correlation(a, b)
            sigma = math.sqrt((1.0 - expected**2) / p.n_trials)
            dev = abs(p.raw_correlation - expected) / sigma
            worst_pair = max(worst_pair, dev)
            pair_ok = pair_ok and dev <= 3.0
        s_dev = abs(abs(report.chsh.s) - TSIRELSON / 3.0) / report.chsh.std_error
        qber_sigma = math.sqrt((1.0 / 3.0) * (2.0 / 3.0) / report.key.n_retained)
        qber_dev = abs(report.key.qber - 1.0 / 3.0) / qber_sigma
        ok = pair_ok and s_dev <= 3.0 and qber_dev <= 3.0
        _report(
            capsys, 10, ok,
            "intercept-resend shows diluted correlations and 1/3 error rate",
            f"worst pair deviation {worst_pair:.2f} sigma from -(a.b)/3, |S| "
            f"{abs(report.chsh.s):.4f} ({s_dev:.2f} sigma from 2*sqrt(2)/3), QBER "
            f"{report.key.qber:.4f} ({qber_dev:.2f} sigma from 1/3)",
        )

    def test_11_byte_identical_reruns(self, capsys, tmp_path):
        doc = {
            "schema_version": 1,
            "session": {"n_pairs": 50_000, "seed": 11_011},
            "packet": {"centers": [[0, 0, 0], [0, 0, 0]], "sigmas": 1.0, "time": 0.5},
            "regions": {
                "A": {"shape": "box", "center": [0, 0, 0], "halfwidths": [3, 3, 3]},
                "B": {"shape": "box", "center": [0, 0, 0], "halfwidths": [3, 3, 3]},
            },
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(doc), encoding="utf-8")
        codes = []
        for run_dir in ("one", "two"):
            codes.append(
                cli_main(
                    ["run", "--config", str(config_path), "--out", str(tmp_path / run_dir)]
                )
            )
        same = {}
        for name in ("report.json", "trials.csv"):
            a = (tmp_path / "one" / name).read_bytes()
            b = (tmp_path / "two" / name).read_bytes()
            same[name] = a == b
        ok = all(c == 0 for c in codes) and all(same.values())
        _report(
            capsys, 11, ok,
            "identical config and seed reproduce outputs byte for byte",
            f"exit codes {codes}, report.json identical: {same['report.json']}, "
            f"trials.csv identical: {same['trials.csv']}",
        )

"""Machine-readable report emission.

Every number is serialized with 17 significant digits so a reparse recovers
the in-memory double bit-exactly; the JSON emitter is hand-rolled to keep
that guarantee and a deterministic layout (insertion-ordered keys, fixed
indentation), which is what makes identical runs byte-identical on disk.
Infinities and NaN use the Python-parseable Infinity/NaN tokens.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .config import session_echo
from .lhv import BellCertificate, Feasible, FeasibilityResult, Infeasible
from .protocol import ChshEstimate, KeyResult, PairStat, RunReport
from .spatial import FORGEABLE_THRESHOLD, GEstimate
from .spin import CHSH_CLASSICAL_BOUND, CHSH_QUANTUM_BOUND

TRIALS_HEADER = "index,i,j,A,B"
SWEEP_HEADER = "value,g,S,std_error,qber,decision,forgeable_threshold,classical_bound"


def format_float(x: float) -> str:
    """17-significant-digit decimal form; round-trips any finite double."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def _emit(obj, out: list, level: int, indent: int) -> None:
    pad = " " * (indent * (level + 1))
    closing = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, key in enumerate(obj):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _emit(obj[key], out, level + 1, indent)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(closing + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for k, item in enumerate(seq):
            out.append(pad)
            _emit(item, out, level + 1, indent)
            out.append(",\n" if k < len(seq) - 1 else "\n")
        out.append(closing + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(obj, out, 0, indent)
    out.append("\n")
    return "".join(out)


def write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_json(path: str, obj) -> None:
    write_text(path, dumps(obj))


def gestimate_dict(est: GEstimate | None) -> dict | None:
    if est is None:
        return None
    return {
        "value": est.value,
        "std_error": est.std_error,
        "method": est.method,
        "samples_or_order": est.samples_or_order,
    }


def certificate_dict(cert: BellCertificate) -> dict:
    return {
        "coefficients": [list(map(float, row)) for row in cert.coefficients],
        "rate_coefficients": (
            None
            if cert.rate_coefficients is None
            else [list(map(float, row)) for row in cert.rate_coefficients]
        ),
        "bound": cert.bound,
        "target_value": cert.target_value,
        "violation": cert.violation,
    }


def feasibility_dict(result: FeasibilityResult) -> dict:
    if isinstance(result, Feasible):
        mixture = result.mixture
        return {
            "status": "feasible",
            "max_residual": result.max_residual,
            "mixture": {
                "alphabet": mixture.strategies[0].alphabet.name,
                "weights": [float(w) for w in mixture.weights],
                "strategies": [
                    {
                        "alice_outputs": list(s.alice_outputs),
                        "bob_outputs": list(s.bob_outputs),
                    }
                    for s in mixture.strategies
                ],
            },
        }
    assert isinstance(result, Infeasible)
    return {"status": "infeasible", "certificate": certificate_dict(result.certificate)}


def chsh_dict(est: ChshEstimate | None) -> dict | None:
    if est is None:
        return None
    return {
        "s": est.s,
        "std_error": est.std_error,
        "analysis": est.analysis.value,
        "sufficient": est.sufficient,
        "exceeds_quantum_bound": bool(abs(est.s) - 3.0 * est.std_error > CHSH_QUANTUM_BOUND),
        "pairs": [
            {
                "alice_setting": p.alice_setting,
                "bob_setting": p.bob_setting,
                "sign": p.sign,
                "n_included": p.n_included,
                "n_coincident": p.n_coincident,
                "correlation": p.correlation,
                "std_error": p.std_error,
            }
            for p in est.pairs
        ],
    }


def key_dict(key: KeyResult | None) -> dict | None:
    if key is None:
        return None
    return {
        "bits": key.alice_bits,
        "length": key.n_retained,
        "qber": key.qber,
        "eve_knowledge_fraction": key.eve_knowledge_fraction,
        "n_dropped": key.n_dropped,
    }


def pair_stat_dict(p: PairStat) -> dict:
    return {
        "alice_setting": p.alice_setting,
        "bob_setting": p.bob_setting,
        "group": p.group,
        "n_trials": p.n_trials,
        "n_coincident": p.n_coincident,
        "raw_correlation": p.raw_correlation,
        "post_selected_correlation": p.post_selected_correlation,
    }


def run_report_dict(report: RunReport, settings_spec=None) -> dict:
    return {
        "kind": "run",
        "config": session_echo(report.config, settings_spec),
        "g": {
            "value": report.g_used,
            "alice": report.g_alice,
            "bob": report.g_bob,
            "method": report.g_method,
            "estimate": gestimate_dict(report.g_estimate),
            "detectability": report.detectability.value,
        },
        "sift": {
            "chsh": report.sift_counts["chsh"],
            "key": report.sift_counts["key"],
            "discarded": report.sift_counts["discarded"],
        },
        "pairs": [pair_stat_dict(p) for p in report.pair_stats],
        "chsh": chsh_dict(report.chsh),
        "key": key_dict(report.key),
        "decision": report.decision.value,
        "notes": list(report.notes),
    }


def trials_csv(records) -> str:
    lines = [TRIALS_HEADER]
    for r in records:
        lines.append(
            f"{r.index},{r.alice_setting},{r.bob_setting},{r.alice_outcome},{r.bob_outcome}"
        )
    return "\n".join(lines) + "\n"


def sweep_row_dict(index: int, value: float, report: RunReport | None, error: str | None) -> dict:
    row = {
        "index": index,
        "value": value,
        "g": None,
        "s": None,
        "std_error": None,
        "qber": None,
        "decision": "error",
        "error": error,
    }
    if report is not None:
        row["g"] = report.g_used
        row["s"] = report.chsh.s if report.chsh is not None else None
        row["std_error"] = report.chsh.std_error if report.chsh is not None else None
        row["qber"] = report.key.qber if report.key is not None else None
        row["decision"] = report.decision.value
        row["error"] = None
    return row


def sweep_csv(rows) -> str:
    def cell(v) -> str:
        return format_float(float(v)) if v is not None else "nan"

    lines = [SWEEP_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                [
                    cell(row["value"]),
                    cell(row["g"]),
                    cell(row["s"]),
                    cell(row["std_error"]),
                    cell(row["qber"]),
                    row["decision"],
                    format_float(FORGEABLE_THRESHOLD),
                    format_float(CHSH_CLASSICAL_BOUND),
                ]
            )
        )
    return "\n".join(lines) + "\n"

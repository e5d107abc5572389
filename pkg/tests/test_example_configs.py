"""The committed schema and example configs stay consistent with the parser."""

import json
import math
import os

import jsonschema
import pytest

from e91space import cli
from e91space.config import ConfigError, build_config

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(REPO_ROOT, "configs")
EXAMPLES = ("honest.json", "lhv_forge.json", "intercept_resend.json")


def _load(name: str) -> dict:
    with open(os.path.join(CONFIG_DIR, name), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def schema() -> dict:
    return _load("schema.json")


class TestSchemaDocument:
    def test_schema_is_itself_valid(self, schema):
        jsonschema.Draft202012Validator.check_schema(schema)

    @pytest.mark.parametrize("name", EXAMPLES)
    def test_examples_satisfy_schema(self, schema, name):
        jsonschema.validate(_load(name), schema)

    @pytest.mark.parametrize("name", EXAMPLES)
    def test_examples_satisfy_parser(self, name):
        cfg = build_config(_load(name))
        assert cfg.session.n_pairs == 100_000

    def test_schema_and_parser_reject_the_same_documents(self, schema):
        bad_docs = [
            {},  # schema_version missing
            {"schema_version": 2, "session": {"g_override": 1.0}},  # wrong version
            {"schema_version": 1, "session": {"g_override": 1.5}},  # g out of range
            {"schema_version": 1, "session": {"g_override": 1.0, "bogus": 1}},
            {"schema_version": 1, "session": {}},  # no g source at all
            {  # packet without regions
                "schema_version": 1,
                "session": {},
                "packet": {"centers": [[0, 0, 0], [0, 0, 0]], "sigmas": 1.0},
            },
            {  # both g sources at once
                "schema_version": 1,
                "session": {"g_override": 0.5},
                "packet": {"centers": [[0, 0, 0], [0, 0, 0]], "sigmas": 1.0},
                "regions": {
                    "A": {"shape": "box", "center": [0, 0, 0], "halfwidths": [1, 1, 1]},
                    "B": {"shape": "box", "center": [0, 0, 0], "halfwidths": [1, 1, 1]},
                },
            },
            {  # unknown region shape
                "schema_version": 1,
                "session": {},
                "packet": {"centers": [[0, 0, 0], [0, 0, 0]], "sigmas": 1.0},
                "regions": {
                    "A": {"shape": "disk", "center": [0, 0, 0], "radius": 1.0},
                    "B": {"shape": "box", "center": [0, 0, 0], "halfwidths": [1, 1, 1]},
                },
            },
        ]
        for doc in bad_docs:
            with pytest.raises(jsonschema.ValidationError):
                jsonschema.validate(doc, schema)
            with pytest.raises(ConfigError):
                build_config(doc)


class TestExamplesRun:
    def test_honest_example(self, tmp_path):
        path = os.path.join(CONFIG_DIR, "honest.json")
        out = str(tmp_path / "run")
        assert cli.main(["run", "--config", path, "--out", out]) == 0
        report = json.loads((tmp_path / "run" / "report.json").read_text())
        assert report["decision"] == "secure_accept"
        assert report["g"]["method"] == "analytic"
        out = str(tmp_path / "gfactor")
        assert cli.main(["gfactor", "--config", path, "--out", out]) == 0
        gf = json.loads((tmp_path / "gfactor" / "report.json").read_text())
        assert gf["agreement"]["analytic_vs_quadrature"] is True
        assert gf["agreement"]["reference_vs_monte_carlo"] is True

    def test_lhv_forge_example(self, tmp_path):
        path = os.path.join(CONFIG_DIR, "lhv_forge.json")
        out = str(tmp_path / "run")
        assert cli.main(["run", "--config", path, "--out", out]) == 0
        report = json.loads((tmp_path / "run" / "report.json").read_text())
        # The forged session passes the post-selected security test even
        # though a local model produced every outcome.
        assert report["decision"] == "secure_accept"
        assert report["key"]["eve_knowledge_fraction"] == 1.0
        out = str(tmp_path / "threshold")
        assert cli.main(["lhv-threshold", "--config", path, "--out", out]) == 0
        th = json.loads((tmp_path / "threshold" / "report.json").read_text())
        assert th["thresholds"]["plus_minus"] == pytest.approx(
            1.0 / math.sqrt(2.0), abs=2e-6
        )

    def test_intercept_resend_example(self, tmp_path):
        path = os.path.join(CONFIG_DIR, "intercept_resend.json")
        out = str(tmp_path / "run")
        assert cli.main(["run", "--config", path, "--out", out]) == 0
        report = json.loads((tmp_path / "run" / "report.json").read_text())
        assert report["decision"] == "eve_detected"
        assert abs(report["key"]["qber"] - 1.0 / 3.0) < 0.02

    def test_forge_sweep_stays_inside_polytope(self, tmp_path):
        path = os.path.join(CONFIG_DIR, "lhv_forge.json")
        out = str(tmp_path / "sweep")
        assert cli.main(["sweep", "--config", path, "--out", out]) == 0
        report = json.loads((tmp_path / "sweep" / "report.json").read_text())
        # Every grid point lies at or below the forgeable threshold, so every
        # row must succeed, ending in a false accept.
        for row in report["rows"]:
            assert row["error"] is None
            assert row["decision"] == "secure_accept"

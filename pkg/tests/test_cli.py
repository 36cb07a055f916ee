import csv
import math
import io
import json
from contextlib import redirect_stdout

import pytest

from eikonal_entropy import checks
from eikonal_entropy.cli import ScenarioError, main, validate_report, validate_scenario
from eikonal_entropy.fields import load_field

CHECK_NAMES = [
    "entropy-condition", "chain-rule-vanishing", "jump-formula", "cubic-jump-cost", "small-jump-bound",
    "commutator-constants", "interpolation-bound", "sigma-support-sign", "gbeta-limit",
    "kinetic-consistency", "lp-reconstruction-duality", "besov-oracle", "jump-detection",
    "psi0-uniformity",
]


def _run(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


def _scenario(tmp_path, doc):
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_list_checks():
    code, out = _run(["list-checks"])
    assert code == 0
    lines = out.strip().splitlines()
    assert [ln.split("\t")[0] for ln in lines] == CHECK_NAMES
    assert all(ln.split("\t")[1] for ln in lines)
    assert list(checks.REGISTRY) == CHECK_NAMES


def test_constant_production(tmp_path):
    sc = _scenario(tmp_path, {"field": {"kind": "constant", "nx": 32, "theta": 0.4}})
    code, _ = _run(["production", "--scenario", sc, "--out", str(tmp_path / "o")])
    assert code == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    validate_report(doc)
    assert doc["production"][0]["total_variation"] == 0.0
    rows = list(csv.reader((tmp_path / "o" / "tables.csv").open()))
    assert rows[0] == ["section", "name", "key", "value"]
    assert any(r[0] == "production" for r in rows[1:])


def test_out_json_path_uses_parent(tmp_path):
    code, _ = _run(["production", "--field", '{"kind": "constant", "nx": 16}',
                    "--out", str(tmp_path / "x" / "report.json")])
    assert code == 0 and (tmp_path / "x" / "report.json").exists()


def test_scenario_errors(tmp_path, capsys):
    assert main(["production", "--scenario", _scenario(tmp_path, {"fild": {}})]) == 2
    assert "unknown key 'fild'" in capsys.readouterr().err
    sc = _scenario(tmp_path, {"field": {"kind": "jump", "nx": 16, "bta": 0.2}})
    assert main(["production", "--scenario", sc]) == 2
    assert "'bta'" in capsys.readouterr().err
    assert main(["verify", "--check", "no-such-check", "--out", str(tmp_path)]) == 2
    assert "no-such-check" in capsys.readouterr().err
    with pytest.raises(ScenarioError):
        validate_scenario({"field": {"kind": "spiral"}})


def test_check_exit_codes(tmp_path):
    code, out = _run(["verify", "--check", "entropy-condition", "--out", str(tmp_path / "a")])
    assert code == 0 and out.startswith("PASS entropy-condition")
    code, out = _run(["verify", "--check", "cubic-jump-cost", "--out", str(tmp_path / "b")])
    assert code == 1 and out.startswith("FAIL cubic-jump-cost")
    doc = json.loads((tmp_path / "b" / "report.json").read_text())
    assert doc["passed"] is False and doc["checks"][0]["name"] == "cubic-jump-cost"


def test_synth_roundtrip(tmp_path):
    code, _ = _run(["synth", "--field", '{"kind": "laminate", "nx": 64, "beta": 0.2}',
                    "--out", str(tmp_path)])
    assert code == 0
    assert load_field(tmp_path / "field").grid.nx == 64
    code, _ = _run(["besov", "--field", str(tmp_path / "field"), "--p", "2", "--rings", "2",
                    "--out", str(tmp_path / "b")])
    assert code == 0
    doc = json.loads((tmp_path / "b" / "report.json").read_text())
    # four interfaces of unit length: 2 sin(beta) 4^{1/2}
    assert doc["besov"]["value"] == pytest.approx(4 * math.sin(0.2), rel=1e-12)


def test_jumpset_and_kinetic(tmp_path):
    field = '{"kind": "jump", "nx": 256, "sbar": 0.0, "beta": 0.3}'
    ent = '{"kind": "trig", "sin": {"2": 1.0}, "name": "sin2s"}'
    code, _ = _run(["jumpset", "--field", field, "--entropy", ent, "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "report.json").read_text())["jumpset"]
    assert doc["precision"] >= 0.95 and doc["recall"] >= 0.95
    assert len(doc["segments"]) == 1
    assert doc["rectifiability"]["ratio"] == pytest.approx(1.0, abs=0.02)
    assert (tmp_path / "detected.csv").exists()
    code, _ = _run(["kinetic", "--field", field, "--psi", ent, "--ns", "2048", "--out", str(tmp_path / "k")])
    assert code == 0
    k = json.loads((tmp_path / "k" / "report.json").read_text())["kinetic"]
    assert k["relative_difference"] < 0.03
    assert k["profiles"][0]["tag"] == "jump-profile"


def test_deterministic(tmp_path):
    sc = _scenario(tmp_path, {"field": {"kind": "jump", "nx": 64}, "production": {"tests": 4}, "seed": 3})
    docs = []
    for d in ("r1", "r2"):
        assert _run(["production", "--scenario", sc, "--out", str(tmp_path / d)])[0] == 0
        docs.append(json.loads((tmp_path / d / "report.json").read_text()))
    assert docs[0]["production"] == docs[1]["production"]
    assert (tmp_path / "r1" / "production_0.csv").read_text() == (tmp_path / "r2" / "production_0.csv").read_text()


def test_validate_report_rejects_missing_key():
    with pytest.raises(ValueError, match="misses"):
        validate_report({"schema_version": 1})

from __future__ import annotations

import json
from pathlib import Path

import pytest

from simcompose.canon import canonical_json
from simcompose.cli import main

GOLDEN_REQUEST = Path(__file__).resolve().parents[1] / "src" / "simcompose" / "fixtures" / "golden_request.json"


@pytest.fixture()
def kb_paths(fixture_dir):
    return str(fixture_dir / "sea.json"), str(fixture_dir / "ship.json")


@pytest.fixture()
def composite_path(tmp_path, kb_paths) -> str:
    sea, ship = kb_paths
    assert main(["compose", "--kb", sea, "--kb", ship, "--out", str(tmp_path)]) == 0
    return str(tmp_path / "sea+ship.composite.json")


def test_validate_fixtures_ok(kb_paths, capsys):
    assert main(["validate", "--kb", kb_paths[0], "--kb", kb_paths[1]]) == 0
    out = capsys.readouterr().out
    assert "OK" in out


def test_validate_corrupted_edge(tmp_path, fixture_dir, capsys):
    doc = json.loads((fixture_dir / "sea.json").read_text())
    doc["edges"][0]["data"]["value"] = "near_water_wind"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", "--kb", str(bad)]) == 1
    assert "EDGE_CONDITION" in capsys.readouterr().out


def test_validate_missing_file():
    assert main(["validate", "--kb", "/nonexistent/x.json"]) == 2


def test_compose_writes_composite_with_transition(composite_path):
    doc = json.loads(Path(composite_path).read_text())
    assert len(doc["transitions"]) == 1
    assert doc["transitions"][0]["shared_value"] == "wave_spectrum"
    assert doc["provenance"]["models"]["t_wave_spectrum__grid2d__location"] == "transition"


def test_compose_single_class_usage_error(kb_paths):
    assert main(["compose", "--kb", kb_paths[0]]) == 1


def test_compose_unit_conflict(tmp_path, kb_paths, capsys):
    clash = tmp_path / "clash.json"
    clash.write_text(
        json.dumps(
            {
                "vso_class": "clash",
                "version": 1,
                "values": [{"id": "wave_spectrum", "variability": "var", "unit": "ft"}],
            }
        )
    )
    assert main(["compose", "--kb", kb_paths[0], "--kb", str(clash)]) == 1
    assert "UNIT_CONFLICT" in capsys.readouterr().err


def test_plan_golden_machine_output(composite_path, capsys):
    code = main(["plan", composite_path, str(GOLDEN_REQUEST), "--format", "machine"])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert len(body["plans"]) == 1
    assert [m for m, _ in body["plans"][0]["models"]] == [
        "sea_waves",
        "t_wave_spectrum__grid2d__location",
        "ship_behavior",
        "recommendation",
    ]


def test_plan_empty_provided_exit3(tmp_path, composite_path, capsys):
    request = json.loads(GOLDEN_REQUEST.read_text())
    request["provided"] = []
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(request))
    assert main(["plan", composite_path, str(path)]) == 3
    err = capsys.readouterr().err
    assert "blocked on" in err and "near_water_wind" in err


def test_plan_cap_truncation_flag(tmp_path, capsys):
    cls_doc = {
        "vso_class": "alts",
        "version": 1,
        "values": [
            {"id": "out", "variability": "var", "unit": ""},
            {"id": "feed", "variability": "var", "unit": ""},
        ],
        "models": [
            {
                "id": f"alt{i}",
                "inputs": [{"value": "feed", "basis": None}],
                "outputs": [{"value": "out", "basis": None}],
                "scenarios": [{"id": "d", "package_seq": [f"p{i}"]}],
                "packages": [f"p{i}"],
                "selected_scenario": "d",
            }
            for i in range(2)
        ],
    }
    cls_path = tmp_path / "alts.json"
    cls_path.write_text(json.dumps(cls_doc))
    request = {
        "mode": "analysis",
        "provided": [{"ref": {"value": "feed", "basis": None}, "payload": 1.0}],
        "requested": [{"value": "out", "basis": None}],
    }
    req_path = tmp_path / "req.json"
    req_path.write_text(json.dumps(request))
    assert main(["plan", str(cls_path), str(req_path), "--cap", "1", "--format", "machine"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["truncated"] is True
    assert len(body["plans"]) == 1
    assert main(["plan", str(cls_path), str(req_path), "--cap", "1"]) == 0
    assert "(truncated)" in capsys.readouterr().out


def test_run_golden(tmp_path, composite_path, capsys):
    out_dir = tmp_path / "runs"
    code = main(
        ["run", composite_path, str(GOLDEN_REQUEST), "--out", str(out_dir), "--format", "machine"]
    )
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["status"] == "succeeded"
    values = {(v["ref"]["value"], v["ref"]["basis"]): v["payload"] for v in body["values"]}
    assert values[("recommendation", None)] == "hold_course"
    written = list(out_dir.glob("run-*.json"))
    assert len(written) == 1
    assert json.loads(written[0].read_text()) == body


def test_run_missing_stub_exit1(composite_path, capsys):
    code = main(
        ["run", composite_path, str(GOLDEN_REQUEST), "--registry", "randgen:partial_registry"]
    )
    assert code == 1
    assert "MISSING_PACKAGE" in capsys.readouterr().err


def test_run_failing_stub_exit4(tmp_path, composite_path):
    request = json.loads(GOLDEN_REQUEST.read_text())
    for entry in request["provided"]:
        if entry["ref"]["value"] == "near_water_wind":
            entry["payload"] = -5.0
    req_path = tmp_path / "neg.json"
    req_path.write_text(json.dumps(request))
    out_dir = tmp_path / "runs"
    assert main(["run", composite_path, str(req_path), "--out", str(out_dir)]) == 4
    written = list(out_dir.glob("run-*.json"))
    assert len(written) == 1
    doc = json.loads(written[0].read_text())
    assert doc["status"] == "failed"
    assert doc["failure"]["block"] == "sea_waves"


def test_compose_stdout_is_canonical(kb_paths, capsys):
    assert main(["compose", "--kb", kb_paths[0], "--kb", kb_paths[1]]) == 0
    out = capsys.readouterr().out
    assert out == canonical_json(json.loads(out))

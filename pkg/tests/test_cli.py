import json
from pathlib import Path

import numpy as np
import pytest

from tga.cli import main
from tga.synth import planted_config

ROOT = Path(__file__).resolve().parent.parent
DEMO = ROOT / "configs" / "demo.synth.config.json"


def planted_json(tmp_path, **changes):
    cfg = planted_config(n_events=1000)
    data = {
        "session_id": "planted",
        "codes": [str(c) for c in cfg.codes],
        "transition": np.asarray(cfg.transition).tolist(),
        "n_events": cfg.n_events,
        "seed": 0,
    }
    data.update(changes)
    p = tmp_path / "planted.json"
    p.write_text(json.dumps(data))
    return p


def test_no_arguments_is_usage_error():
    assert main([]) == 2


def test_validate_valid_file(tmp_path, session_lines, capsys):
    f = tmp_path / "a.session.jsonl"
    f.write_text("\n".join(session_lines) + "\n")
    assert main(["validate", str(f)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["violations"] == []


def test_validate_timestamp_violation(tmp_path, session_lines, capsys):
    late = json.dumps({"kind": "event", "t_ms": 9000, "actor": "teacher", "code": "t_focal_remembering"})
    f = tmp_path / "late.session.jsonl"
    f.write_text("\n".join(session_lines + [late]) + "\n")
    assert main(["validate", str(f)]) == 1
    out = json.loads(capsys.readouterr().out)
    assert [v["rule"] for v in out["violations"]] == ["timestamp_out_of_range"]


def test_validate_missing_file():
    assert main(["validate", "/nonexistent/x.jsonl"]) == 2


def test_synth_deterministic(tmp_path):
    cfg = planted_json(tmp_path)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["synth", str(cfg), "--seed", "42", "--out", str(a)]) == 0
    assert main(["synth", str(cfg), "--seed", "42", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["validate", str(a)]) == 0


def test_synth_bad_row(tmp_path, capsys):
    T = np.asarray(planted_config().transition).tolist()
    T[1][1] += 0.2
    cfg = planted_json(tmp_path, transition=T)
    assert main(["--json-errors", "synth", str(cfg), "--out", str(tmp_path / "x.jsonl")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InvalidStochasticMatrix"
    assert err["exit_code"] == 2


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert main(["synth", str(DEMO), "--sessions", "3", "--out", str(d)]) == 0
    return sorted(str(p) for p in d.glob("*.session.jsonl"))


def test_analyze_writes_outputs(corpus, tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", *corpus, "--out", str(out), "--network-z", "3", "--workers", "1"]) == 0
    assert {p.name for p in out.iterdir()} == {"report.json", "report.html", "lsa.json", "gaze.json"}
    report = json.loads((out / "report.json").read_text())
    assert report["corpus"]["sessions"] == 3
    assert report["feedback"][0]["id"] == "summary"
    edges = report["lsa"]["network"]["edges"]
    assert edges and all(e["z"] >= 3 for e in edges)


def test_analyze_network_z_ten(corpus, tmp_path):
    out = tmp_path / "out"
    assert main(["analyze", *corpus, "--out", str(out), "--network-z", "10"]) == 0
    edges = json.loads((out / "report.json").read_text())["lsa"]["network"]["edges"]
    assert all(e["z"] >= 10 for e in edges)


def test_analyze_unwritable_out(corpus, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--json-errors", "analyze", corpus[0], "--out", str(blocker / "out")]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 3


def test_analyze_invalid_input(tmp_path, session_lines):
    bad = tmp_path / "bad.session.jsonl"
    bad.write_text("\n".join(session_lines[1:]) + "\n")
    assert main(["analyze", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_analyze_rules_file(corpus, tmp_path):
    rules = tmp_path / "rules.json"
    rules.write_text(json.dumps([{"id": "always", "metric": "corpus.sessions", "comparator": ">=",
                                  "threshold": 1, "template": "{value:.0f} sessions"}]))
    out = tmp_path / "out"
    assert main(["analyze", *corpus, "--out", str(out), "--rules", str(rules)]) == 0
    ids = [m["id"] for m in json.loads((out / "report.json").read_text())["feedback"]]
    assert ids == ["summary", "always"]

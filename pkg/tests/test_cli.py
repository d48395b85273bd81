import json

import pytest

from dataflow_scope.cli import main
from dataflow_scope.trace import LayerTotals, read_trace


def _run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


@pytest.fixture
def alexnet_os(tmp_path, capsys):
    trace = tmp_path / "alex.jsonl"
    rc, _, _ = _run(capsys, "simulate", "--model", "alexnet", "--arch", "os", "--m", "10", "--n", "4",
                    "--out", str(trace))
    assert rc == 0
    return trace


def test_simulate_alexnet_os_conv1_totals(alexnet_os):
    tot = [r for r in read_trace(alexnet_os) if isinstance(r, LayerTotals)]
    assert (tot[0].W_r, tot[0].O_w) == (2927232, 290400)


def test_simulate_full_lenet_with_oracle_check(tmp_path, capsys):
    trace = tmp_path / "lenet.jsonl"
    rc, out, _ = _run(capsys, "simulate", "--model", "lenet", "--arch", "ws", "--m", "4", "--n", "4",
                      "--mode", "full", "--out", str(trace), "--oracle-check")
    assert rc == 0 and "MISMATCH" not in out and out.count(": ok") == 3
    assert sum(1 for _ in read_trace(trace)) > 0


def test_attack_verify_alexnet_os(alexnet_os, tmp_path, capsys):
    report = tmp_path / "r.json"
    rc, out, _ = _run(capsys, "attack", "--trace", str(alexnet_os), "--ifmap", "227x227x3", "--out", str(report))
    assert rc == 0 and "structures: 1" in out
    rc, out, _ = _run(capsys, "verify", "--report", str(report), "--model", "alexnet")
    assert rc == 0 and out.strip() == "match"


def test_attack_vgg16_ws_24_10(tmp_path, capsys):
    trace = tmp_path / "vgg.jsonl"
    assert _run(capsys, "simulate", "--model", "vgg16", "--arch", "ws", "--m", "24", "--n", "10",
                "--out", str(trace))[0] == 0
    rc, out, _ = _run(capsys, "attack", "--trace", str(trace), "--ifmap", "224x224x3")
    assert rc == 0 and "structures: 1" in out


def test_verify_reports_first_differing_field(alexnet_os, tmp_path, capsys):
    report = tmp_path / "r.json"
    _run(capsys, "attack", "--trace", str(alexnet_os), "--ifmap", "227x227x3", "--out", str(report))
    d = json.loads(report.read_text())
    d["structures"][0][0]["pd"] += 1
    report.write_text(json.dumps(d))
    rc, out, _ = _run(capsys, "verify", "--report", str(report), "--model", "alexnet")
    assert rc == 1 and out.strip() == "mismatch: conv1.pd"


def test_verify_empty_report(tmp_path, capsys):
    report = tmp_path / "empty.json"
    report.write_text(json.dumps({"layers": [], "structures": [], "audit": []}))
    rc, out, _ = _run(capsys, "verify", "--report", str(report), "--model", "lenet")
    assert rc == 1 and out.strip() == "mismatch: no structures"


def test_attack_truncated_prefix(alexnet_os, tmp_path, capsys):
    lines = alexnet_os.read_text().splitlines(True)
    # drop every cycle of the first layer after cycle 1
    first_totals = next(k for k, ln in enumerate(lines) if '"layer_totals"' in ln)
    kept = [ln for k, ln in enumerate(lines)
            if k >= first_totals or '"type":"cycle' not in ln or '"t":1,' in ln]
    cut = tmp_path / "cut.jsonl"
    cut.write_text("".join(kept))
    rc, _, err = _run(capsys, "attack", "--trace", str(cut), "--ifmap", "227x227x3")
    assert rc != 0 and "TruncatedTrace" in err


def test_attack_failure_prints_audit(tmp_path, capsys):
    trace = tmp_path / "a.jsonl"
    _run(capsys, "simulate", "--model", "alexnet", "--arch", "os", "--m", "10", "--n", "4", "--out", str(trace))
    rc, _, err = _run(capsys, "attack", "--trace", str(trace), "--ifmap", "224x224x3")
    assert rc == 1 and "recovery failed" in err and '"check"' in err


def test_simulate_and_attack_are_byte_deterministic(tmp_path, capsys):
    paths = []
    for k in range(2):
        t, r = tmp_path / f"t{k}.jsonl", tmp_path / f"r{k}.json"
        _run(capsys, "simulate", "--model", "lenet", "--arch", "os", "--m", "4", "--n", "4", "--out", str(t))
        _run(capsys, "attack", "--trace", str(t), "--ifmap", "32x32x1", "--out", str(r))
        paths.append((t.read_bytes(), r.read_bytes()))
    assert paths[0] == paths[1]


def test_matrix_filters(capsys, monkeypatch):
    monkeypatch.setenv("DATAFLOW_SCOPE_THREADS", "2")
    rc, out, _ = _run(capsys, "matrix", "--models", "lenet")
    rows = out.strip().splitlines()
    assert rc == 0 and len(rows) == 2 and rows[1] == "lenet,1,1,1,1,1,1"
    rc, out, _ = _run(capsys, "matrix", "--arch", "os")
    cells = [c for row in out.strip().splitlines()[1:] for c in row.split(",")[1:]]
    assert rc == 0 and cells == ["1"] * 9


def test_fuzz_command(capsys):
    rc, out, _ = _run(capsys, "fuzz", "--seed", "7", "--count", "40")
    assert rc == 0 and "sound: 40/40" in out


def test_geometry_error_diagnostic(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "bad", "input": [8, 8, 1],
                               "layers": [{"type": "conv", "R": 3, "C": 1, "K": 1, "st": 2, "pd": 0}]}))
    rc, _, err = _run(capsys, "simulate", "--model-file", str(bad), "--arch", "ws", "--m", "4", "--n", "4",
                      "--out", str(tmp_path / "x.jsonl"))
    assert rc != 0 and "InvalidGeometry" in err

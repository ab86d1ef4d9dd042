import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tiltx.analysis import synthetic_log, write_pose_log
from tiltx.cli import run
from tiltx.geometry import GEOMETRY_ENV, Geometry
from tiltx.se3core import matrix_to_quat
from tiltx.workspace import slice_targets


def _run(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def test_fk_straight_down():
    code, text = _run("fk", "--kappa", "0", "--phi-deg", "0", "--alpha-deg", "0", "--beta", "0")
    assert code == 0
    doc = json.loads(text)
    assert doc["translation"] == [0.0, 0.0, -515.0]
    assert doc["norm_mm"] == 515.0
    # straight arc: the tip frame's y and z axes point opposite the hinge's
    assert doc["rotation"] == [[1, 0, 0], [0, -1, 0], [0, 0, -1]]


def test_fk_full_reach():
    code, text = _run("fk", "--alpha-deg", "90", "--beta", "75", "--kappa", "0")
    assert code == 0
    assert json.loads(text)["norm_mm"] == pytest.approx(590.0, abs=1e-6)


def test_fk_range_violation():
    assert _run("fk", "--beta", "80")[0] == 1
    assert _run("fk", "--alpha-deg", "100")[0] == 1


def test_unknown_flag_and_missing_subcommand(capsys):
    assert _run("fk", "--bogus", "1")[0] == 1
    assert _run()[0] == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 2 and err.startswith("tiltx: ")


def test_geometry_dump_round_trips():
    code, text = _run("geometry", "--dump")
    assert code == 0
    assert Geometry.from_dict(json.loads(text)) == Geometry()


def test_geometry_flag_beats_environment(tmp_path, monkeypatch):
    short = tmp_path / "short.json"
    short.write_text(json.dumps({**Geometry().to_dict(), "L": 300.0}))
    other = tmp_path / "other.json"
    other.write_text(json.dumps({**Geometry().to_dict(), "L": 200.0}))
    monkeypatch.setenv(GEOMETRY_ENV, str(other))
    assert json.loads(_run("fk")[1])["norm_mm"] == pytest.approx(331.0)
    assert json.loads(_run("--geometry", str(short), "fk")[1])["norm_mm"] == pytest.approx(431.0)


def test_bad_geometry_file(tmp_path):
    bad = tmp_path / "g.json"
    bad.write_text("{not json")
    assert _run("--geometry", str(bad), "fk")[0] == 1
    assert _run("--geometry", str(tmp_path / "missing.json"), "fk")[0] == 1


def test_ik_success_and_nonconvergence():
    code, text = _run("ik", "--x", "-590", "--y", "0", "--z", "0")
    assert code == 0
    assert json.loads(text)["residual_mm"] < 0.1
    assert _run("ik", "--x", "0", "--y", "0", "--z", "-700")[0] == 2


def test_plan_itemizes_terms():
    code, text = _run("plan", "--from", "0,0,0,0", "--to", "0.002,30,45,20")
    assert code == 0
    doc = json.loads(text)
    for key in ("dq_rad", "dq_rev", "cable_tilt_mm", "cable_tele_mm", "cable_bend_mm"):
        assert len(doc[key]) == (5 if key.startswith("dq") else 3)
    total = np.add(np.add(doc["cable_tilt_mm"], doc["cable_tele_mm"]), doc["cable_bend_mm"])
    np.testing.assert_allclose(total, doc["cable_total_mm"], atol=2e-6)
    assert doc["dq_rev"][3] == pytest.approx(35 * 45 / 360)
    assert _run("plan", "--from", "0,0,0", "--to", "0,0,0,0")[0] == 1


def test_workspace_stats_and_file(tmp_path):
    out = tmp_path / "cloud.ply"
    code, text = _run("workspace", "--grid", "5x8x5x3", "--out", str(out), "--workers", "2")
    assert code == 0
    doc = json.loads(text)
    assert doc["points"] == 600
    assert doc["max_reach_mm"] == pytest.approx(590.0, abs=1e-6)
    assert out.read_text().startswith("ply\n")
    assert _run("workspace", "--grid", "5x8x5")[0] == 1


def test_slices_default_48_rows(tmp_path):
    out = tmp_path / "targets.csv"
    code, _ = _run("slices", "--phi-step", "30", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 49
    assert lines[1].split(",")[0] == "P1" and lines[-1].split(",")[0] == "P48"


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _run("workspace", "--grid", "3x4x3x2", "--out", str(a))
    _run("workspace", "--grid", "3x4x3x2", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    assert _run("plan", "--from", "0,0,0,0", "--to", "0.003,60,30,10") == _run("plan", "--from", "0,0,0,0", "--to", "0.003,60,30,10")


def test_error_leaves_no_partial_file(tmp_path):
    out = tmp_path / "targets.csv"
    assert _run("slices", "--offsets", "384", "500", "--out", str(out))[0] == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []
    assert _run("slices", "--out", str(tmp_path / "missing" / "t.csv"))[0] == 1


@pytest.fixture
def experiment(tmp_path, g):
    targets = slice_targets(g)
    tpath = tmp_path / "targets.csv"
    assert _run("slices", "--out", str(tpath))[0] == 0
    refs = {t.id: (t.pose.translation, matrix_to_quat(t.pose.rotation)) for t in targets[:4]}
    base = synthetic_log(refs)
    test = synthetic_log(refs, offsets={tid: [0.0, 3.0, 4.0] for tid in refs})
    write_pose_log(base, tmp_path / "base.csv")
    write_pose_log(test, tmp_path / "test.csv")
    return tmp_path


def test_analyze_baseline_mode(experiment):
    d = experiment
    out = d / "stats.csv"
    code, _ = _run("analyze", "--mode", "baseline", "--targets", str(d / "targets.csv"),
                   "--log", str(d / "test.csv"), "--baseline", str(d / "base.csv"), "--out", str(out))
    assert code == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 5
    assert rows[1].split(",")[:4] == ["P1", "1001", "5.000000", "0.000000"]


def test_analyze_model_mode(experiment, capsys):
    d = experiment
    out = d / "stats.csv"
    code, _ = _run("analyze", "--mode", "model", "--targets", str(d / "targets.csv"),
                   "--log", str(d / "test.csv"), "--out", str(out))
    assert code == 0
    for row in out.read_text().splitlines()[1:]:
        assert float(row.split(",")[2]) == pytest.approx(5.0, abs=1e-5)
    assert "gap report" in capsys.readouterr().err


def test_analyze_input_errors(experiment):
    d = experiment
    base = ["analyze", "--targets", str(d / "targets.csv"), "--log", str(d / "test.csv"), "--out", str(d / "s.csv")]
    assert _run(*base, "--mode", "baseline")[0] == 1
    assert _run(*base[:4], str(d / "nope.csv"), *base[5:], "--mode", "model")[0] == 1
    (d / "bad.csv").write_text("a,b\n1,2\n")
    assert _run(*base[:4], str(d / "bad.csv"), *base[5:], "--mode", "model")[0] == 1
    assert not (d / "s.csv").exists()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tiltx", "fk", "--alpha-deg", "90", "--beta", "75"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["translation"] == [-590.0, 0.0, 0.0]
    proc = subprocess.run([sys.executable, "-m", "tiltx", "ik", "--x", "0", "--y", "0", "--z", "-700"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 2

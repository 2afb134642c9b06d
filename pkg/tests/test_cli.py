import json
import subprocess
import sys

import pytest

from interlacements import __version__
from interlacements.cli import run


def _run(args, capsys):
    code = run(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_green_point(capsys):
    code, out, err = _run(["green", "--dim", "3", "--point", "0,0,0"], capsys)
    assert code == 0
    assert "0 0 0,1.51638605915" in out
    assert "g(0,0,0) = 1.51638605915" in err


def test_validation_exit_code(capsys):
    assert _run(["green", "--dim", "2", "--point", "0,0"], capsys)[0] == 1
    assert _run(["green", "--point", "0,0,0", "--radius", "2"], capsys)[0] == 1
    assert _run(["nosuch"], capsys)[0] == 1
    assert _run([], capsys)[0] == 1
    assert _run(["sample", "--u", "1,0.5"], capsys)[0] == 1
    assert _run(["curve", "--u", "1", "--L", "0"], capsys)[0] == 1


def test_runtime_exit_code(capsys, tmp_path):
    code, _, err = _run(["green", "--point", "0,0,0", "-o", str(tmp_path / "no" / "x.csv")], capsys)
    assert code == 2 and "error" in err


def test_sample_zero_level(capsys, tmp_path):
    f = tmp_path / "s.csv"
    code, out, _ = _run(["sample", "--u", "0", "--radius", "2", "--replicas", "2",
                         "-o", str(f)], capsys)
    assert code == 0 and "occupied set empty" in out
    rows = [r for r in f.read_text().splitlines() if not r.startswith("#")]
    assert rows[0] == "replica,u,occupied,trajectories,bias_budget"
    assert rows[1:] == ["0,0,0,0,0", "1,0,0,0,0"]


def test_metadata_header(capsys, tmp_path):
    f = tmp_path / "c.json"
    run(["cap", "--ball", "1", "--format", "json", "-o", str(f)])
    doc = json.loads(f.read_text())
    assert doc["meta"]["version"] == __version__
    assert doc["meta"]["config"]["ball"] == 1
    assert doc["result"]["capacity"] == pytest.approx(3.15620584387, abs=1e-11)


def test_workers_do_not_change_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["curve", "--u", "0.5,1", "--L", "2,3", "--geometry", "sphere", "--replicas", "12",
            "--seed", "42"]
    assert run(args + ["--workers", "1", "-o", str(a)]) == 0
    assert run(args + ["--workers", "3", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nu = 0.5\nL = 2,3,4\nreplicas = 9\ngeometry = sphere\n")
    f = tmp_path / "o.json"
    assert run(["curve", "--config", str(cfg), "--replicas", "5", "--format", "json",
                "-o", str(f)]) == 0
    meta = json.loads(f.read_text())["meta"]["config"]
    assert meta["replicas"] == 5 and meta["L"] == [2, 3, 4] and meta["geometry"] == "sphere"
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert _run(["curve", "--config", str(bad)], capsys)[0] == 1


def test_workers_env(monkeypatch, capsys):
    monkeypatch.setenv("INTERLACEMENTS_WORKERS", "zero")
    assert _run(["sample", "--u", "0", "--radius", "1"], capsys)[0] == 1


def test_certify_strict(capsys, tmp_path):
    base = ["certify", "--u0", "1", "--r0", "40", "--K0", "10", "--p0-high", "1e-6"]
    assert _run(base + ["--ell0", "10"], capsys)[0] == 1
    f = tmp_path / "cert.json"
    assert run(base + ["--ell0", "10", "--allow-relaxed", "--format", "json", "-o", str(f)]) == 0
    assert run(base + ["--format", "json", "-o", str(f)]) == 0
    doc = json.loads(f.read_text())["result"]
    assert doc["conditions"] == {"scale": True, "p0": True}
    assert len(doc["K_n"]) == 31


def test_renorm_geom(capsys):
    code, out, err = _run(["renorm-geom", "--n", "0"], capsys)
    assert code == 0 and "h1=488 h2=2168" in err


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "interlacements.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout

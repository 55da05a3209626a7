import json

import pytest

from cdlcal.cli import main
from cdlcal.transcript import read_transcript


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_fixture_and_metrics(tmp_path, capsys):
    path = tmp_path / "intro.csv"
    assert run(capsys, "fixture", "intro_miscal", "--out", str(path))[0] == 0
    code, out = run(capsys, "metrics", str(path), "--witness")
    assert code == 0
    d = json.loads(out.out)
    assert d["ece"] == pytest.approx(0.2)
    assert d["vcdl"] == pytest.approx(1 / 6)
    assert d["witness"]["vcdl_mu"] == pytest.approx(0.4)


def test_metrics_subset(tmp_path, capsys):
    path = tmp_path / "ex43.csv"
    run(capsys, "fixture", "ex43", "--out", str(path))
    code, out = run(capsys, "metrics", str(path), "--metrics", "cdl,ucal")
    d = json.loads(out.out)
    assert set(d) == {"T", "m", "cdl", "ucal"}


def test_simulate(tmp_path, capsys):
    out = tmp_path / "run.csv"
    trace = tmp_path / "trace.csv"
    code, res = run(capsys, "simulate", "--T", "64", "--adversary", "greedy", "--seed", "2", "--out", str(out),
                    "--trace", str(trace))
    assert code == 0
    assert read_transcript(out).T == 64
    assert json.loads(res.out)["max_h_minus_eps"] <= 1e-12
    assert trace.read_text().startswith("t,p_tilde")


def test_sweep_check_exit_code(tmp_path, capsys):
    # a single T leaves the slope undefined, so --check must fail
    code, res = run(capsys, "sweep", "--T", "64", "--seeds", "1", "--adversaries", "iid:0.5",
                    "--out-dir", str(tmp_path), "--check")
    assert code == 1
    assert (tmp_path / "sweep.csv").exists()
    code, _ = run(capsys, "sweep", "--T", "64", "--seeds", "1", "--adversaries", "iid:0.5",
                  "--out-dir", str(tmp_path))
    assert code == 0


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2.0,1\n")
    code, res = run(capsys, "metrics", str(bad))
    assert code == 2
    assert "error" in res.err
    assert run(capsys, "fixture", "intro_cal", "--T", "8")[0] == 2

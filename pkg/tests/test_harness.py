import math

import pytest

from cdlcal import harness
from cdlcal.metrics import compute_report


@pytest.mark.parametrize("name", sorted(harness.FIXTURES))
def test_fixtures_build(name):
    t = harness.fixture(name)
    assert t.T > 0


def test_fixture_errors():
    with pytest.raises(harness.FixtureError):
        harness.fixture("missing")
    with pytest.raises(harness.FixtureError):
        harness.intro_miscal(T=8)
    with pytest.raises(harness.FixtureError):
        harness.ex41b(T=50)
    with pytest.raises(harness.FixtureError):
        harness.ex43(T=7)


def test_fixture_values():
    r = compute_report(harness.ex43())
    assert r.cdl == pytest.approx(0.25, abs=1e-9)
    assert r.ucal == pytest.approx(0.0, abs=1e-9)
    assert r.vcdl == pytest.approx(1 / 6, abs=1e-9)
    r = compute_report(harness.ex41a(eps=0.1))
    # a single bucket at 0.9 with state 1: the best rule gains 0.1 / 0.9
    assert r.cdl == pytest.approx(1 / 9, abs=1e-9)
    assert compute_report(harness.intro_cal()).cdl == pytest.approx(0.0, abs=1e-12)


def test_empty_sweep_rejected():
    with pytest.raises(ValueError):
        harness.rate_report(harness.SweepResult([]))


def test_single_T_has_no_slope():
    sr = harness.sweep([64], ["iid:0.5"], [0])
    rep = harness.rate_report(sr)
    assert rep["slope"] is None
    assert rep["checks"]["slope"] is None
    assert not harness.rate_passed(rep)


def test_sweep_csv_is_byte_identical_and_round_trips(tmp_path):
    a = harness.sweep([64, 128], ["greedy", "iid:0.5", "alternate"], [0, 1])
    b = harness.sweep([64, 128], ["greedy", "iid:0.5", "alternate"], [0, 1])
    assert a.to_csv() == b.to_csv()
    back = harness.SweepResult.from_csv(a.to_csv())
    assert back.to_csv() == a.to_csv()
    assert back.summary() == a.summary()
    harness.write_sweep(a, tmp_path)
    assert (tmp_path / "sweep.csv").read_text() == a.to_csv()
    assert (tmp_path / "summary.json").exists()


def test_failed_cell_is_recorded():
    rec = harness.run_cell(16, "bogus", 0)
    assert rec.error and math.isnan(rec.cdl)
    sr = harness.SweepResult([rec, harness.run_cell(32, "iid:0.5", 0)])
    assert harness.rate_report(sr)["checks"]["no_failures"] is False


def test_normalized_statistic():
    sr = harness.sweep([256, 1024], ["iid:0.5"], [0])
    rep = harness.rate_report(sr)
    e = rep["envelope_cdl"]
    assert rep["normalized"][0] == pytest.approx(e[0] * 16 / 8)
    assert rep["reference_T"] == 1024
    assert rep["normalized_ratio"] == pytest.approx(1.0)

import numpy as np
import pytest
from sklearn.base import clone

from cdlcal.estimators import CalibrationAuditor, CDLForecaster, GridSnapper
from cdlcal.metrics import compute_report
from cdlcal.transcript import Grid, Transcript


def data(seed=0, n=300):
    rng = np.random.default_rng(seed)
    p = rng.random(n)
    y = (rng.random(n) < p).astype(int)
    return p, y


def test_auditor_matches_compute_report():
    p, y = data()
    aud = CalibrationAuditor(grid_size=10).fit(p.reshape(-1, 1), y)
    rep = compute_report(Transcript(p, y), Grid(10))
    assert aud.cdl_ == pytest.approx(rep.cdl)
    assert aud.ece_ == pytest.approx(rep.ece)
    assert aud.score(p, y) == pytest.approx(-rep.cdl)
    assert aud.n_features_in_ == 1
    assert clone(aud).get_params() == aud.get_params()


def test_auditor_rejects_multicolumn():
    p, y = data()
    with pytest.raises(ValueError):
        CalibrationAuditor().fit(np.c_[p, p], y)


def test_snapper():
    out = GridSnapper(4).fit_transform(np.array([0.0, 0.3, 0.5, 0.9]))
    assert out.ravel().tolist() == [0.25, 0.5, 0.5, 1.0]


def test_forecaster_online_matches_batch():
    ys = np.arange(40) % 2
    online = CDLForecaster(horizon=40, random_state=3)
    for y in ys:
        p = online.predict()
        assert p == online.predict()  # stable until the outcome arrives
        online.partial_fit(y)
    batch = CDLForecaster(random_state=3).fit(ys)
    assert np.array_equal(online.transcript.predictions, batch.predictions_)
    with pytest.raises(ValueError):
        online.partial_fit(2)

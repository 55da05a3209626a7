import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cdlcal.adversary import (GreedyAdversary, IIDAdversary, ScriptedAdversary, ScriptExhausted, parse_adversary,
                              read_script)
from cdlcal.predictor import (PredictionDistribution, PredictorConfig, UnsupportedMode, default_grid_size,
                              h_value, nearest_grid_value, round_distribution, run_algorithm1,
                              run_truthful_baseline)
from cdlcal.transcript import Grid, bucketize


def test_default_grid_size():
    assert default_grid_size(256) == round(16 / np.log(256))
    assert default_grid_size(2 ** 14) == 13
    assert default_grid_size(4) == 2


def test_distribution_validation():
    with pytest.raises(ValueError):
        PredictionDistribution((0.2, 0.4), (0.5, 0.4))
    with pytest.raises(ValueError):
        PredictionDistribution((1.2,), (1.0,))
    assert PredictionDistribution((0.2, 0.4), (0.5, 0.5)).mean() == pytest.approx(0.3)


@given(st.integers(2, 12).flatmap(lambda m: arrays(float, (m, 2), elements=st.floats(0, 1))),
       st.floats(1e-6, 0.5))
def test_round_distribution_keeps_h_below_eps(w, eps):
    m = w.shape[0]
    w = w / max(1.0, w.sum())
    dist = round_distribution(w, Grid(m), eps)
    assert h_value(dist, w, m) <= eps + 1e-12


def test_round_distribution_cases():
    g = Grid(4)
    w = np.array([[0.1, 0.1], [0.2, 0.0], [0.0, 0.1], [0.0, 0.0]])
    assert round_distribution(w, g, 0.01).points == (0.25,)
    w = np.array([[0.2, 0.0], [0.2, 0.0], [0.0, 0.1], [0.0, 0.3]])
    d = round_distribution(w, g, 0.01)
    assert d.points == (0.5, 0.51)
    assert d.probs[0] == pytest.approx(0.1 / 0.3)
    assert round_distribution(np.tile([0.2, 0.0], (4, 1)), g, 0.01).points == (0.0,)
    assert round_distribution(np.tile([0.0, 0.2], (4, 1)), g, 0.01).points == (1.0,)


def test_golden_transcript():
    # round 1: all weights equal, so every bucket coefficient is zero and the
    # point mass sits on q_1 = 1/2. The state 1 makes expert (1, -1) gain,
    # so round 2 has c_1 < 0 = c_2 and the point mass moves to q_2 = 1.
    t, trace = run_algorithm1(PredictorConfig(T=2, m=2, seed=0), ScriptedAdversary([1, 0]))
    assert t.predictions.tolist() == [0.5, 1.0]
    assert t.states.tolist() == [1, 0]
    assert trace.gain == [-0.5, 1.0]
    assert trace.max_h_excess <= 0


@pytest.mark.parametrize("adv", ["iid:0.3", "greedy", "alternate"])
def test_simulation_h_within_eps_and_deterministic(adv):
    cfg = PredictorConfig(T=300, seed=4)
    t1, tr1 = run_algorithm1(cfg, parse_adversary(adv, seed=[4, 1], T=300))
    t2, _ = run_algorithm1(cfg, parse_adversary(adv, seed=[4, 1], T=300))
    assert t1 == t2
    assert tr1.max_h_excess <= 1e-12
    assert set(np.unique(t1.predictions)) <= set(cfg.grid.values)


def test_trace_csv(tmp_path):
    _, trace = run_algorithm1(PredictorConfig(T=5, seed=1), IIDAdversary(0.5, 1))
    path = tmp_path / "trace.csv"
    with open(path, "w", newline="") as fh:
        trace.write_csv(fh)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("t,p_tilde,p,theta,bucket")
    assert len(lines) == 6


def test_script_exhaustion():
    with pytest.raises(ScriptExhausted):
        run_algorithm1(PredictorConfig(T=3, seed=0), ScriptedAdversary([1]))


def test_truthful_baseline_and_unsupported():
    cfg = PredictorConfig(T=200, m=8, seed=0)
    t, D = run_truthful_baseline(cfg, IIDAdversary(0.5, 3))
    assert np.all(t.predictions == 0.5)
    assert D >= 0
    with pytest.raises(UnsupportedMode):
        run_truthful_baseline(cfg, GreedyAdversary())


def test_nearest_grid_ties_go_down():
    assert nearest_grid_value(0.375, Grid(4)) == 0.25


def test_greedy_picks_larger_expected_gain():
    cfg = PredictorConfig(T=50, seed=2)
    t, trace = run_algorithm1(cfg, GreedyAdversary())
    assert t.T == 50


def test_parse_adversary(tmp_path):
    assert isinstance(parse_adversary("iid:0.2", seed=1), IIDAdversary)
    assert parse_adversary("alternate", T=4).states.tolist() == [0, 1, 0, 1]
    path = tmp_path / "s.csv"
    path.write_text("theta\n1\n0\n1\n")
    assert read_script(path).tolist() == [1, 0, 1]
    assert parse_adversary(f"script:{path}").states.tolist() == [1, 0, 1]
    with pytest.raises(ValueError):
        parse_adversary("nope")
    with pytest.raises(ValueError):
        IIDAdversary(1.5)


def test_two_point_mix_example():
    # c = (0.3, -0.1): mass 0.25 on 1/2 and 0.75 on 1/2 + eps zeroes the expected coefficient
    w = np.array([[0.3, 0.0], [0.0, 0.1]])
    d = round_distribution(w, Grid(2), 0.01)
    assert d.points == (0.5, 0.51)
    assert d.probs == pytest.approx((0.25, 0.75))
    assert h_value(d, w, 2) <= 0.01


def test_constant_adversary_drives_most_used_bucket_up():
    t, _ = run_algorithm1(PredictorConfig(T=4096, seed=0), ScriptedAdversary(np.ones(4096, dtype=int)))
    vals, counts = np.unique(t.predictions, return_counts=True)
    top = vals[np.argmax(counts)]
    assert t.states[t.predictions == top].mean() >= 0.9
    assert top == 1.0


def test_oracle_gains_touch_only_the_drawn_bucket():
    cfg = PredictorConfig(T=60, seed=3)
    _, trace = run_algorithm1(cfg, IIDAdversary(0.5, 3), record_weights=True)
    for pt, i, g in zip(trace.p_tilde, trace.bucket, trace.gain):
        assert cfg.grid.index_of(pt) == i
        assert abs(cfg.grid.value(i) - pt) <= 1 / cfg.m
    assert len(trace.weights) == 60


def test_truthful_baseline_constant_state():
    t, D = run_truthful_baseline(PredictorConfig(T=100, m=10, seed=0), ScriptedAdversary(np.ones(100, dtype=int)))
    assert np.all(t.predictions == 1.0) and D == 0.0


def test_truthful_baseline_per_bucket_tail():
    good = 0
    for seed in range(100):
        cfg = PredictorConfig(T=1000, m=10, seed=seed)
        t, _ = run_truthful_baseline(cfg, IIDAdversary(0.3, [seed, 1]))
        prof = bucketize(t, cfg.grid)
        q, n, qhat = prof.active()
        good += bool(np.all(np.abs(qhat - q) <= cfg.alpha / np.sqrt(n) + cfg.beta))
    assert good >= 99

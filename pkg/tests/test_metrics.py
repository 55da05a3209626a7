import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from cdlcal.metrics import (SandwichViolation, MetricReport, attribute_bound, cdl, cfdl, cfdl_v, compute_report,
                            deviation_chain_bound, deviation_stat, ece, l2cal, smcal, ucal, vcdl, vcdl_detail)
from cdlcal.scoring import VShapedRule, exponential_rule, merge_reports, quadratic_rule
from cdlcal.transcript import Grid, Transcript, bucketize, profile_from_buckets

from conftest import grid_profiles, transcripts

TOL = 1e-6
unit = st.floats(0.0, 1.0)


def intro():
    # predictions 0.4 / 0.6, five rounds each, conditional frequencies 0.2 / 0.8
    return Transcript([0.4] * 5 + [0.6] * 5, [1, 0, 0, 0, 0, 1, 1, 1, 1, 0])


def test_intro_values():
    prof = bucketize(intro())
    assert ece(prof) == pytest.approx(0.2, abs=1e-12)
    assert l2cal(prof) == pytest.approx(0.04, abs=1e-12)
    assert cfdl_v(prof, 0.5) == 0.0
    value, mu = vcdl(prof)
    # kink 0.4 catches the 0.4 -> 0.2 bucket and pays 0.2 / 0.6 on half the rounds
    assert value == pytest.approx(1 / 6, abs=1e-9)
    assert mu == pytest.approx(0.4)
    assert cdl(prof)[0] == pytest.approx(0.2, abs=1e-9)
    assert ucal(prof) == pytest.approx(0.0, abs=1e-9)


def test_single_bucket_witness():
    # always predict 1/2, state always 1: the best rule pays 1 for switching to 1
    prof = bucketize(Transcript([0.5] * 4, [1] * 4))
    value, rule = cdl(prof)
    assert value == pytest.approx(1.0, abs=1e-9)
    assert rule.is_proper() and rule.is_bounded()
    assert rule.score(1.0, 1) - rule.score(0.5, 1) == pytest.approx(1.0)
    assert ucal(prof) == pytest.approx(1.0, abs=1e-9)


def test_calibrated_transcript_is_zero():
    prof = bucketize(Transcript([0.25] * 4 + [1.0] * 2, [1, 0, 0, 0, 1, 1]))
    assert cdl(prof)[0] == pytest.approx(0.0, abs=1e-12)
    assert vcdl(prof)[0] == 0.0
    assert ece(prof) == 0.0


def test_vcdl_one_sided_limit():
    # q = 0.5, qhat = 0.2: the supremum over kinks in (0.2, 0.5] is attained at 0.5
    prof = bucketize(Transcript([0.5] * 5, [1, 0, 0, 0, 0]))
    res = vcdl_detail(prof)
    assert res.value == pytest.approx(0.3 / 0.5)
    assert res.mu == pytest.approx(0.5)


@given(grid_profiles())
def test_vcdl_dominates_dense_kink_search(prof):
    v = vcdl(prof)[0]
    mus = np.linspace(0, 1, 401)
    assert max(cfdl_v(prof, mu) for mu in mus) <= v + 1e-12


@given(grid_profiles())
def test_sandwiches(prof):
    c, rule = cdl(prof)
    e, l2, v = ece(prof), l2cal(prof), vcdl(prof)[0]
    assert e * e <= c + TOL and c <= 2 * e + TOL
    assert l2 <= c + TOL and c <= 2 * np.sqrt(l2) + TOL
    assert v <= c + TOL and c <= 2 * v + TOL
    assert 0 <= ucal(prof) <= c + TOL
    assert rule.is_proper() and rule.is_bounded()
    assert cfdl(prof, rule) == pytest.approx(c, abs=1e-9)


@given(grid_profiles(), unit)
def test_cdl_dominates_fixed_rules(prof, mu):
    c = cdl(prof)[0]
    for rule in (quadratic_rule(), exponential_rule(), VShapedRule(mu)):
        assert cfdl(prof, rule) <= c + TOL


@given(grid_profiles())
def test_l2_is_quadratic_cfdl(prof):
    assert l2cal(prof) == pytest.approx(cfdl(prof, quadratic_rule()), abs=1e-12)


@given(transcripts())
def test_smcal_below_ece(t):
    assert smcal(t) <= ece(bucketize(t)) + 1e-9


@given(grid_profiles(), unit)
def test_attribute_bound(prof, mu):
    assert cfdl_v(prof, mu) <= attribute_bound(prof, mu) + 1e-12


@given(grid_profiles(), unit, st.floats(0, 3), st.floats(0, 0.5))
def test_deviation_chain_bound(prof, mu, alpha, beta):
    assert cfdl_v(prof, mu) <= deviation_chain_bound(prof, alpha, beta, mu) + 1e-12


def test_deviation_stat_examples():
    prof = profile_from_buckets([0.5, 1.0], [4, 9], [4, 0])
    # G = (2, 9); alpha = 1, beta = 0 gives slacks 0 and 6
    assert deviation_stat(prof, 1.0, 0.0) == pytest.approx(6.0)
    assert deviation_stat(prof, 3.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        deviation_stat(prof, -1.0, 0.0)


@given(transcripts(), st.randoms())
def test_metrics_permutation_invariant(t, rnd):
    order = list(range(t.T))
    rnd.shuffle(order)
    a = compute_report(t, Grid(12))
    b = compute_report(t.permuted(order), Grid(12))
    for k in ("ece", "l2", "vcdl", "cdl", "ucal"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), abs=1e-12)


def _cdl_all_pairs_highs(prof):
    """CDL with every pairwise properness constraint, solved by scipy."""
    q, n, qhat = prof.active()
    reports = merge_reports(np.concatenate([q, qhat, [0.0, 1.0]]))
    idx = {r: k for k, r in enumerate(reports)}

    def find(x):
        return idx[min(reports, key=lambda r: abs(r - x))]

    k = reports.size
    c = np.zeros(2 * k)
    for qi, ni, hi in zip(q, n, qhat):
        a, b = find(qi), find(hi)
        c[2 * b + 1] += ni * hi
        c[2 * b] += ni * (1 - hi)
        c[2 * a + 1] -= ni * hi
        c[2 * a] -= ni * (1 - hi)
    rows = []
    for a, b in itertools.permutations(range(k), 2):
        r = reports[a]
        row = np.zeros(2 * k)
        row[2 * b + 1] += r
        row[2 * b] += 1 - r
        row[2 * a + 1] -= r
        row[2 * a] -= 1 - r
        rows.append(row)
    res = linprog(-c / prof.T, A_ub=np.array(rows), b_ub=np.zeros(len(rows)), bounds=[(0, 1)] * (2 * k),
                  method="highs")
    return -res.fun


@given(grid_profiles(max_m=8))
def test_cdl_matches_all_pairs_reference(prof):
    assert cdl(prof)[0] == pytest.approx(_cdl_all_pairs_highs(prof), abs=1e-9)


def test_report_check_raises():
    with pytest.raises(SandwichViolation):
        MetricReport(T=1, ece=0.1, cdl=0.5)


def test_compute_report_subset_and_json():
    rep = compute_report(intro(), metrics=("ece", "cdl"))
    assert rep.vcdl is None
    d = rep.to_dict(witness=True)
    assert d["cdl"] == pytest.approx(0.2)
    assert "cdl_rule" in d["witness"]
